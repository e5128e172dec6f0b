"""Experiment presets shipped with the package, one per verified claim."""

from importlib import resources
from pathlib import Path


def preset_dir() -> Path:
    return Path(str(resources.files(__name__)))


def list_presets(include_counterexamples: bool = False) -> list[Path]:
    files = sorted(preset_dir().glob("*.yaml"))
    if include_counterexamples:
        files += sorted((preset_dir() / "counterexamples").glob("*.yaml"))
    return files


def preset_path(name: str) -> Path:
    p = preset_dir() / (name if name.endswith(".yaml") else f"{name}.yaml")
    if not p.exists():
        p = preset_dir() / "counterexamples" / p.name
    if not p.exists():
        raise FileNotFoundError(f"no preset named {name!r}")
    return p
