import time
from pathlib import Path

import pytest

from stablesde.cli import run_experiment
from stablesde.config import load_config
from stablesde.presets import list_presets

# criterion number -> one-line outcome, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


class PresetRuns:
    """Runs each shipped preset at most once per worker count, on demand."""

    def __init__(self, root: Path):
        self.root = root
        self._done = {}

    def run(self, path: Path, workers: int = 1):
        """Return (output dir, manifest or raised exception, seconds)."""
        key = (path.parent.name, path.name, workers)
        if key not in self._done:
            out = self.root / f"w{workers}" / path.parent.name / path.stem
            cfg = load_config(path)
            start = time.perf_counter()
            try:
                result = run_experiment(cfg, workers=workers, out=out)
            except Exception as exc:  # refusals are results too
                result = exc
            self._done[key] = (out, result, time.perf_counter() - start)
        return self._done[key]


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    return PresetRuns(tmp_path_factory.mktemp("presets"))


@pytest.fixture(scope="session")
def all_presets():
    return list_presets(include_counterexamples=True)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
