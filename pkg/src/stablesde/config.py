"""Experiment configuration: YAML text <-> typed config objects.

Drifts, drift sequences, initial-value sequences and measures appear as
tagged records, e.g. ``{kind: mollified_sign, epsilon: 0.25}``.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, fields
from typing import Any

import yaml

from .drift import (
    DriftSequence,
    DriftSpec,
    MeasureSpec,
    Zero,
    drift_from_dict,
    drift_sequence_from_dict,
    measure_from_dict,
)
from .errors import ConfigError, ParameterError
from .noise import StableParams
from .stability import StabilitySpec, XSequence, x_sequence_from_dict

__all__ = [
    "EXPERIMENT_KINDS",
    "DensityParams",
    "ExperimentConfig",
    "LatticeParams",
    "SimulateParams",
    "StabilityParams",
    "UniquenessParams",
    "dump_config",
    "load_config",
    "parse_config",
]


def _num(d: Mapping, key: str, default=None, *, cast=float, positive=False, prefix=""):
    name = f"{prefix}{key}"
    if key not in d:
        if default is None:
            raise ConfigError(name, "missing required value")
        return default
    v = d[key]
    if isinstance(v, bool):
        raise ConfigError(name, f"expected a number, got {v!r}")
    try:
        out = cast(v)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {v!r}") from None
    if cast is int and out != v:
        raise ConfigError(name, f"expected an integer, got {v!r}")
    if cast is float and not math.isfinite(out):
        raise ConfigError(name, f"expected a finite number, got {v!r}")
    if positive and not out > 0:
        raise ConfigError(name, f"must be positive, got {v!r}")
    return out


def _num_list(d: Mapping, key: str, default=None, *, cast=float, prefix=""):
    name = f"{prefix}{key}"
    if key not in d:
        if default is None:
            raise ConfigError(name, "missing required value")
        return tuple(default)
    v = d[key]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigError(name, "expected a nonempty list")
    return tuple(_num({"x": item}, "x", cast=cast, prefix=f"{name}[{i}]") for i, item in enumerate(v))


def _stable(d: Mapping) -> StableParams:
    if not isinstance(d.get("params"), Mapping):
        raise ConfigError("params", "expected a record {alpha, c}")
    p = d["params"]
    extra = set(p) - {"alpha", "c"}
    if extra:
        raise ConfigError("params", f"unexpected keys {sorted(extra)}")
    try:
        return StableParams(_num(p, "alpha", prefix="params."), _num(p, "c", 1.0, prefix="params."))
    except ParameterError as exc:
        raise ConfigError("params", str(exc)) from exc


def _drift(d: Mapping, key: str, default: DriftSpec | None = None) -> DriftSpec:
    if key not in d:
        if default is None:
            raise ConfigError(key, "missing required drift")
        return default
    return drift_from_dict(d[key], key)


def _check_keys(d: Mapping, cls, kind: str):
    allowed = {f.name for f in fields(cls)}
    extra = set(d) - allowed
    if extra:
        raise ConfigError(kind, f"unexpected keys {sorted(extra)}")


def _params_dict(p: StableParams) -> dict:
    return {"alpha": p.alpha, "c": p.c}


@dataclass(frozen=True)
class SimulateParams:
    params: StableParams
    T: float = 1.0
    n_steps: int = 1
    n_paths: int = 1_000_000
    lambdas: tuple = (0.5, 1.0, 2.0)
    tolerance_factor: float = 4.0
    dump_paths: int = 1
    dump_steps: int = 1024

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, cls, "simulate")
        return cls(_stable(d), _num(d, "T", 1.0, positive=True), _num(d, "n_steps", 1, cast=int, positive=True),
                   _num(d, "n_paths", 1_000_000, cast=int, positive=True), _num_list(d, "lambdas", (0.5, 1.0, 2.0)),
                   _num(d, "tolerance_factor", 4.0, positive=True), _num(d, "dump_paths", 1, cast=int),
                   _num(d, "dump_steps", 1024, cast=int, positive=True))

    def to_dict(self):
        return {"params": _params_dict(self.params), "T": self.T, "n_steps": self.n_steps,
                "n_paths": self.n_paths, "lambdas": list(self.lambdas),
                "tolerance_factor": self.tolerance_factor, "dump_paths": self.dump_paths,
                "dump_steps": self.dump_steps}


@dataclass(frozen=True)
class LatticeParams:
    """``mode: euler_pair`` runs a seeded census of two Euler solutions built with
    ``drift`` and ``drift_b``; ``mode: injected`` checks explicit polynomial
    candidates (coefficients of t**k) against ``drift`` with Z == 0."""

    mode: str
    drift: DriftSpec
    params: StableParams | None = None
    T: float = 1.0
    n_steps: int = 4096
    x0: float = 0.0
    drift_b: DriftSpec | None = None
    n_trials: int = 500
    safety_factor: float = 2.0
    required_pass_fraction: float = 0.99
    candidates: tuple = ()
    residual_ceiling_dt: float | None = None

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, cls, "lattice")
        mode = d.get("mode", "euler_pair")
        if mode not in ("euler_pair", "injected"):
            raise ConfigError("mode", f"unknown lattice mode {mode!r}")
        common = dict(
            mode=mode, drift=_drift(d, "drift"), T=_num(d, "T", 1.0, positive=True),
            n_steps=_num(d, "n_steps", 4096, cast=int, positive=True),
            safety_factor=_num(d, "safety_factor", 2.0, positive=True),
            residual_ceiling_dt=_num(d, "residual_ceiling_dt", math.inf) if "residual_ceiling_dt" in d else None,
        )
        if mode == "injected":
            cands = d.get("candidates")
            if not isinstance(cands, list) or len(cands) != 2:
                raise ConfigError("candidates", "injected mode needs exactly two coefficient lists")
            cands = tuple(_num_list({"c": c}, "c", prefix=f"candidates[{i}].") for i, c in enumerate(cands))
            return cls(candidates=cands, **common)
        return cls(
            params=_stable(d), x0=_num(d, "x0", 0.0), drift_b=_drift(d, "drift_b", common["drift"]),
            n_trials=_num(d, "n_trials", 500, cast=int, positive=True),
            required_pass_fraction=_num(d, "required_pass_fraction", 0.99),
            **common)

    def to_dict(self):
        out = {"mode": self.mode, "drift": self.drift.to_dict(), "T": self.T, "n_steps": self.n_steps,
               "safety_factor": self.safety_factor}
        if self.residual_ceiling_dt is not None:
            out["residual_ceiling_dt"] = self.residual_ceiling_dt
        if self.mode == "injected":
            out["candidates"] = [list(c) for c in self.candidates]
        else:
            out.update(params=_params_dict(self.params), x0=self.x0, drift_b=self.drift_b.to_dict(),
                       n_trials=self.n_trials, required_pass_fraction=self.required_pass_fraction)
        return out


@dataclass(frozen=True)
class UniquenessParams:
    params: StableParams
    drift: DriftSpec
    x0: float = 0.0
    T: float = 1.0
    finest_n: int = 2**14
    levels: int = 4
    n_paths: int = 200
    probes: tuple = ("self_convergence", "two_schemes")

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, cls, "uniqueness")
        probes = tuple(d.get("probes", ("self_convergence", "two_schemes")))
        bad = set(probes) - {"self_convergence", "two_schemes"}
        if bad or not probes:
            raise ConfigError("probes", f"unknown probes {sorted(bad)}")
        return cls(_stable(d), _drift(d, "drift"), _num(d, "x0", 0.0), _num(d, "T", 1.0, positive=True),
                   _num(d, "finest_n", 2**14, cast=int, positive=True), _num(d, "levels", 4, cast=int, positive=True),
                   _num(d, "n_paths", 200, cast=int, positive=True), probes)

    def to_dict(self):
        return {"params": _params_dict(self.params), "drift": self.drift.to_dict(), "x0": self.x0,
                "T": self.T, "finest_n": self.finest_n, "levels": self.levels, "n_paths": self.n_paths,
                "probes": list(self.probes)}


@dataclass(frozen=True)
class StabilityParams:
    params: StableParams
    x_seq: XSequence
    drifts: DriftSequence
    mu: MeasureSpec
    T: float = 1.0
    epsilons: tuple = (0.1, 0.25, 0.5)
    indices: tuple = (2, 8, 32, 128)
    n_paths: int = 2000
    finest_n: int = 1024
    x_tol: float = 1e-2
    deltas: tuple = (0.01, 0.1)
    measure_tol: float = 0.05
    closed_form: bool = False

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, cls, "stability")
        params = _stable(d)
        mu = measure_from_dict(d["mu"]) if "mu" in d else MeasureSpec(params.alpha)
        if "x_seq" not in d or "drifts" not in d:
            raise ConfigError("x_seq" if "x_seq" not in d else "drifts", "missing required sequence")
        return cls(params, x_sequence_from_dict(d["x_seq"]), drift_sequence_from_dict(d["drifts"]), mu,
                   _num(d, "T", 1.0, positive=True), _num_list(d, "epsilons", (0.1, 0.25, 0.5)),
                   _num_list(d, "indices", (2, 8, 32, 128), cast=int),
                   _num(d, "n_paths", 2000, cast=int, positive=True),
                   _num(d, "finest_n", 1024, cast=int, positive=True),
                   _num(d, "x_tol", 1e-2, positive=True), _num_list(d, "deltas", (0.01, 0.1)),
                   _num(d, "measure_tol", 0.05, positive=True), bool(d.get("closed_form", False)))

    def spec(self, master_seed: int) -> StabilitySpec:
        try:
            return StabilitySpec(self.x_seq, self.drifts, self.params, self.T, self.epsilons, self.indices,
                                 self.n_paths, self.finest_n, master_seed, self.mu, x_tol=self.x_tol,
                                 deltas=self.deltas, measure_tol=self.measure_tol)
        except ParameterError as exc:
            raise ConfigError("stability", str(exc)) from exc

    def to_dict(self):
        return {"params": _params_dict(self.params), "x_seq": self.x_seq.to_dict(),
                "drifts": self.drifts.to_dict(), "mu": self.mu.to_dict(), "T": self.T,
                "epsilons": list(self.epsilons), "indices": list(self.indices), "n_paths": self.n_paths,
                "finest_n": self.finest_n, "x_tol": self.x_tol, "deltas": list(self.deltas),
                "measure_tol": self.measure_tol, "closed_form": self.closed_form}


@dataclass(frozen=True)
class DensityParams:
    params: StableParams
    drift: DriftSpec = Zero()
    x: float = 0.0
    times: tuple = (1.0,)
    M: int = 1_000_000
    n_steps: int = 64
    y_grid: tuple = (-10.0, 10.0, 801)
    bandwidth: float | None = None
    k_fraction: float = 0.005
    linf_tol: float | None = 0.01
    n_ratio_max: float = 2.0
    n_hat_ceiling: float | None = None
    tail_tol: float = 0.1

    @classmethod
    def from_dict(cls, d):
        _check_keys(d, cls, "density")
        g = d.get("y_grid", {"start": -10.0, "stop": 10.0, "num": 801})
        if not isinstance(g, Mapping):
            raise ConfigError("y_grid", "expected a record {start, stop, num}")
        grid = (_num(g, "start", prefix="y_grid."), _num(g, "stop", prefix="y_grid."),
                _num(g, "num", cast=int, positive=True, prefix="y_grid."))
        if not grid[1] > grid[0]:
            raise ConfigError("y_grid", "stop must exceed start")
        opt = lambda k: _num(d, k, positive=True) if d.get(k) is not None else None
        return cls(_stable(d), _drift(d, "drift", Zero()), _num(d, "x", 0.0),
                   _num_list(d, "times", (1.0,)), _num(d, "M", 1_000_000, cast=int, positive=True),
                   _num(d, "n_steps", 64, cast=int, positive=True), grid, opt("bandwidth"),
                   _num(d, "k_fraction", 0.005, positive=True), opt("linf_tol"),
                   _num(d, "n_ratio_max", 2.0, positive=True), opt("n_hat_ceiling"),
                   _num(d, "tail_tol", 0.1, positive=True))

    def to_dict(self):
        return {"params": _params_dict(self.params), "drift": self.drift.to_dict(), "x": self.x,
                "times": list(self.times), "M": self.M, "n_steps": self.n_steps,
                "y_grid": {"start": self.y_grid[0], "stop": self.y_grid[1], "num": self.y_grid[2]},
                "bandwidth": self.bandwidth, "k_fraction": self.k_fraction, "linf_tol": self.linf_tol,
                "n_ratio_max": self.n_ratio_max, "n_hat_ceiling": self.n_hat_ceiling, "tail_tol": self.tail_tol}


EXPERIMENT_KINDS = {
    "simulate": SimulateParams,
    "lattice": LatticeParams,
    "uniqueness": UniquenessParams,
    "stability": StabilityParams,
    "density": DensityParams,
}
_TOP_KEYS = {"experiment", "master_seed", "workers", "output_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    body: Any
    master_seed: int | None = None
    workers: int | str | None = None
    output_dir: str | None = None

    def to_dict(self) -> dict:
        out = {"experiment": self.kind}
        if self.master_seed is not None:
            out["master_seed"] = self.master_seed
        if self.workers is not None:
            out["workers"] = self.workers
        if self.output_dir is not None:
            out["output_dir"] = self.output_dir
        out.update(self.body.to_dict())
        return out

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (worker count and output path excluded)."""
        d = self.to_dict()
        d.pop("workers", None)
        d.pop("output_dir", None)
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def parse_config(data: Mapping) -> ExperimentConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("<root>", "config must be a mapping")
    kind = data.get("experiment")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError("experiment", f"unknown experiment kind {kind!r}; known: {sorted(EXPERIMENT_KINDS)}")
    seed = data.get("master_seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0 or seed >= 2**64):
        raise ConfigError("master_seed", f"expected an unsigned 64-bit integer, got {seed!r}")
    workers = data.get("workers")
    if workers is not None and workers != "auto" and (isinstance(workers, bool) or not isinstance(workers, int)
                                                      or workers < 1):
        raise ConfigError("workers", f"expected a positive integer or 'auto', got {workers!r}")
    out = data.get("output_dir")
    body = {k: v for k, v in data.items() if k not in _TOP_KEYS}
    return ExperimentConfig(kind, EXPERIMENT_KINDS[kind].from_dict(body), seed, workers,
                            None if out is None else str(out))


def load_config(text_or_path) -> ExperimentConfig:
    """Parse YAML text, or the file at the given path."""
    text = text_or_path
    if not isinstance(text, str) or "\n" not in text:
        try:
            with open(text_or_path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read config: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<yaml>", str(exc)) from exc
    return parse_config(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
