"""Symmetric alpha-stable noise paths on uniform grids.

Each path is driven by its own generator seeded from a 64-bit integer. Step
``k`` consumes exactly one pair of uniforms, so the increment at step ``k``
depends only on ``(seed, k, params, dt)``. Coupled multi-resolution experiments draw a single
path at the finest resolution and coarsen it with :func:`restrict_path`.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySampleError, GridMismatchError, ParameterError

__all__ = [
    "LevyPath",
    "PathGrid",
    "StableParams",
    "char_exponent",
    "derive_seed",
    "empirical_char",
    "restrict_path",
    "simulate_path",
    "simulate_paths",
    "stable_increments",
    "standard_stable_sample",
    "write_path_csv",
]


@dataclass(frozen=True)
class StableParams:
    """Stability index ``alpha`` and scale ``c`` of E exp(i l Z(t)) = exp(-c t |l|^alpha)."""

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0) or not math.isfinite(self.alpha):
            raise ParameterError(f"alpha must lie in (0, 2], got {self.alpha!r}")
        if not (self.c > 0.0) or not math.isfinite(self.c):
            raise ParameterError(f"c must be positive, got {self.c!r}")

    def increment_scale(self, dt: float) -> float:
        return (self.c * dt) ** (1.0 / self.alpha)


@dataclass(frozen=True)
class PathGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not (self.T > 0.0) or not math.isfinite(self.T):
            raise ParameterError(f"horizon T must be positive, got {self.T!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def coarsen(self, factor: int) -> PathGrid:
        if factor < 1 or self.n_steps % factor:
            raise GridMismatchError(
                f"factor {factor} does not divide n_steps={self.n_steps}"
            )
        return PathGrid(self.T, self.n_steps // factor)


@dataclass(frozen=True, eq=False)
class LevyPath:
    grid: PathGrid
    values: np.ndarray
    seed: int
    params: StableParams
    # number of fine steps per node relative to the path as originally drawn
    stride: int = field(default=1)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    @property
    def identity(self) -> tuple:
        return (self.seed, self.params.alpha, self.params.c, self.grid.T, self.grid.n_steps * self.stride)

    def __eq__(self, other):
        if not isinstance(other, LevyPath):
            return NotImplemented
        return (
            self.grid == other.grid
            and self.seed == other.seed
            and self.params == other.params
            and np.array_equal(self.values, other.values)
        )

    @classmethod
    def from_values(cls, values, T: float, params: StableParams | None = None, seed: int = -1):
        """Wrap an explicit array of node values (e.g. ``Z == 0``) as a path."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ParameterError("a path needs at least two node values")
        if values[0] != 0.0:
            raise ParameterError("path must start at 0")
        return cls(PathGrid(T, values.size - 1), values, seed, params or StableParams(2.0))


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Per-path 64-bit seed; independent of the order in which paths are produced.

    ``stream`` selects an independent family of seeds for the same index.
    """
    key = (int(index),) if stream == 0 else (int(index), int(stream))
    ss = np.random.SeedSequence(int(master_seed), spawn_key=key)
    return int(ss.generate_state(1, np.uint64)[0])


def standard_stable_sample(alpha, u, e):
    """Chambers-Mallows-Stuck transform for the symmetric standard stable law.

    ``u`` is uniform on (-pi/2, pi/2) and ``e`` unit exponential; the result has
    characteristic function exp(-|l|^alpha). Works elementwise on arrays.
    """
    if not (0.0 < alpha <= 2.0):
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha!r}")
    u = np.asarray(u, dtype=float)
    e = np.asarray(e, dtype=float)
    if alpha == 1.0:
        out = np.tan(u)
    else:
        out = (
            np.sin(alpha * u)
            / np.cos(u) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha)
        )
    return out if out.ndim else float(out)


def _uniform_pairs(seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    v = rng.random((n, 2))
    u = np.pi * (v[:, 0] - 0.5)
    # 1 - v is in (0, 1], so e is finite; clamp the e == 0 corner
    e = np.maximum(-np.log1p(-v[:, 1]), np.finfo(float).tiny)
    return u, e


def stable_increments(params: StableParams, grid: PathGrid, seed: int) -> np.ndarray:
    u, e = _uniform_pairs(seed, grid.n_steps)
    return params.increment_scale(grid.dt) * standard_stable_sample(params.alpha, u, e)


def simulate_path(params: StableParams, grid: PathGrid, seed: int) -> LevyPath:
    values = np.empty(grid.n_steps + 1)
    values[0] = 0.0
    np.cumsum(stable_increments(params, grid, seed), out=values[1:])
    return LevyPath(grid, values, int(seed), params)


def simulate_paths(params: StableParams, grid: PathGrid, seeds: Sequence[int]) -> np.ndarray:
    """Stack the node values of several paths into an array of shape (len(seeds), n_steps + 1)."""
    out = np.empty((len(seeds), grid.n_steps + 1))
    for i, s in enumerate(seeds):
        out[i] = simulate_path(params, grid, s).values
    return out


def restrict_path(path: LevyPath, factor: int) -> LevyPath:
    grid = path.grid.coarsen(factor)
    return LevyPath(grid, path.values[::factor].copy(), path.seed, path.params, path.stride * factor)


def empirical_char(samples, lam: float) -> float:
    """Real part of the empirical characteristic function; exact for symmetric laws."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySampleError("empirical_char needs at least one sample")
    return float(np.mean(np.cos(lam * x)))


def char_exponent(params: StableParams, t: float, lam) -> np.ndarray:
    return np.exp(-params.c * t * np.abs(lam) ** params.alpha)


def write_path_csv(path, levy: LevyPath) -> None:
    from .report import write_csv

    write_csv(path, ["t", "Z"], ({"t": t, "Z": z} for t, z in zip(levy.grid.times, levy.values)))
