"""Min/max closure of solutions and pathwise-uniqueness probes on common noise.

If two functions solve the integral equation with the same initial value and
the same noise, their pointwise minimum and maximum solve it as well. On a
grid the closure holds only up to drift mis-evaluations at the steps where
the two candidates swap order, each worth at most ``2 K dt`` for a drift
bounded by ``K``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drift import DriftSpec
from .errors import GridMismatchError, UnsupportedDriftError
from .noise import LevyPath, PathGrid, StableParams, derive_seed, simulate_path
from .parallel import map_chunks
from .solver import (
    ProbeLevel,
    SolutionPath,
    _dyadic_pairs,
    euler_batch,
    integral_residual,
    midpoint_batch,
    residual_batch,
    summarize_levels,
)

__all__ = [
    "LatticeReport",
    "TrialCensus",
    "count_crossings",
    "lattice_check",
    "lattice_trials",
    "pointwise_min_max",
    "uniqueness_probe",
]


@dataclass(frozen=True)
class LatticeReport:
    residual_in_1: float
    residual_in_2: float
    residual_min: float
    residual_max: float
    tolerance_used: float
    crossings: int

    @property
    def verdict(self) -> bool:
        return self.residual_min <= self.tolerance_used and self.residual_max <= self.tolerance_used


def pointwise_min_max(sol1: SolutionPath, sol2: SolutionPath) -> tuple[SolutionPath, SolutionPath]:
    """Node-wise minimum and maximum of two candidate paths.

    Unequal initial values are allowed for diagnostics; the min (max) of the
    two is recorded as the initial value of the result.
    """
    if sol1.grid != sol2.grid:
        raise GridMismatchError("solutions live on different grids")
    ref = sol1.noise_ref if sol1.noise_ref == sol2.noise_ref else None
    lo = SolutionPath(sol1.grid, np.minimum(sol1.values, sol2.values), min(sol1.x0, sol2.x0),
                      None, ref, "injected")
    hi = SolutionPath(sol1.grid, np.maximum(sol1.values, sol2.values), max(sol1.x0, sol2.x0),
                      None, ref, "injected")
    return lo, hi


def count_crossings(diff: np.ndarray) -> np.ndarray:
    """Number of strict sign changes along the last axis, zeros skipped."""
    diff = np.atleast_2d(diff)
    s = np.sign(diff)
    out = np.zeros(diff.shape[0], dtype=int)
    for i, row in enumerate(s):
        nz = row[row != 0]
        out[i] = int(np.count_nonzero(nz[1:] != nz[:-1]))
    return out


def _closure_bound(drift: DriftSpec, values: np.ndarray) -> float:
    K = drift.bound
    if not math.isfinite(K):
        K = drift.local_bound(float(np.min(values)), float(np.max(values)))
    if not math.isfinite(K):
        raise UnsupportedDriftError(f"drift {drift.kind!r} has no usable bound")
    return float(K)


def lattice_check(sol1: SolutionPath, sol2: SolutionPath, drift: DriftSpec, path: LevyPath,
                  safety_factor: float = 2.0) -> LatticeReport:
    """Residuals of both inputs and of their min/max, with the discrete tolerance.

    The tolerance is ``safety_factor * (r1 + r2 + 2 K dt)``. ``K`` is the
    drift's global bound, or for locally bounded kinds (e.g. holder_power)
    its bound over the range both candidates visit.
    """
    lo, hi = pointwise_min_max(sol1, sol2)
    K = _closure_bound(drift, np.concatenate([sol1.values, sol2.values]))
    r1 = integral_residual(sol1, drift, path)
    r2 = integral_residual(sol2, drift, path)
    rmin = integral_residual(lo, drift, path)
    rmax = integral_residual(hi, drift, path)
    tol = safety_factor * (r1 + r2 + 2.0 * K * path.grid.dt)
    crossings = int(count_crossings(sol1.values - sol2.values)[0])
    return LatticeReport(r1, r2, rmin, rmax, tol, crossings)


@dataclass(frozen=True)
class TrialCensus:
    """Per-trial lattice results of a seeded Monte Carlo census."""

    r1: np.ndarray
    r2: np.ndarray
    rmin: np.ndarray
    rmax: np.ndarray
    tolerance: np.ndarray
    crossings: np.ndarray

    @property
    def verdicts(self) -> np.ndarray:
        return (self.rmin <= self.tolerance) & (self.rmax <= self.tolerance)

    @property
    def pass_fraction(self) -> float:
        return float(np.mean(self.verdicts)) if self.verdicts.size else 0.0

    def rows(self):
        for i in range(self.r1.size):
            yield {"trial": i, "r1": self.r1[i], "r2": self.r2[i], "rmin": self.rmin[i],
                   "rmax": self.rmax[i], "verdict": bool(self.verdicts[i])}


def _lattice_chunk(lo, hi, x0, drift_a, drift_b, drift, params, T, n_steps, master_seed, safety_factor):
    grid = PathGrid(T, n_steps)
    Z = np.stack([simulate_path(params, grid, derive_seed(master_seed, i)).values for i in range(lo, hi)])
    dt = grid.dt
    xa, _ = euler_batch(x0, drift_a, Z, dt)
    xb, _ = euler_batch(x0, drift_b, Z, dt)
    mn, mx = np.minimum(xa, xb), np.maximum(xa, xb)
    r1 = residual_batch(xa, x0, drift, Z, dt)
    r2 = residual_batch(xb, x0, drift, Z, dt)
    rmin = residual_batch(mn, x0, drift, Z, dt)
    rmax = residual_batch(mx, x0, drift, Z, dt)
    K = np.array([_closure_bound(drift, np.concatenate([a, b])) for a, b in zip(xa, xb)])
    tol = safety_factor * (r1 + r2 + 2.0 * K * dt)
    return np.stack([r1, r2, rmin, rmax, tol, count_crossings(xa - xb)])


def lattice_trials(x0: float, drift_a: DriftSpec, drift_b: DriftSpec, drift: DriftSpec,
                   params: StableParams, T: float, n_steps: int, n_trials: int,
                   master_seed: int, safety_factor: float = 2.0, workers: int = 1) -> TrialCensus:
    """Census over seeded trials of two Euler solutions on one noise path.

    ``drift_a`` and ``drift_b`` build the two candidates (e.g. two tie-break
    conventions of sign at 0); residuals are taken against ``drift``.
    """
    chunks = map_chunks(_lattice_chunk, n_trials,
                        (x0, drift_a, drift_b, drift, params, T, n_steps, master_seed, safety_factor),
                        workers)
    if not chunks:
        empty = np.empty(0)
        return TrialCensus(empty, empty, empty, empty, empty, np.empty(0, dtype=int))
    r1, r2, rmin, rmax, tol, cr = np.concatenate(chunks, axis=1)
    return TrialCensus(r1, r2, rmin, rmax, tol, cr.astype(int))


def _uniqueness_chunk(lo, hi, x0, drift, params, T, finest_n, levels, master_seed):
    grid = PathGrid(T, finest_n)
    Z = np.stack([simulate_path(params, grid, derive_seed(master_seed, i)).values for i in range(lo, hi)])
    pairs = _dyadic_pairs(finest_n, levels)
    out = np.empty((hi - lo, len(pairs)))
    for j, (n, n_noise) in enumerate(pairs):
        _, Se = euler_batch(x0, drift, Z[:, :: finest_n // n], T / n)
        _, Sm = midpoint_batch(x0, drift, Z[:, :: finest_n // n_noise], T / n)
        out[:, j] = np.max(np.abs(Se - Sm), axis=1)
    return out


def uniqueness_probe(x0: float, drift: DriftSpec, params: StableParams, T: float, finest_n: int,
                     levels: int, n_paths: int, master_seed: int, workers: int = 1) -> list[ProbeLevel]:
    """Sup-distance between two different discretisations driven by the same noise.

    At each level the left-endpoint Euler scheme on ``n`` steps is compared
    with the half-step-shifted scheme, which reads the noise at ``2 n``
    steps. Rows run from coarse to fine; ``coarse_n`` is the solution grid and
    ``fine_n`` the noise resolution used by the second construction.
    """
    pairs = _dyadic_pairs(finest_n, levels)
    chunks = map_chunks(_uniqueness_chunk, n_paths,
                        (x0, drift, params, T, finest_n, levels, master_seed), workers)
    return summarize_levels(pairs, np.concatenate(chunks, axis=0))
