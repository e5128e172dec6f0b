"""Euler solutions of xi(t) = x + int_0^t a(xi(s)) ds + Z(t) on a noise path.

The scheme keeps the drift integral ``S`` as a separate running sum and forms
each node as ``(x0 + S_k) + Z_k``. The drift integral is accumulated
left-to-right, and :func:`integral_residual` recomputes it with exactly the
same operations, so the residual of an Euler output is exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drift import DriftSpec
from .errors import GridMismatchError, NumericOverflowError, ParameterError
from .noise import LevyPath, PathGrid, StableParams, derive_seed, simulate_path
from .parallel import map_chunks

__all__ = [
    "ProbeLevel",
    "SolutionPath",
    "euler_batch",
    "euler_solve",
    "integral_residual",
    "midpoint_batch",
    "residual_batch",
    "self_convergence_probe",
    "summarize_levels",
    "sup_distance",
    "write_solution_csv",
]


@dataclass(frozen=True, eq=False)
class SolutionPath:
    grid: PathGrid
    values: np.ndarray
    x0: float
    drift: DriftSpec | None
    noise_ref: tuple | None
    provenance: str = "euler"
    drift_integral: np.ndarray | None = None

    def __post_init__(self):
        if self.values.shape != (self.grid.n_steps + 1,):
            raise GridMismatchError("values do not match the grid")
        if self.provenance not in ("euler", "injected"):
            raise ParameterError(f"unknown provenance {self.provenance!r}")

    @classmethod
    def injected(cls, values, T: float, x0: float | None = None, noise_ref=None) -> SolutionPath:
        values = np.asarray(values, dtype=float)
        x0 = float(values[0]) if x0 is None else float(x0)
        return cls(PathGrid(T, values.size - 1), values, x0, None, noise_ref, "injected")


def _time_major(Z: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_2d(Z).T, dtype=float)


def euler_batch(x0, drift: DriftSpec, Z: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Euler scheme for a batch of noise paths.

    ``Z`` has shape (m, n + 1) with ``Z[:, 0] == 0``; ``x0`` is a scalar or
    shape (m,). Returns ``(xi, S)`` of the same shape, ``S`` being the drift
    integral.
    """
    Zt = _time_major(Z)
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), Zt.shape[1:])
    xi = np.empty_like(Zt)
    S = np.empty_like(Zt)
    S[0] = 0.0
    xi[0] = (x0 + S[0]) + Zt[0]
    for k in range(Zt.shape[0] - 1):
        a = drift(xi[k])
        if not np.all(np.isfinite(a)):
            raise NumericOverflowError(k)
        S[k + 1] = S[k] + a * dt
        xi[k + 1] = (x0 + S[k + 1]) + Zt[k + 1]
    return xi.T, S.T


def midpoint_batch(x0, drift: DriftSpec, Z_half: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Half-step-shifted scheme: the drift is evaluated at a predicted mid-step state.

    ``Z_half`` carries the noise at twice the resolution of the output grid
    (shape (m, 2n + 1)); ``dt`` is the step of the output grid.
    """
    Zh = _time_major(Z_half)
    if (Zh.shape[0] - 1) % 2:
        raise GridMismatchError("half-step scheme needs an even number of fine steps")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), Zh.shape[1:])
    n = (Zh.shape[0] - 1) // 2
    xi = np.empty((n + 1, Zh.shape[1]))
    S = np.empty_like(xi)
    S[0] = 0.0
    xi[0] = (x0 + S[0]) + Zh[0]
    for k in range(n):
        a = drift(xi[k])
        mid = xi[k] + a * (0.5 * dt) + (Zh[2 * k + 1] - Zh[2 * k])
        b = drift(mid)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise NumericOverflowError(k)
        S[k + 1] = S[k] + b * dt
        xi[k + 1] = (x0 + S[k + 1]) + Zh[2 * k + 2]
    return xi.T, S.T


def residual_batch(xi: np.ndarray, x0, drift: DriftSpec, Z: np.ndarray, dt: float) -> np.ndarray:
    """Per-path max_k |xi_k - (x0 + sum_{j<k} a(xi_j) dt + Z_k)|, left-endpoint sums."""
    Xt = _time_major(xi)
    Zt = _time_major(Z)
    if Xt.shape != Zt.shape:
        raise GridMismatchError("candidate and noise have different shapes")
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), Xt.shape[1:])
    S = np.zeros(Xt.shape[1])
    worst = np.abs(Xt[0] - ((x0 + S) + Zt[0]))
    for k in range(Xt.shape[0] - 1):
        S = S + drift(Xt[k]) * dt
        np.maximum(worst, np.abs(Xt[k + 1] - ((x0 + S) + Zt[k + 1])), out=worst)
    return worst


def _check_grid(candidate: SolutionPath, path: LevyPath):
    if candidate.grid != path.grid:
        raise GridMismatchError(f"candidate grid {candidate.grid} differs from noise grid {path.grid}")


def euler_solve(x0: float, drift: DriftSpec, path: LevyPath) -> SolutionPath:
    xi, S = euler_batch(x0, drift, path.values[None, :], path.grid.dt)
    return SolutionPath(path.grid, xi[0], float(x0), drift, path.identity, "euler", S[0])


def integral_residual(candidate: SolutionPath, drift: DriftSpec, path: LevyPath) -> float:
    _check_grid(candidate, path)
    return float(residual_batch(candidate.values, candidate.x0, drift, path.values, path.grid.dt)[0])


def sup_distance(a: SolutionPath, b: SolutionPath) -> float:
    """Sup over grid nodes of |a - b|.

    When both are Euler solutions on the same noise the shared noise term is
    left out of the subtraction (it cancels exactly in real arithmetic).
    """
    if a.grid != b.grid:
        raise GridMismatchError("solutions live on different grids")
    if (a.drift_integral is not None and b.drift_integral is not None
            and a.noise_ref is not None and a.noise_ref == b.noise_ref):
        return float(np.max(np.abs((a.x0 - b.x0) + (a.drift_integral - b.drift_integral))))
    return float(np.max(np.abs(a.values - b.values)))


@dataclass(frozen=True)
class ProbeLevel:
    """Distribution of per-path sup-distances at one refinement level."""

    level: int
    coarse_n: int
    fine_n: int
    median: float
    q1: float
    q3: float
    mean: float
    distances: np.ndarray

    def row(self) -> dict:
        return {"level": self.level, "coarse_n": self.coarse_n, "fine_n": self.fine_n,
                "median": self.median, "q1": self.q1, "q3": self.q3, "mean": self.mean}


def summarize_levels(pairs: list[tuple[int, int]], dists: np.ndarray) -> list[ProbeLevel]:
    out = []
    for j, (cn, fn) in enumerate(pairs):
        d = dists[:, j]
        q1, med, q3 = np.percentile(d, [25, 50, 75])
        out.append(ProbeLevel(j + 1, cn, fn, float(med), float(q1), float(q3), float(np.mean(d)), d))
    return out


def _dyadic_pairs(finest_n: int, levels: int) -> list[tuple[int, int]]:
    if levels < 1:
        raise ParameterError("levels must be at least 1")
    if finest_n % (2**levels):
        raise GridMismatchError(f"finest_n={finest_n} is not divisible by 2**{levels}")
    # coarse to fine
    return [(finest_n // 2**l, finest_n // 2 ** (l - 1)) for l in range(levels, 0, -1)]


def _self_convergence_chunk(lo, hi, x0, drift, params, T, finest_n, levels, master_seed):
    grid = PathGrid(T, finest_n)
    Z = np.stack([simulate_path(params, grid, derive_seed(master_seed, i)).values for i in range(lo, hi)])
    pairs = _dyadic_pairs(finest_n, levels)
    out = np.empty((hi - lo, len(pairs)))
    for j, (cn, fn) in enumerate(pairs):
        fc, ff = finest_n // cn, finest_n // fn
        _, Sc = euler_batch(x0, drift, Z[:, ::fc], T / cn)
        _, Sf = euler_batch(x0, drift, Z[:, ::ff], T / fn)
        out[:, j] = np.max(np.abs(Sc - Sf[:, ::2]), axis=1)
    return out


def self_convergence_probe(x0: float, drift: DriftSpec, params: StableParams, T: float,
                           finest_n: int, levels: int, master_seed: int, n_paths: int,
                           workers: int = 1) -> list[ProbeLevel]:
    """Sup-distance between Euler solutions on successive dyadic grids, common noise.

    Rows run from the coarsest pair to the finest. Every path is drawn once at
    ``finest_n`` steps and restricted to the coarser grids.
    """
    pairs = _dyadic_pairs(finest_n, levels)
    chunks = map_chunks(_self_convergence_chunk, n_paths,
                        (x0, drift, params, T, finest_n, levels, master_seed), workers)
    return summarize_levels(pairs, np.concatenate(chunks, axis=0))


def write_solution_csv(path_or_file, sol: SolutionPath, noise: LevyPath) -> None:
    from .report import write_csv

    _check_grid(sol, noise)
    rows = [{"t": t, "xi": x, "Z": z} for t, x, z in zip(sol.grid.times, sol.values, noise.values)]
    write_csv(path_or_file, ["t", "xi", "Z"], rows)
