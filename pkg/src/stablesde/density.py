"""Transition-density estimation and the polynomial density bound.

For alpha in (1, 2) and bounded drift the density of xi(t) started at x
satisfies p(t, x, y) <= N t / (t + |x - y|)^(alpha + 1) uniformly over
t in (0, T]. This module estimates p from simulated endpoints with a
Gaussian kernel, checks it against a Fourier-inversion oracle for the
drift-free law, fits the smallest admissible N on a grid, and estimates the
survival-tail exponent with the Hill estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .drift import DriftSpec
from .errors import AccuracyWarning, InsufficientDataError, ParameterError
from .noise import PathGrid, StableParams, derive_seed, simulate_path
from .parallel import map_chunks
from .solver import euler_batch

__all__ = [
    "BoundFit",
    "DensityEstimate",
    "bound_ratio",
    "estimate_density",
    "fit_bound_constant",
    "gaussian_kde",
    "sample_endpoints",
    "silverman_iqr_bandwidth",
    "stable_density_oracle",
    "tail_exponent_estimate",
]

# Endpoint sampling splits work in chunks of this many paths (fixed, so the
# result does not depend on the worker count).
SAMPLE_CHUNK = 4096
CUTOFF_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    t: float
    x: float
    y_grid: np.ndarray
    p_hat: np.ndarray
    M: int
    bandwidth: float
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def mass(self) -> float:
        return float(np.trapezoid(self.p_hat, self.y_grid))


@dataclass(frozen=True)
class BoundFit:
    alpha: float
    t: float
    N_hat: float
    argmax_y: float


def silverman_iqr_bandwidth(samples) -> float:
    """0.9 * (IQR / 1.349) * M**(-1/5); the IQR stays finite for heavy tails."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("bandwidth rule needs at least two samples")
    q1, q3 = np.percentile(x, [25, 75])
    return 0.9 * (q3 - q1) / 1.349 * x.size ** (-0.2)


def gaussian_kde(samples, y_grid, bandwidth: float, oversample: int = 8) -> np.ndarray:
    """Gaussian-kernel density estimate evaluated on ``y_grid``.

    Samples are linearly binned on a mesh of spacing ``bandwidth / oversample``
    covering the grid plus eight bandwidths, then convolved with the sampled
    kernel. Samples outside that window contribute less than exp(-32) of a
    kernel peak to any grid point and are dropped.
    """
    if not bandwidth > 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth!r}")
    x = np.asarray(samples, dtype=float).ravel()
    y = np.asarray(y_grid, dtype=float)
    h = float(bandwidth)
    delta = h / oversample
    lo = y.min() - 8 * h
    n_bins = int(math.ceil((y.max() + 8 * h - lo) / delta)) + 2
    pos = (x - lo) / delta
    keep = (pos >= 0) & (pos < n_bins - 1)
    pos = pos[keep]
    i = np.floor(pos).astype(np.int64)
    frac = pos - i
    counts = np.bincount(i, weights=1.0 - frac, minlength=n_bins)
    counts += np.bincount(i + 1, weights=frac, minlength=n_bins)
    half = 8 * oversample
    u = np.arange(-half, half + 1) * delta / h
    kernel = np.exp(-0.5 * u * u) / (math.sqrt(2 * math.pi) * h)
    dens = fftconvolve(counts, kernel, mode="same") / x.size
    return np.maximum(np.interp(y, lo + delta * np.arange(n_bins), dens), 0.0)


def _endpoint_chunk(lo, hi, x, drift, params, t, n_steps, master_seed):
    grid = PathGrid(t, n_steps)
    Z = np.stack([simulate_path(params, grid, derive_seed(master_seed, i)).values for i in range(lo, hi)])
    xi, _ = euler_batch(x, drift, Z, grid.dt)
    return xi[:, -1].copy()


def sample_endpoints(params: StableParams, drift: DriftSpec, x: float, t: float, M: int,
                     master_seed: int, n_steps: int = 64, workers: int = 1) -> np.ndarray:
    """xi(t) for M independent Euler solutions started at x, path i seeded from (master_seed, i)."""
    chunks = map_chunks(_endpoint_chunk, M, (x, drift, params, t, n_steps, master_seed),
                        workers, chunk=SAMPLE_CHUNK)
    return np.concatenate(chunks)


def estimate_density(params: StableParams, drift: DriftSpec, x: float, t: float, M: int,
                     y_grid, bandwidth: float | None = None, master_seed: int = 0,
                     n_steps: int = 64, workers: int = 1, min_samples: int = 10_000) -> DensityEstimate:
    """Kernel density estimate of the law of xi(t) given xi(0) = x.

    ``bandwidth=None`` applies :func:`silverman_iqr_bandwidth`.
    """
    if M < min_samples:
        raise ParameterError(f"M must be at least {min_samples}, got {M}")
    if bandwidth is not None and not bandwidth > 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth!r}")
    samples = sample_endpoints(params, drift, x, t, M, master_seed, n_steps, workers)
    h = silverman_iqr_bandwidth(samples) if bandwidth is None else float(bandwidth)
    y = np.asarray(y_grid, dtype=float)
    return DensityEstimate(t, x, y, gaussian_kde(samples, y, h), M, h, samples)


def stable_density_oracle(params: StableParams, t: float, y_grid, dlam: float | None = None,
                          chunk: int = 1 << 22) -> np.ndarray:
    """Density of Z(t) by trapezoidal inversion of exp(-c t |l|^alpha).

    p(y) = (1/pi) int_0^L exp(-c t l^alpha) cos(l y) dl with the cutoff L set
    where the integrand drops below 1e-12. For an even integrand the
    trapezoid rule with step ``dlam`` returns the density periodised with
    period 2 pi / dlam, so the default step makes that period at least
    max(1e4 * (c t)^(1/alpha), 8 max|y|). A caller-supplied step whose period
    is below 4 max|y| triggers an :class:`AccuracyWarning`.
    """
    y = np.asarray(y_grid, dtype=float)
    s = params.c * t
    if not s > 0:
        raise ParameterError("t must be positive")
    ymax = float(np.max(np.abs(y))) if y.size else 0.0
    width = s ** (1.0 / params.alpha)
    cutoff = (-math.log(CUTOFF_TOL) / s) ** (1.0 / params.alpha)
    if dlam is None:
        period = max(1e4 * width, 8.0 * ymax)
        dlam = 2.0 * math.pi / period
    elif 2.0 * math.pi / dlam < 4.0 * ymax:
        warnings.warn(
            f"frequency step {dlam:g} aliases the density with period {2 * math.pi / dlam:.4g} "
            f"< 4 * max|y| = {4 * ymax:.4g}; results are inaccurate",
            AccuracyWarning, stacklevel=2)
    lam = np.arange(0.0, cutoff + dlam, dlam)
    w = np.exp(-s * lam**params.alpha) * dlam
    w[0] *= 0.5
    out = np.empty_like(y)
    flat_y = y.ravel()
    flat_out = out.ravel()
    step = max(1, chunk // lam.size)
    for i in range(0, flat_y.size, step):
        yy = flat_y[i:i + step]
        flat_out[i:i + step] = np.cos(np.outer(yy, lam)) @ w / math.pi
    return np.maximum(out, 0.0)


def bound_ratio(p, y_grid, t: float, alpha: float, x: float) -> np.ndarray:
    """p(y) * (t + |x - y|)^(alpha + 1) / t, the pointwise value of N the bound requires."""
    y = np.asarray(y_grid, dtype=float)
    return np.asarray(p) * (t + np.abs(x - y)) ** (alpha + 1.0) / t


def fit_bound_constant(est: DensityEstimate, alpha: float, x: float | None = None,
                       p=None) -> BoundFit:
    """Smallest N with p(y) <= N t / (t + |x - y|)^(alpha + 1) on the grid.

    ``p`` replaces the estimate's values (e.g. by oracle densities on the
    same grid).
    """
    x = est.x if x is None else x
    vals = est.p_hat if p is None else np.asarray(p)
    r = bound_ratio(vals, est.y_grid, est.t, alpha, x)
    j = int(np.argmax(r))
    return BoundFit(alpha, est.t, float(r[j]), float(est.y_grid[j]))


def tail_exponent_estimate(samples, k_fraction: float = 0.005) -> float:
    """Hill estimate of the survival-tail exponent of |samples|.

    Uses the ``k = floor(k_fraction * M)`` largest values.
    """
    if not (0.0 < k_fraction <= 0.05):
        raise ParameterError(f"k_fraction must lie in (0, 0.05], got {k_fraction!r}")
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    k = int(k_fraction * x.size)
    if k < 100:
        raise InsufficientDataError(f"only {k} tail points; need at least 100")
    top = np.partition(x, x.size - k - 1)[x.size - k - 1:]
    top.sort()
    threshold, tail = top[0], top[1:]
    if threshold <= 0:
        raise InsufficientDataError("tail threshold is zero")
    return float(1.0 / np.mean(np.log(tail / threshold)))
