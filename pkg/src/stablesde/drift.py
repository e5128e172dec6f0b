"""Declarative drift functions, drift sequences and the reference measure.

Drifts are small frozen records tagged by ``kind`` so experiments can be
written in config files. Every drift is vectorised: ``drift(x)`` accepts a
scalar or an array. Each kind knows an analytic global bound (``inf`` when
unbounded) and a bound on compact intervals.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from typing import ClassVar

import numpy as np
from scipy import integrate

from .errors import ConfigError, ParameterError

__all__ = [
    "DRIFT_KINDS",
    "BoundCheck",
    "Constant",
    "DriftSequence",
    "DriftSpec",
    "HolderPower",
    "LinearGrowthCapped",
    "MeasureRow",
    "MeasureSpec",
    "MollifiedSign",
    "PiecewiseConstant",
    "Sign",
    "Zero",
    "convergence_in_measure_check",
    "drift_from_dict",
    "drift_sequence_from_dict",
    "evaluate_drift",
    "measure_from_dict",
    "uniform_bound_check",
]

DRIFT_KINDS: dict[str, type] = {}


def _register(cls):
    DRIFT_KINDS[cls.kind] = cls
    return cls


@dataclass(frozen=True, kw_only=True)
class DriftSpec:
    kind: ClassVar[str] = ""
    declared_bound: float | None = None

    def __post_init__(self):
        if self.declared_bound is not None:
            if not self.declared_bound >= 0:
                raise ParameterError("declared_bound must be nonnegative")
            if self.analytic_bound() > self.declared_bound * (1 + 1e-12):
                raise ParameterError(
                    f"{self.kind}: declared_bound {self.declared_bound} is below the "
                    f"analytic bound {self.analytic_bound()}"
                )

    def __call__(self, x):
        raise NotImplementedError

    def analytic_bound(self) -> float:
        """sup_x |a(x)| as known from the kind's parameters."""
        return math.inf

    def local_bound(self, lo: float, hi: float) -> float:
        """sup of |a| over [lo, hi]."""
        return self.bound

    @property
    def bound(self) -> float:
        b = self.analytic_bound()
        if self.declared_bound is not None:
            b = min(b, self.declared_bound)
        return b

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "declared_bound" and v is None:
                continue
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d


@_register
@dataclass(frozen=True, kw_only=True)
class Zero(DriftSpec):
    kind: ClassVar[str] = "zero"

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def analytic_bound(self):
        return 0.0


@_register
@dataclass(frozen=True, kw_only=True)
class Constant(DriftSpec):
    kind: ClassVar[str] = "constant"
    K: float = 0.0

    def __call__(self, x):
        return np.full_like(np.asarray(x, dtype=float), self.K)

    def analytic_bound(self):
        return abs(self.K)


@_register
@dataclass(frozen=True, kw_only=True)
class Sign(DriftSpec):
    """sign(x), with the value at 0 given by ``at_zero``."""

    kind: ClassVar[str] = "sign"
    at_zero: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == 0.0, self.at_zero, np.sign(x))

    def analytic_bound(self):
        return max(1.0, abs(self.at_zero))


@_register
@dataclass(frozen=True, kw_only=True)
class MollifiedSign(DriftSpec):
    """clip(x / epsilon, -1, 1): odd, Lipschitz, equal to sign(x) for |x| >= epsilon."""

    kind: ClassVar[str] = "mollified_sign"
    epsilon: float = 1.0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("mollified_sign needs epsilon > 0")
        super().__post_init__()

    def __call__(self, x):
        return np.clip(np.asarray(x, dtype=float) / self.epsilon, -1.0, 1.0)

    def analytic_bound(self):
        return 1.0


@_register
@dataclass(frozen=True, kw_only=True)
class HolderPower(DriftSpec):
    """x -> scale * |x|**beta."""

    kind: ClassVar[str] = "holder_power"
    beta: float = 1.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.beta >= 0:
            raise ParameterError("holder_power needs beta >= 0")
        super().__post_init__()

    def __call__(self, x):
        return self.scale * np.abs(np.asarray(x, dtype=float)) ** self.beta

    def analytic_bound(self):
        return abs(self.scale) if self.beta == 0 or self.scale == 0 else math.inf

    def local_bound(self, lo, hi):
        return abs(self.scale) * max(abs(lo), abs(hi)) ** self.beta


@_register
@dataclass(frozen=True, kw_only=True)
class PiecewiseConstant(DriftSpec):
    """Right-continuous step function: ``values[i]`` on [breakpoints[i-1], breakpoints[i])."""

    kind: ClassVar[str] = "piecewise_constant"
    breakpoints: tuple = ()
    values: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breakpoints) + 1:
            raise ParameterError("piecewise_constant needs len(values) == len(breakpoints) + 1")
        if any(b2 <= b1 for b1, b2 in zip(self.breakpoints, self.breakpoints[1:])):
            raise ParameterError("piecewise_constant breakpoints must be strictly increasing")
        super().__post_init__()

    def __call__(self, x):
        idx = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side="right")
        return np.asarray(self.values)[idx]

    def analytic_bound(self):
        return max(abs(v) for v in self.values)


@_register
@dataclass(frozen=True, kw_only=True)
class LinearGrowthCapped(DriftSpec):
    """clip(K * x, -cap, cap); ``cap=None`` leaves the linear growth unbounded."""

    kind: ClassVar[str] = "linear_growth_capped"
    K: float = 1.0
    cap: float | None = None

    def __post_init__(self):
        if self.cap is not None and not self.cap >= 0:
            raise ParameterError("linear_growth_capped needs cap >= 0")
        super().__post_init__()

    def __call__(self, x):
        y = self.K * np.asarray(x, dtype=float)
        return y if self.cap is None else np.clip(y, -self.cap, self.cap)

    def analytic_bound(self):
        if self.K == 0:
            return 0.0
        return math.inf if self.cap is None else float(self.cap)

    def local_bound(self, lo, hi):
        b = abs(self.K) * max(abs(lo), abs(hi))
        return b if self.cap is None else min(b, self.cap)


def drift_from_dict(d: Mapping, field_name: str = "drift") -> DriftSpec:
    if not isinstance(d, Mapping) or "kind" not in d:
        raise ConfigError(field_name, "expected a tagged record with a 'kind' key")
    kind = d["kind"]
    cls = DRIFT_KINDS.get(kind)
    if cls is None:
        raise ConfigError(f"{field_name}.kind", f"unknown drift kind {kind!r}; known: {sorted(DRIFT_KINDS)}")
    allowed = {f.name for f in fields(cls)}
    extra = set(d) - allowed - {"kind"}
    if extra:
        raise ConfigError(field_name, f"unexpected keys for {kind}: {sorted(extra)}")
    try:
        return cls(**{k: v for k, v in d.items() if k != "kind"})
    except (TypeError, ParameterError) as exc:
        raise ConfigError(field_name, str(exc)) from exc


def evaluate_drift(spec: DriftSpec, x):
    out = spec(x)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class MeasureSpec:
    """Probability measure with density (alpha/2) * (1 + |x|)^-(alpha + 1)."""

    alpha: float
    kind: str = "weighted_lebesgue"

    def __post_init__(self):
        if self.kind != "weighted_lebesgue":
            raise ParameterError(f"unknown measure kind {self.kind!r}")
        if not self.alpha > 0:
            raise ParameterError("weighted_lebesgue needs alpha > 0")

    @property
    def normalization(self) -> float:
        return self.alpha / 2.0

    def density(self, x):
        return self.normalization * (1.0 + np.abs(x)) ** (-(self.alpha + 1.0))

    def tail_mass(self, r: float) -> float:
        """mu(|x| > r)."""
        return (1.0 + r) ** (-self.alpha)

    def interval_mass(self, a: float, b: float) -> float:
        def cdf(x):
            h = 0.5 * (1.0 + abs(x)) ** (-self.alpha)
            return h if x < 0 else 1.0 - h

        return cdf(b) - cdf(a)

    def check_normalization(self, window: float = 1e4) -> float:
        """Quadrature of the density over [-window, window] plus the closed-form tail."""
        breaks = [0.0] + [10.0**k for k in range(-2, int(math.log10(window)) + 1) if 10.0**k < window]
        total = 0.0
        for lo, hi in zip(breaks, breaks[1:] + [window]):
            total += integrate.quad(self.density, lo, hi, epsabs=1e-14, epsrel=1e-12)[0]
        return 2.0 * total + self.tail_mass(window)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "alpha": self.alpha}


def measure_from_dict(d: Mapping, field_name: str = "mu") -> MeasureSpec:
    if not isinstance(d, Mapping) or d.get("kind") != "weighted_lebesgue":
        raise ConfigError(f"{field_name}.kind", "only 'weighted_lebesgue' is supported")
    if set(d) - {"kind", "alpha"}:
        raise ConfigError(field_name, f"unexpected keys: {sorted(set(d) - {'kind', 'alpha'})}")
    try:
        return MeasureSpec(alpha=float(d["alpha"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{field_name}.alpha", str(exc)) from exc


@dataclass(frozen=True)
class DriftSequence:
    """Indexed family n -> a_n with limit a_0.

    ``family`` is the serialisable description; ``term`` builds a_n from it.
    ``declared_bound`` optionally states the uniform bound sup_n sup_x |a_n|.
    """

    family: Mapping
    term_fn: Callable[[int], DriftSpec] = field(compare=False, repr=False)
    limit: DriftSpec
    declared_bound: float | None = None

    def term(self, n: int) -> DriftSpec:
        return self.limit if n == 0 else self.term_fn(n)

    def __getitem__(self, n: int) -> DriftSpec:
        return self.term(n)

    def to_dict(self) -> dict:
        return dict(self.family)

    @classmethod
    def mollified_sign(cls, scale: float = 1.0) -> DriftSequence:
        return cls(
            {"kind": "mollified_sign", "scale": scale},
            lambda n: MollifiedSign(epsilon=scale / n),
            Sign(),
        )

    @classmethod
    def constant(cls, K0: float = 0.0, scale: float = 1.0, power: float = -1.0) -> DriftSequence:
        """a_n = constant(K0 + scale * n**power); power > 0 gives a divergent family."""
        return cls(
            {"kind": "constant", "K0": K0, "scale": scale, "power": power},
            lambda n: Constant(K=K0 + scale * float(n) ** power),
            Constant(K=K0),
        )

    @classmethod
    def stationary(cls, drift: DriftSpec) -> DriftSequence:
        return cls({"kind": "stationary", "drift": drift.to_dict()}, lambda n: drift, drift)

    @classmethod
    def fixed(cls, term: DriftSpec, limit: DriftSpec) -> DriftSequence:
        """Every a_n equals ``term`` (a non-converging family unless term == limit)."""
        return cls(
            {"kind": "fixed", "term": term.to_dict(), "limit": limit.to_dict()},
            lambda n: term,
            limit,
        )

    @classmethod
    def explicit(cls, terms: Mapping[int, DriftSpec], limit: DriftSpec) -> DriftSequence:
        terms = {int(k): v for k, v in terms.items()}

        def term_fn(n):
            if n not in terms:
                raise KeyError(f"explicit drift sequence has no term {n}")
            return terms[n]

        family = {
            "kind": "explicit",
            "terms": {k: v.to_dict() for k, v in sorted(terms.items())},
            "limit": limit.to_dict(),
        }
        return cls(family, term_fn, limit)


def drift_sequence_from_dict(d: Mapping, field_name: str = "drifts") -> DriftSequence:
    if not isinstance(d, Mapping) or "kind" not in d:
        raise ConfigError(field_name, "expected a tagged record with a 'kind' key")
    kind = d["kind"]
    bound = d.get("declared_bound")
    body = {k: v for k, v in d.items() if k not in ("kind", "declared_bound")}
    try:
        if kind == "mollified_sign":
            seq = DriftSequence.mollified_sign(**body)
        elif kind == "constant":
            seq = DriftSequence.constant(**body)
        elif kind == "stationary":
            seq = DriftSequence.stationary(drift_from_dict(body["drift"], f"{field_name}.drift"))
        elif kind == "fixed":
            seq = DriftSequence.fixed(
                drift_from_dict(body["term"], f"{field_name}.term"),
                drift_from_dict(body["limit"], f"{field_name}.limit"),
            )
        elif kind == "explicit":
            seq = DriftSequence.explicit(
                {int(n): drift_from_dict(v, f"{field_name}.terms.{n}") for n, v in body["terms"].items()},
                drift_from_dict(body["limit"], f"{field_name}.limit"),
            )
        else:
            raise ConfigError(f"{field_name}.kind", f"unknown drift sequence kind {kind!r}")
    except (TypeError, KeyError) as exc:
        raise ConfigError(field_name, f"bad {kind} drift sequence: {exc}") from exc
    if bound is not None:
        seq = DriftSequence({**seq.family, "declared_bound": bound}, seq.term_fn, seq.limit, float(bound))
    return seq


@dataclass(frozen=True)
class BoundCheck:
    passed: bool
    bound: float
    max_seen: float
    witness: tuple | None = None
    reason: str = ""


def uniform_bound_check(seq: DriftSequence, probe_grid, indices: Sequence[int]) -> BoundCheck:
    """Check sup_n sup_x |a_n(x)| < inf over the listed terms and the limit.

    Finitely many terms cannot prove a uniform bound, so the claim is anchored:
    the sequence's declared bound if given, else the larger analytic bound of
    the limit and of the first listed term. A later term whose analytic bound
    or probe-grid maximum exceeds the claim (a growing family) fails, as does
    any unbounded term.
    """
    probe = np.asarray(probe_grid, dtype=float)
    ns = [n for n in indices if n != 0]
    if seq.declared_bound is not None:
        claim = seq.declared_bound
    else:
        claim = max(seq.limit.bound, seq.term(ns[0]).bound if ns else 0.0)
    if not math.isfinite(claim):
        return BoundCheck(False, claim, math.inf, None, "no finite bound to anchor the family")
    tol = 1e-12 * max(1.0, claim)
    max_seen, witness = 0.0, None
    for n in [0] + ns:
        a = seq.term(n)
        if not math.isfinite(a.bound):
            return BoundCheck(False, claim, math.inf, (n, None),
                              f"term {n} ({a.kind}) is unbounded and has no declared bound")
        vals = np.abs(a(probe))
        j = int(np.argmax(vals))
        if vals[j] > max_seen:
            max_seen, witness = float(vals[j]), (n, float(probe[j]))
        if a.bound > claim + tol and a.bound > max_seen:
            max_seen, witness = float(a.bound), (n, None)
    if max_seen > claim + tol:
        return BoundCheck(False, claim, max_seen, witness,
                          f"|a_n(x)| reaches {max_seen:.6g}, above the anchored bound {claim:.6g}")
    return BoundCheck(True, claim, max_seen, witness)


@dataclass(frozen=True)
class MeasureRow:
    n: int
    delta: float
    value: float
    slack: float

    @property
    def upper(self) -> float:
        return self.value + self.slack


def convergence_in_measure_check(
    seq: DriftSequence,
    mu: MeasureSpec,
    delta: float,
    truncation: float,
    quad_points: int,
    indices: Sequence[int],
) -> list[MeasureRow]:
    """Midpoint-rule estimate of mu{|a_n - a_0| > delta} on [-truncation, truncation].

    The mass of mu outside the window is reported separately as ``slack``.
    """
    if quad_points < 1:
        raise ParameterError("quad_points must be positive")
    if not delta > 0 or not truncation > 0:
        raise ParameterError("delta and truncation must be positive")
    h = 2.0 * truncation / quad_points
    x = -truncation + h * (np.arange(quad_points) + 0.5)
    w = mu.density(x) * h
    a0 = seq.limit(x)
    slack = mu.tail_mass(truncation)
    rows = []
    for n in indices:
        mask = np.abs(seq.term(n)(x) - a0) > delta
        rows.append(MeasureRow(int(n), float(delta), float(np.sum(w[mask])), slack))
    return rows
