import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stablesde.drift import DriftSequence, MeasureSpec, PiecewiseConstant, Sign
from stablesde.errors import HypothesisRejected, ParameterError
from stablesde.noise import StableParams
from stablesde.stability import (
    StabilitySpec,
    XSequence,
    check_hypotheses,
    run_stability,
    wilson_interval,
    x_sequence_from_dict,
)

PARAMS = StableParams(1.5)
IDX = (2, 8, 32, 128)


def _spec(x_seq, drifts, n_paths=200, finest_n=256, seed=11, epsilons=(0.1, 0.25, 0.5)):
    return StabilitySpec(x_seq, drifts, PARAMS, 1.0, epsilons, IDX, n_paths, finest_n, seed, MeasureSpec(1.5))


def test_spec_validation():
    seq, drifts = XSequence.constant(0.0), DriftSequence.stationary(Sign())
    with pytest.raises(ParameterError):
        StabilitySpec(seq, drifts, StableParams(2.0), 1.0, (0.1,), IDX, 10, 16, 1, MeasureSpec(2.0))
    with pytest.raises(ParameterError):
        StabilitySpec(seq, drifts, PARAMS, 1.0, (0.1,), (8, 2), 10, 16, 1, MeasureSpec(1.5))
    with pytest.raises(ParameterError):
        StabilitySpec(seq, drifts, PARAMS, 1.0, (0.0,), IDX, 10, 16, 1, MeasureSpec(1.5))


def test_stationary_family_gives_zero_distance():
    rep = run_stability(_spec(XSequence.constant(0.3), DriftSequence.stationary(Sign())))
    assert np.all(rep.distances == 0.0)
    assert all(r.p_hat == 0.0 for r in rep.rows)


def test_constant_drift_closed_form():
    spec = _spec(XSequence.harmonic(0.5, 1.0, -1.0), DriftSequence.constant(1.0, 1.0, -1.0))
    rep = run_stability(spec)
    for j, n in enumerate(IDX):
        expect = abs(spec.x_seq[n] - 0.5) + abs(spec.drifts[n].K - 1.0) * spec.T
        np.testing.assert_allclose(rep.distances[:, j], expect, rtol=5e-13, atol=0)
        for eps in spec.epsilons:
            assert rep.p_hat(n, eps) == (1.0 if expect > eps else 0.0)


def test_independent_noise_canary():
    spec = _spec(XSequence.harmonic(0.5, 1.0, -1.0), DriftSequence.constant(1.0, 1.0, -1.0))
    common = run_stability(spec)
    indep = run_stability(spec, coupling="independent")
    for n in IDX:
        row_c = next(r for r in common.rows if r.n == n)
        row_i = next(r for r in indep.rows if r.n == n)
        assert row_i.mean_sup > row_c.mean_sup


def test_mollified_sign_passes_checks():
    checks = check_hypotheses(_spec(XSequence.harmonic(0.0), DriftSequence.mollified_sign(1.0)))
    by_name = {c.name: c.status for c in checks}
    assert by_name == {"initial_values_converge": "pass", "uniform_drift_bound": "pass",
                       "density_wrt_mu": "analytic", "drift_converges_in_measure": "pass",
                       "uniform_integrability": "analytic", "limit_equation_unique": "analytic"}


@pytest.mark.parametrize("x_seq, drifts, failing", [
    (XSequence.harmonic(0.0), DriftSequence.constant(0.0, 1.0, 1.0), "uniform_drift_bound"),
    (XSequence.alternating(1.0), DriftSequence.mollified_sign(1.0), "initial_values_converge"),
    (XSequence.alternating(0.0), DriftSequence.mollified_sign(1.0), "initial_values_converge"),
    (XSequence.harmonic(0.0),
     DriftSequence.fixed(PiecewiseConstant(breakpoints=[1.0], values=[-1.0, 1.0]), Sign()),
     "drift_converges_in_measure"),
], ids=["divergent_drift", "alternating_even", "alternating", "shifted_sign"])
def test_counterexamples_are_refused(x_seq, drifts, failing):
    spec = _spec(x_seq, drifts, n_paths=10)
    with pytest.raises(HypothesisRejected) as info:
        run_stability(spec)
    assert failing in info.value.failed


def test_divergent_drift_reports_witness():
    checks = check_hypotheses(_spec(XSequence.harmonic(0.0), DriftSequence.constant(0.0, 1.0, 1.0)))
    bound = next(c for c in checks if c.name == "uniform_drift_bound")
    assert "witness (n, x) = (128," in bound.detail


def test_wilson_reference_values():
    assert wilson_interval(0, 10) == pytest.approx((0.0, 0.2775328), abs=1e-6)
    assert wilson_interval(5, 10) == pytest.approx((0.2365931, 0.7634069), abs=1e-6)
    assert wilson_interval(10, 10) == pytest.approx((0.7224672, 1.0), abs=1e-6)


@given(n=st.integers(1, 5000), frac=st.floats(0, 1))
def test_wilson_contains_estimate(n, frac):
    k = int(round(frac * n))
    lo, hi = wilson_interval(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


def test_determinism_and_worker_invariance():
    spec = _spec(XSequence.harmonic(0.0), DriftSequence.mollified_sign(1.0), n_paths=150)
    a = run_stability(spec)
    b = run_stability(spec)
    c = run_stability(spec, workers=3)
    assert np.array_equal(a.distances, b.distances)
    assert np.array_equal(a.distances, c.distances)
    assert a.rows == c.rows


def test_mollified_trend_small_scale():
    rep = run_stability(_spec(XSequence.harmonic(0.0), DriftSequence.mollified_sign(1.0), n_paths=500))
    for eps in rep.epsilons:
        assert rep.trend_ok(eps)
    text = "\n".join(rep.text_lines())
    assert "coupling: common" in text and "density_wrt_mu: analytic" in text


def test_x_sequence_from_dict():
    assert x_sequence_from_dict({"kind": "harmonic", "limit": 1.0, "scale": 2.0, "power": -1.0})[4] == 1.5
    assert x_sequence_from_dict({"kind": "alternating"})[3] == -1.0
