import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablesde.drift import Constant, HolderPower, Sign, Zero
from stablesde.errors import GridMismatchError, UnsupportedDriftError
from stablesde.lattice import (
    count_crossings,
    lattice_check,
    lattice_trials,
    pointwise_min_max,
    uniqueness_probe,
)
from stablesde.noise import LevyPath, PathGrid, StableParams, simulate_path
from stablesde.solver import SolutionPath, euler_solve, integral_residual

PARAMS = StableParams(1.5)
ODE = HolderPower(beta=2 / 3, scale=3.0)


def _pair(seed, n=256):
    path = simulate_path(PARAMS, PathGrid(1.0, n), seed)
    return path, euler_solve(0.0, Sign(), path), euler_solve(0.0, Sign(at_zero=1.0), path)


@given(seed=st.integers(0, 2**32))
@settings(max_examples=20, deadline=None)
def test_lattice_identities(seed):
    path, a, b = _pair(seed)
    c = euler_solve(0.2, Sign(), path)
    for s1, s2 in ((a, b), (a, c)):
        lo, hi = pointwise_min_max(s1, s2)
        assert np.all(lo.values <= s1.values) and np.all(s1.values <= hi.values)
        assert np.all(lo.values <= s2.values) and np.all(s2.values <= hi.values)
        assert np.array_equal(lo.values + hi.values, s1.values + s2.values)
        lo2, hi2 = pointwise_min_max(s2, s1)
        assert np.array_equal(lo.values, lo2.values) and np.array_equal(hi.values, hi2.values)
        assert lo.provenance == "injected"
    lo, hi = pointwise_min_max(a, a)
    assert np.array_equal(lo.values, a.values) and np.array_equal(hi.values, a.values)


def test_unequal_initial_values_recorded():
    path, a, _ = _pair(1)
    c = euler_solve(0.2, Sign(), path)
    lo, hi = pointwise_min_max(a, c)
    assert lo.x0 == 0.0 and hi.x0 == 0.2


def test_degenerate_closure():
    path = simulate_path(PARAMS, PathGrid(1.0, 128), 8)
    a = euler_solve(-0.5, Constant(K=1.0), path)
    b = euler_solve(0.5, Constant(K=1.0), path)
    lo, hi = pointwise_min_max(a, b)
    assert np.array_equal(lo.values, a.values) and np.array_equal(hi.values, b.values)
    assert integral_residual(lo, Constant(K=1.0), path) == integral_residual(a, Constant(K=1.0), path)


def test_identical_solutions_pass_with_zero_residuals():
    path, a, _ = _pair(2)
    rep = lattice_check(a, a, Sign(), path)
    assert rep.residual_min == rep.residual_max == 0.0
    assert rep.crossings == 0
    assert rep.verdict


def test_ode_showcase():
    n = 4096
    path = LevyPath.from_values(np.zeros(n + 1), 1.0)
    t = path.grid.times
    zero = SolutionPath.injected(np.zeros(n + 1), 1.0)
    cubic = SolutionPath.injected(t**3, 1.0)
    lo, hi = pointwise_min_max(zero, cubic)
    assert np.array_equal(lo.values, np.zeros(n + 1)) and np.array_equal(hi.values, t**3)
    rep = lattice_check(zero, cubic, ODE, path)
    assert rep.residual_min == 0.0
    assert rep.residual_max <= 3 * path.grid.dt
    assert rep.verdict


def test_tolerance_formula():
    path, a, b = _pair(3, n=512)
    rep = lattice_check(a, b, Sign(), path, safety_factor=3.0)
    assert rep.tolerance_used == 3.0 * (rep.residual_in_1 + rep.residual_in_2 + 2.0 * path.grid.dt)
    assert rep.verdict == (rep.residual_min <= rep.tolerance_used and rep.residual_max <= rep.tolerance_used)


def test_unbounded_drift_rejected():
    class Wild(HolderPower):
        def local_bound(self, lo, hi):
            return float("inf")

    path = LevyPath.from_values(np.zeros(9), 1.0)
    z = SolutionPath.injected(np.zeros(9), 1.0)
    with pytest.raises(UnsupportedDriftError):
        lattice_check(z, z, Wild(beta=0.5, scale=1.0), path)


def test_grid_mismatch():
    a = SolutionPath.injected(np.zeros(9), 1.0)
    b = SolutionPath.injected(np.zeros(5), 1.0)
    with pytest.raises(GridMismatchError):
        pointwise_min_max(a, b)


def test_count_crossings():
    assert count_crossings(np.array([1.0, 0.0, 2.0, -1.0, 0.0, -3.0, 4.0]))[0] == 2
    assert count_crossings(np.zeros(5))[0] == 0


def test_trials_match_single_checks():
    census = lattice_trials(0.0, Sign(), Sign(at_zero=1.0), Sign(), PARAMS, 1.0, 256, 10, master_seed=4)
    assert census.r1.size == 10
    assert census.pass_fraction == 1.0
    rows = list(census.rows())
    assert list(rows[0]) == ["trial", "r1", "r2", "rmin", "rmax", "verdict"]


def test_trials_worker_count_invariant():
    args = (0.0, Sign(), Sign(at_zero=1.0), Sign(), PARAMS, 1.0, 128, 150)
    one = lattice_trials(*args, master_seed=9, workers=1)
    three = lattice_trials(*args, master_seed=9, workers=3)
    for f in ("r1", "r2", "rmin", "rmax", "tolerance", "crossings"):
        assert np.array_equal(getattr(one, f), getattr(three, f))


@pytest.mark.parametrize("drift", [Zero(), Constant(K=0.75)], ids=["zero", "constant"])
def test_uniqueness_exact_cases(drift):
    levels = uniqueness_probe(0.1, drift, PARAMS, 1.0, 256, 4, n_paths=10, master_seed=3)
    for lv in levels:
        assert np.all(lv.distances == 0.0)
