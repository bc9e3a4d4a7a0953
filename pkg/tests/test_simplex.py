import numpy as np
import pytest
from scipy.optimize import linprog

from restless_bai.errors import Infeasible, Unbounded
from restless_bai.simplex import solve_lp


def _random_lp(rng):
    n = int(rng.integers(2, 9))
    m_eq = int(rng.integers(0, 4))
    m_ub = int(rng.integers(1, 6))
    x0 = rng.uniform(0, 2, n) * (rng.random(n) < 0.7)
    A_eq = rng.normal(size=(m_eq, n))
    b_eq = A_eq @ x0
    A_ub = rng.normal(size=(m_ub, n))
    b_ub = A_ub @ x0 + rng.uniform(0, 1, m_ub)
    c = rng.normal(size=n)
    # a box keeps the problem bounded
    A_ub = np.vstack([A_ub, np.ones((1, n))])
    b_ub = np.append(b_ub, x0.sum() + 5)
    return c, A_eq, b_eq, A_ub, b_ub


@pytest.mark.parametrize("rule", ["dantzig", "bland"])
def test_matches_highs_on_random_lps(rng, rule):
    for _ in range(150):
        c, A_eq, b_eq, A_ub, b_ub = _random_lp(rng)
        ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if len(b_eq) else None,
                      b_eq=b_eq if len(b_eq) else None, method="highs")
        assert ref.success
        res = solve_lp(c, A_eq, b_eq, A_ub, b_ub, rule=rule)
        assert res.objective == pytest.approx(ref.fun, abs=1e-9, rel=1e-9)
        assert res.primal_residual <= 1e-9
        assert res.duality_gap <= 1e-8
        assert res.min_reduced_cost >= -1e-9
        assert np.all(res.x >= 0)


def test_beale_cycling_example():
    # cycles forever under textbook largest-coefficient pivoting without anti-cycling
    c = [-0.75, 150, -0.02, 6]
    A_ub = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b_ub = [0, 0, 1]
    for rule in ("dantzig", "bland"):
        res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, rule=rule, perturb=0.0)
        assert res.objective == pytest.approx(-0.05, abs=1e-12)


def test_infeasible_and_unbounded():
    with pytest.raises(Infeasible):
        solve_lp([1, 1], A_eq=[[1, 1]], b_eq=[1], A_ub=[[1, 1]], b_ub=[0.5])
    with pytest.raises(Unbounded):
        solve_lp([-1, 0], A_ub=[[-1, 1]], b_ub=[1])


def test_redundant_equality_rows():
    res = solve_lp([1, 2, 3], A_eq=[[1, 1, 1], [2, 2, 2]], b_eq=[1, 2])
    assert res.objective == pytest.approx(1.0)
    np.testing.assert_allclose(res.x, [1, 0, 0], atol=1e-12)


def test_duals_certify_optimum():
    c = np.array([-3.0, -5.0])
    A_ub = np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]])
    b_ub = np.array([4.0, 12.0, 18.0])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub)
    assert res.objective == pytest.approx(-36.0)
    np.testing.assert_allclose(res.x, [2, 6], atol=1e-12)
    assert res.objective == pytest.approx(b_ub @ res.duals_ub)
    assert np.all(res.duals_ub <= 1e-12)


def test_deterministic_for_fixed_seed(rng):
    c, A_eq, b_eq, A_ub, b_ub = _random_lp(rng)
    a = solve_lp(c, A_eq, b_eq, A_ub, b_ub, seed=5)
    b = solve_lp(c, A_eq, b_eq, A_ub, b_ub, seed=5)
    np.testing.assert_array_equal(a.x, b.x)
