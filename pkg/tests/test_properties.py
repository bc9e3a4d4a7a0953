"""Property-based checks of the invariants, driven by hypothesis."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from restless_bai.delay_mdp import DelayState, allowed_actions, apply_selection, enumerate_state_space, initial_state
from restless_bai.instance import alt_set
from restless_bai.markov import kl_divergence, stationary_distribution, validate_tpm
from restless_bai.occupancy import kl_coefficients, solve_T_R_star
from restless_bai.delay_mdp import transition_kernel
from restless_bai.simplex import solve_lp

from conftest import random_instance

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _rows(seed, n):
    rng = np.random.default_rng(seed)
    return 0.9 * rng.dirichlet(np.ones(n), size=n) + 0.1 / n


@given(seed=seeds, n=st.integers(2, 7))
def test_stationary_is_a_fixed_point(seed, n):
    rows = _rows(seed, n)
    mu = stationary_distribution(validate_tpm(rows))
    assert np.all(mu >= 0)
    assert abs(mu.sum() - 1) <= 1e-12
    assert np.max(np.abs(mu @ rows - mu)) <= 1e-10


@given(seed=seeds, n=st.integers(2, 6))
def test_kl_nonnegative_and_zero_on_diagonal(seed, n):
    rng = np.random.default_rng(seed)
    p, q = rng.dirichlet(np.ones(n), size=2)
    assert kl_divergence(p, q) >= 0
    assert kl_divergence(p, p) == 0


@given(
    K=st.integers(2, 4),
    extra=st.integers(1, 3),
    n=st.integers(2, 3),
    actions=st.lists(st.integers(0, 3), min_size=1, max_size=60),
    obs=st.lists(st.integers(0, 2), min_size=60, max_size=60),
)
def test_legal_paths_keep_delay_invariants(K, extra, n, actions, obs):
    R = K + extra
    s = initial_state([0] * K)
    for t, pick in enumerate(actions):
        legal = allowed_actions(s, R)
        a = legal[pick % len(legal)]
        s = apply_selection(s, a, obs[t] % n, R)
        assert s.d[a] == 1
        assert sorted(s.d) == sorted(set(s.d))
        assert max(s.d) <= R
        if R in s.d:
            assert allowed_actions(s, R) == (s.d.index(R),)


@given(R=st.integers(3, 9), n=st.integers(2, 4))
def test_k2_state_count(R, n):
    sp = enumerate_state_space(2, R, n)
    assert len(sp) == 2 * (R - 1) * n * n
    assert all(isinstance(s, DelayState) for s in sp.states)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, n=st.integers(2, 6), m_ub=st.integers(1, 5), m_eq=st.integers(0, 3))
def test_simplex_matches_highs(seed, n, m_ub, m_eq):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0, 1, n)
    A_eq = rng.normal(size=(m_eq, n))
    A_ub = np.vstack([rng.normal(size=(m_ub, n)), np.ones((1, n))])
    b_ub = A_ub @ x0 + rng.uniform(0, 1, m_ub + 1)
    c = rng.normal(size=n)
    ref = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq if m_eq else None,
                  b_eq=A_eq @ x0 if m_eq else None, method="highs")
    res = solve_lp(c, A_eq, A_eq @ x0, A_ub, b_ub, seed=seed % 1000)
    assert res.objective == pytest.approx(ref.fun, abs=1e-9, rel=1e-9)
    assert res.duality_gap <= 1e-8


@settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=seeds)
def test_t_r_star_non_decreasing(seed):
    inst = random_instance(np.random.default_rng(seed), K=2, n=2)
    C = inst.truth
    alts = alt_set(C, inst.configs)
    prev = -np.inf
    for R in (3, 4, 5):
        sp = enumerate_state_space(2, R, 2)
        val = solve_T_R_star(transition_kernel(inst, C, sp), kl_coefficients(inst, C, sp, alts)).value
        assert val >= prev - 1e-9
        prev = val
