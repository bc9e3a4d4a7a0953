import itertools

import numpy as np
import pytest

from restless_bai.delay_mdp import (
    DelayState,
    allowed_actions,
    apply_selection,
    enumerate_state_space,
    initial_state,
    transition_kernel,
    uniform_rule,
)
from restless_bai.errors import DelayOverflow, IllegalAction, ValidationError


def hand_bfs(K, R, n):
    """Plain-tuple closure, independent of the package's data structures."""
    seen = set()
    frontier = [(tuple(range(K, 0, -1)), obs) for obs in itertools.product(range(n), repeat=K)]
    seen.update(frontier)
    while frontier:
        nxt = []
        for d, i in frontier:
            forced = [a for a in range(K) if d[a] == R]
            for a in forced or range(K):
                for j in range(n):
                    d2 = tuple(1 if b == a else d[b] + 1 for b in range(K))
                    i2 = tuple(j if b == a else i[b] for b in range(K))
                    if (d2, i2) not in seen:
                        seen.add((d2, i2))
                        nxt.append((d2, i2))
        frontier = nxt
    return seen


def test_k2_r3_has_16_states():
    sp = enumerate_state_space(2, 3, 2)
    assert len(sp) == 16
    assert {(s.d, s.i) for s in sp.states} == hand_bfs(2, 3, 2)


@pytest.mark.parametrize("K,R,n", [(2, 3, 3), (2, 6, 2), (3, 4, 2), (3, 6, 2), (3, 5, 3), (4, 5, 2)])
def test_state_space_matches_hand_bfs(K, R, n):
    sp = enumerate_state_space(K, R, n)
    assert {(s.d, s.i) for s in sp.states} == hand_bfs(K, R, n)


def test_k2_count_formula():
    # delay vectors (1, r) and (r, 1) for r = 2..R, times |S|^2 last states
    for R in range(3, 9):
        for n in (2, 3):
            assert len(enumerate_state_space(2, R, n)) == 2 * (R - 1) * n * n


def test_k3_counts_binary():
    assert [len(enumerate_state_space(3, R, 2)) for R in range(4, 9)] == [144, 288, 480, 720, 1008]


def test_r_must_exceed_k():
    with pytest.raises(ValidationError):
        enumerate_state_space(3, 3, 2)


def test_delay_state_validation():
    with pytest.raises(ValidationError):
        DelayState((1, 1), (0, 0))
    with pytest.raises(ValidationError):
        DelayState((2, 3), (0, 0))
    s = initial_state((1, 0, 1))
    assert s.d == (3, 2, 1)


def test_forced_selection_and_transitions():
    s = DelayState((4, 1, 2), (0, 1, 0))
    assert allowed_actions(s, 4) == (0,)
    with pytest.raises(IllegalAction):
        apply_selection(s, 1, 0, 4)
    t = apply_selection(s, 0, 1, 4)
    assert t == DelayState((1, 2, 3), (1, 1, 0))
    with pytest.raises(DelayOverflow):
        # only reachable from a state outside S_R: arm 2 already exceeds R
        apply_selection(DelayState((1, 2, 3), (0, 0, 0)), 1, 0, 2)


def test_successor_table_consistent():
    sp = enumerate_state_space(3, 5, 2)
    for si, s in enumerate(sp.states):
        legal = allowed_actions(s, sp.R)
        assert list(np.flatnonzero(sp.legal[si])) == list(legal)
        for a in legal:
            for j in range(sp.n_obs):
                assert sp.states[sp.successor[si, a, j]] == apply_selection(s, a, j, sp.R)
        assert sp.delays[si].max() <= sp.R


def test_kernel_rows_sum_to_one(k3):
    sp = enumerate_state_space(3, 5, 2)
    for C in k3.configs:
        ker = transition_kernel(k3, C, sp)
        sums = ker.prob.sum(axis=2)
        np.testing.assert_allclose(sums[sp.legal], 1.0, atol=1e-14)
        assert np.all(sums[~sp.legal] == 0)
        Q = ker.induced_chain(uniform_rule(sp))
        np.testing.assert_allclose(Q.sum(axis=1), 1.0, atol=1e-14)


def test_kernel_entries_are_matrix_powers(i1):
    sp = enumerate_state_space(2, 4, 2)
    ker = transition_kernel(i1, i1.truth, sp)
    s = sp.index[DelayState((3, 1), (1, 0))]
    row = ker.row(s, 0)
    P3 = np.linalg.matrix_power(np.array(i1.tpm_bank[0].rows), 3)
    for j in range(2):
        t = sp.index[DelayState((1, 2), (j, 0))]
        assert row[t] == pytest.approx(P3[1, j], abs=1e-15)
    forced = sp.index[DelayState((4, 1), (0, 0))]
    with pytest.raises(IllegalAction):
        ker.row(forced, 1)
