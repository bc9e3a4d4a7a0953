import itertools
import math

import numpy as np
import pytest
from scipy import stats

from restless_bai.delay_mdp import enumerate_state_space
from restless_bai.errors import ValidationError, ZeroLikelihood
from restless_bai.instance import ProblemInstance
from restless_bai.llr import argmax_config, batch_z, glr_all, glr_statistic, init_ledger, llr, record


def _random_walk(inst, sp, ledger, steps, rng):
    s = sp.initial_index([0] * inst.K)
    for _ in range(steps):
        legal = np.flatnonzero(sp.legal[s])
        a = int(rng.choice(legal))
        j = int(rng.integers(sp.n_obs))
        record(ledger, s, a, j)
        s = int(sp.successor[s, a, j])


def test_initial_terms_use_phi_times_power(i1):
    sp = enumerate_state_space(2, 4, 2)
    led = init_ledger([1, 0], i1, sp)
    P1, P2 = (np.array(P.rows) for P in i1.tpm_bank)
    phi = i1.phi
    # arm 0 seen at t=0 (law phi), arm 1 seen at t=1 (law phi P)
    z_true = math.log(phi[1]) + math.log((phi @ P2)[0])
    z_swap = math.log(phi[1]) + math.log((phi @ P1)[0])
    np.testing.assert_allclose(led.z, [z_true, z_swap], atol=1e-15)
    with pytest.raises(ValidationError):
        init_ledger([0], i1, sp)


def test_incremental_matches_batch(k3, rng):
    sp = enumerate_state_space(3, 5, 2)
    led = init_ledger([0, 0, 0], k3, sp)
    _random_walk(k3, sp, led, 5000, rng)
    assert led.n_recorded == 5000
    np.testing.assert_allclose(led.z, batch_z(led), atol=1e-9)


def test_glr_matches_brute_force(rng):
    configs = list(itertools.permutations(range(3)))
    best_pos = np.array([p.index(0) for p in configs])
    for _ in range(200):
        z = rng.normal(size=6) * 10
        M = glr_all(z, best_pos, 3)
        for c in range(6):
            others = [z[k] for k in range(6) if best_pos[k] != best_pos[c]]
            assert M[c] == pytest.approx(z[c] - max(others))


def test_glr_statistic_and_llr(i1):
    sp = enumerate_state_space(2, 4, 2)
    led = init_ledger([1, 1], i1, sp)
    assert glr_statistic(led, 0) == pytest.approx(llr(led, 0, 1))
    assert glr_statistic(led, 0) == pytest.approx(-glr_statistic(led, 1))


def test_tie_break_is_uniform():
    rng = np.random.default_rng(11)
    M = np.array([1.0, 3.0, 3.0, 3.0 - 1e-14, 2.0])
    counts = np.bincount([argmax_config(M, rng) for _ in range(6000)], minlength=5)
    assert counts[0] == counts[4] == 0
    assert stats.chisquare(counts[1:4]).pvalue > 0.001
    assert argmax_config(np.array([0.0, 1.0]), rng) == 1


def test_zero_likelihood_raised():
    P1 = [[0.2, 0.8, 0.0], [0.3, 0.3, 0.4], [0.5, 0.25, 0.25]]
    P2 = [[0.5, 0.5, 0.0], [0.3, 0.3, 0.4], [0.6, 0.2, 0.2]]
    inst = ProblemInstance.build([P1, P2], [0.0, 1.0, 2.0])
    sp = enumerate_state_space(2, 3, 3)
    led = init_ledger([0, 0], inst, sp)
    s = sp.initial_index([0, 0])
    # arm 1 was pulled last (delay 1) in state 0, and one step from 0 never reaches 2
    with pytest.raises(ZeroLikelihood):
        record(led, s, 1, 2)
