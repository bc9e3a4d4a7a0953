import math

import networkx as nx
import numpy as np
import pytest

from restless_bai.errors import DomainError, NegativeEntry, NotErgodic, RowSumViolation, SupportViolation, ValidationError
from restless_bai.markov import (
    TransitionMatrix,
    bernoulli_kl,
    check_mutual_ac,
    graph_period,
    is_ergodic,
    kl_divergence,
    matrix_power,
    stationary_distribution,
    validate_tpm,
)

from conftest import I1_P1, I1_P2


def test_validate_accepts_i1():
    P = validate_tpm(I1_P1)
    assert P.size == 2
    assert not P.rows.flags.writeable


def test_row_sum_violation_reports_row():
    with pytest.raises(RowSumViolation, match="row 1"):
        validate_tpm([[0.5, 0.5], [0.5, 0.6]])


def test_row_sum_tolerance_is_1e12():
    validate_tpm([[0.5, 0.5 + 5e-13], [0.5, 0.5]])
    with pytest.raises(RowSumViolation):
        validate_tpm([[0.5, 0.5 + 5e-12], [0.5, 0.5]])


def test_negative_entry():
    with pytest.raises(NegativeEntry):
        validate_tpm([[1.1, -0.1], [0.5, 0.5]])


@pytest.mark.parametrize(
    "rows",
    [
        [[0.0, 1.0], [1.0, 0.0]],  # periodic
        [[1.0, 0.0], [0.5, 0.5]],  # reducible
        [[0, 1, 0], [0, 0, 1], [1, 0, 0]],  # 3-cycle
    ],
)
def test_not_ergodic(rows):
    with pytest.raises(NotErgodic):
        validate_tpm(rows)


def test_shape_checks():
    with pytest.raises(ValidationError):
        validate_tpm([[1.0]])
    with pytest.raises(ValidationError):
        validate_tpm([[0.5, 0.5]])


def _networkx_ergodic(rows):
    g = nx.DiGraph()
    n = len(rows)
    g.add_nodes_from(range(n))
    g.add_edges_from((i, j) for i in range(n) for j in range(n) if rows[i][j] > 0)
    return nx.is_strongly_connected(g) and nx.is_aperiodic(g)


def test_ergodicity_matches_networkx_on_random_patterns(rng):
    for _ in range(400):
        n = int(rng.integers(2, 6))
        mask = rng.random((n, n)) < rng.uniform(0.2, 0.7)
        rows = np.where(mask, 1.0, 0.0)
        empty = rows.sum(axis=1) == 0
        rows[empty, rng.integers(n, size=empty.sum())] = 1.0
        rows /= rows.sum(axis=1, keepdims=True)
        assert is_ergodic(rows) == _networkx_ergodic(rows.tolist())


def test_period_of_cycles():
    for n in range(2, 7):
        adj = np.roll(np.eye(n, dtype=bool), 1, axis=1)
        assert graph_period(adj) == n


def test_stationary_i1_matches_closed_form():
    # two-state chain: mu = (b, a) / (a + b) with a = P[0,1], b = P[1,0]
    mu = stationary_distribution(validate_tpm(I1_P1))
    np.testing.assert_allclose(mu, [0.6 / 1.3, 0.7 / 1.3], atol=1e-14)
    mu2 = stationary_distribution(validate_tpm(I1_P2))
    np.testing.assert_allclose(mu2, [2 / 3, 1 / 3], atol=1e-14)


def test_stationary_matches_power_iteration(rng):
    for _ in range(50):
        n = int(rng.integers(2, 8))
        rows = rng.dirichlet(np.ones(n), size=n)
        P = validate_tpm(rows)
        mu = stationary_distribution(P)
        it = np.full(n, 1.0 / n)
        for _ in range(2000):
            it = it @ rows
        np.testing.assert_allclose(mu, it, atol=1e-10)
        assert np.max(np.abs(mu @ rows - mu)) <= 1e-12


def test_ergodic_mean_monte_carlo():
    from restless_bai.instance import ergodic_mean

    P = validate_tpm(I1_P1)
    rng = np.random.default_rng(3)
    x, total, n = 0, 0, 200_000
    u = rng.random(n)
    for t in range(n):
        total += x
        x = int(u[t] < P.rows[x, 1])
    assert abs(total / n - ergodic_mean(P, [0, 1])) < 0.01


def test_power_cache_and_identity(rng):
    P = validate_tpm(rng.dirichlet(np.ones(3), size=3))
    np.testing.assert_array_equal(P.power(0), np.eye(3))
    np.testing.assert_allclose(P.power(5), np.linalg.matrix_power(P.rows, 5), atol=1e-14)
    assert P.power(5) is P.power(5)
    np.testing.assert_allclose(matrix_power(P, 7).rows, np.linalg.matrix_power(P.rows, 7), atol=1e-14)
    np.testing.assert_allclose(P.power(200), np.tile(stationary_distribution(P), (3, 1)), atol=1e-10)


def test_matrix_equality_by_content():
    assert TransitionMatrix(np.array(I1_P1)) == validate_tpm(I1_P1)
    assert hash(TransitionMatrix(np.array(I1_P1))) == hash(validate_tpm(I1_P1))
    assert validate_tpm(I1_P1) != validate_tpm(I1_P2)


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert kl_divergence([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    with pytest.raises(SupportViolation):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    p, q = [0.3, 0.7], [0.7, 0.3]
    assert kl_divergence(p, q) == pytest.approx(0.4 * math.log(7 / 3))


def test_kl_against_scipy(rng):
    from scipy.stats import entropy

    for _ in range(100):
        p, q = rng.dirichlet(np.ones(4), size=2)
        assert kl_divergence(p, q) == pytest.approx(entropy(p, q), rel=1e-12)


def test_bernoulli_kl():
    assert bernoulli_kl(0.01, 0.99) == pytest.approx(0.98 * math.log(99))
    with pytest.raises(DomainError):
        bernoulli_kl(0.0, 0.5)


def test_mutual_ac():
    assert check_mutual_ac(validate_tpm(I1_P1), validate_tpm(I1_P2))
    A = validate_tpm([[0.5, 0.5, 0.0], [0.2, 0.3, 0.5], [0.3, 0.3, 0.4]])
    B = validate_tpm([[0.5, 0.4, 0.1], [0.2, 0.3, 0.5], [0.3, 0.3, 0.4]])
    assert not check_mutual_ac(A, B)
