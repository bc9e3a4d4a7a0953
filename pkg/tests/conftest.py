import numpy as np
import pytest

from restless_bai.instance import ProblemInstance
from restless_bai.markov import stationary_distribution, validate_tpm

I1_P1 = [[0.3, 0.7], [0.6, 0.4]]
I1_P2 = [[0.7, 0.3], [0.6, 0.4]]


def make_i1(truth=(0, 1)):
    return ProblemInstance.build([I1_P1, I1_P2], [0.0, 1.0], truth)


def random_instance(rng, K=2, n=2, identical_rows=False, floor=0.05):
    """Random instance with strictly positive TPMs, bank sorted so P1 is best.

    Rows are Dirichlet draws mixed with the uniform row, so every entry is at
    least ``floor / n`` and every chain is ergodic.
    """
    reward = np.arange(n, dtype=float)
    for _ in range(100):
        mats = []
        for _ in range(K):
            if identical_rows:
                row = (1 - floor) * rng.dirichlet(np.ones(n)) + floor / n
                mats.append(np.tile(row, (n, 1)))
            else:
                mats.append((1 - floor) * rng.dirichlet(np.ones(n), size=n) + floor / n)
        means = [stationary_distribution(validate_tpm(P)) @ reward for P in mats]
        order = np.argsort(means)[::-1]
        sorted_means = np.sort(means)[::-1]
        if np.min(-np.diff(sorted_means)) > 1e-3:
            bank = [mats[k] for k in order]
            truth = tuple(rng.permutation(K))
            return ProblemInstance.build(bank, reward, truth)
    raise RuntimeError("could not draw a well-separated instance")


@pytest.fixture
def i1():
    return make_i1()


@pytest.fixture
def k3():
    P1 = [[0.2, 0.8], [0.5, 0.5]]
    P2 = [[0.6, 0.4], [0.5, 0.5]]
    P3 = [[0.8, 0.2], [0.7, 0.3]]
    return ProblemInstance.build([P1, P2, P3], [0.0, 1.0], (1, 0, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
