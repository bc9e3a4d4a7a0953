"""Running log-likelihoods for every configuration and the GLR statistic.

Only the configuration-dependent part of each log-likelihood is tracked:
the initial-observation term plus the accumulated observation term. The
control term is identical across configurations and cancels in every
ratio, so it is never computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .delay_mdp import StateSpaceSR
from .errors import ImpossibleObservation, ValidationError, ZeroLikelihood
from .instance import ArmAssignment, ProblemInstance

TIE_RTOL = 1e-12


def log_power_bank(instance: ProblemInstance, R: int) -> np.ndarray:
    """``out[k, d, i, j] = log (P_k^d)(j | i)`` for ``d = 0..R`` (``-inf`` on zeros)."""
    n = instance.n_states
    out = np.empty((instance.K, R + 1, n, n))
    with np.errstate(divide="ignore"):
        for k, P in enumerate(instance.tpm_bank):
            for d in range(R + 1):
                out[k, d] = np.log(P.power(d))
    out.setflags(write=False)
    return out


@dataclass
class LlrLedger:
    configs: list[ArmAssignment]
    space: StateSpaceSR
    logp: np.ndarray
    z: np.ndarray
    z0: np.ndarray
    counts: np.ndarray
    perms: np.ndarray = field(repr=False)
    best_pos: np.ndarray = field(repr=False)

    @property
    def n_recorded(self) -> int:
        return int(self.counts.sum())


def init_ledger(first_obs, instance: ProblemInstance, space: StateSpaceSR, logp: np.ndarray | None = None) -> LlrLedger:
    """Ledger after the forced round robin ``arm 0 at t=0, ..., arm K-1 at t=K-1``.

    Arm ``a`` is first seen at time ``a``, so its observation has law
    ``phi (P_C^a)^a``.
    """
    K = instance.K
    if len(first_obs) != K:
        raise ValidationError(f"need {K} first observations, got {len(first_obs)}")
    configs = instance.configs
    if logp is None:
        logp = log_power_bank(instance, space.R)
    perms = np.array([C.perm for C in configs], dtype=np.int64)
    # per bank TPM k and arm a: log P(X_a^a = j_a) = log sum_i phi(i) P_k^a(j_a | i)
    first = np.empty((K, K))
    for k, P in enumerate(instance.tpm_bank):
        for a in range(K):
            first[k, a] = instance.phi @ P.power(a)[:, int(first_obs[a])]
    if np.any(first <= 0):
        raise ImpossibleObservation("first observations have zero probability under some TPM")
    logfirst = np.log(first)
    z0 = logfirst[perms, np.arange(K)[None, :]].sum(axis=1)
    return LlrLedger(
        configs=configs,
        space=space,
        logp=logp,
        z=z0.copy(),
        z0=z0,
        counts=np.zeros((len(space), K, space.n_obs), dtype=np.int64),
        perms=perms,
        best_pos=np.array([C.best_position() for C in configs], dtype=np.int64),
    )


def record(ledger: LlrLedger, s: int, a: int, j: int) -> None:
    """Add one pull of arm ``a`` from delay state ``s`` that showed chain state ``j``."""
    sp = ledger.space
    d = sp.delays[s, a]
    i = sp.last[s, a]
    inc = ledger.logp[ledger.perms[:, a], d, i, j]
    if not np.all(np.isfinite(inc)):
        raise ZeroLikelihood(f"observation {j} impossible for some configuration (arm {a}, d={d}, i={i})")
    ledger.counts[s, a, j] += 1
    ledger.z += inc


def llr(ledger: LlrLedger, c: int, cp: int) -> float:
    return float(ledger.z[c] - ledger.z[cp])


def glr_all(z: np.ndarray, best_pos: np.ndarray, K: int) -> np.ndarray:
    """``M_C = z_C - max over configurations with a different best arm``."""
    group = np.full(K, -np.inf)
    np.maximum.at(group, best_pos, z)
    top2 = np.sort(group)[-2:]
    top_pos = int(np.argmax(group))
    other = np.where(best_pos == top_pos, top2[0], top2[1])
    return z - other


def glr_statistic(ledger: LlrLedger, c: int) -> float:
    alts = ledger.best_pos != ledger.best_pos[c]
    return float(ledger.z[c] - ledger.z[alts].max())


def argmax_config(M: np.ndarray, rng: np.random.Generator) -> int:
    """Index of a maximizer of ``M``; near-exact ties are split uniformly."""
    top = M.max()
    ties = np.flatnonzero(M >= top - TIE_RTOL * max(1.0, abs(top)))
    if ties.size == 1:
        return int(ties[0])
    return int(ties[rng.integers(ties.size)])


def batch_z(ledger: LlrLedger) -> np.ndarray:
    """Recompute every ``z_C`` from the count table (cross-check of the running sums)."""
    sp = ledger.space
    s, a, j = np.nonzero(ledger.counts)
    w = ledger.counts[s, a, j].astype(float)
    d = sp.delays[s, a]
    i = sp.last[s, a]
    out = ledger.z0.copy()
    for c in range(len(ledger.configs)):
        out[c] += float(np.sum(w * ledger.logp[ledger.perms[c, a], d, i, j]))
    return out


def occupancy_frequencies(counts: np.ndarray) -> np.ndarray:
    """Empirical ``N(n, s, a) / n`` from a count table."""
    total = counts.sum()
    return counts.sum(axis=2) / max(total, 1)
