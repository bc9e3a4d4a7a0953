"""Restless environment and the delay-constrained sampling/stopping policy.

Every trial seed is split into independent streams: one per arm, one for
the policy's arm draws and one for tie-breaking, so changing the policy
never perturbs the environment noise.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .delay_mdp import StateSpaceSR, enumerate_state_space, uniform_rule
from .errors import ValidationError
from .instance import ArmAssignment, ProblemInstance
from .llr import argmax_config, glr_all, init_ledger, log_power_bank, record
from .occupancy import ConfigSolution, solve_configuration

log = logging.getLogger(__name__)

_BLOCK = 4096


class _UniformStream:
    """Uniform(0,1) draws from a generator, fetched in blocks."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._buf = rng.random(_BLOCK)
        self._pos = 0

    def next(self) -> float:
        if self._pos == _BLOCK:
            self._buf = self.rng.random(_BLOCK)
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _draw(cdf: np.ndarray, u: float) -> int:
    return int(np.searchsorted(cdf, u, side="right"))


def _cdf(p: np.ndarray) -> np.ndarray:
    out = np.cumsum(p, axis=-1)
    out[..., -1] = 1.0
    return out


@dataclass
class TrialStreams:
    arms: list[np.random.Generator]
    policy: np.random.Generator
    tie: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int, K: int) -> "TrialStreams":
        children = np.random.SeedSequence(seed).spawn(K + 2)
        gens = [np.random.default_rng(s) for s in children]
        return cls(arms=gens[:K], policy=gens[K], tie=gens[K + 1])


class Environment:
    """``K`` independent chains under the assignment ``truth``.

    ``pull(a)`` returns the current state of arm ``a`` and then advances the
    clock. In eager mode every chain takes one step per tick; in lazy mode an
    arm is only sampled when pulled, from its ``d``-step kernel. The two
    have the same law.
    """

    def __init__(self, instance: ProblemInstance, seed: int, truth: ArmAssignment | None = None, lazy: bool = False):
        self.instance = instance
        self.truth = instance.truth if truth is None else truth
        self.seed = seed
        self.lazy = lazy
        K = instance.K
        self.streams = TrialStreams.from_seed(seed, K)
        self._u = [_UniformStream(g) for g in self.streams.arms]
        self._tpms = [instance.arm_tpm(self.truth, a) for a in range(K)]
        self._cdf = np.stack([_cdf(np.asarray(P.rows)) for P in self._tpms])
        phi_cdf = _cdf(instance.phi)
        self.t = 0
        if lazy:
            self.state = None
            self._last_state = [None] * K
            self._last_time = [0] * K
            self._phi = instance.phi
        else:
            self.state = np.array([_draw(phi_cdf, u.next()) for u in self._u], dtype=np.int64)

    def pull(self, a: int) -> int:
        if self.lazy:
            return self._pull_lazy(a)
        obs = int(self.state[a])
        cdf = self._cdf
        for b in range(len(self._u)):
            self.state[b] = _draw(cdf[b, self.state[b]], self._u[b].next())
        self.t += 1
        return obs

    def _pull_lazy(self, a: int) -> int:
        P = self._tpms[a]
        if self._last_state[a] is None:
            row = self._phi @ P.power(self.t)
        else:
            row = P.power(self.t - self._last_time[a])[self._last_state[a]]
        obs = _draw(_cdf(row), self._u[a].next())
        self._last_state[a] = obs
        self._last_time[a] = self.t
        self.t += 1
        return obs


def env_init(instance: ProblemInstance, seed: int, lazy: bool = False) -> Environment:
    return Environment(instance, seed, lazy=lazy)


def env_step_and_observe(env: Environment, a: int) -> int:
    return env.pull(a)


def stopping_threshold(L: float, K: int) -> float:
    """``log(L (K-1) (K-1)!)``."""
    if not L > 1:
        raise ValidationError(f"L must exceed 1, got {L!r}")
    if K < 2:
        raise ValidationError("K must be at least 2")
    return math.log(L) + math.log(K - 1) + math.lgamma(K)


@dataclass(frozen=True)
class PolicyConfig:
    L: float
    eta: float
    R: int
    max_horizon: int = 10_000_000

    def __post_init__(self):
        if not self.L > 1:
            raise ValidationError(f"L must exceed 1, got {self.L!r}")
        if not 0.0 < self.eta <= 1.0:
            raise ValidationError(f"eta must lie in (0, 1], got {self.eta!r}")
        if int(self.R) != self.R:
            raise ValidationError("R must be an integer")
        if self.max_horizon < 1:
            raise ValidationError("max_horizon must be positive")


@dataclass
class PolicyTables:
    """Precomputed sampling rules for every configuration, plus shared tables."""

    instance: ProblemInstance
    space: StateSpaceSR
    eta: float
    solutions: list[ConfigSolution]
    rule_cdf: np.ndarray = field(repr=False)
    logp: np.ndarray = field(repr=False)

    @property
    def truth_solution(self) -> ConfigSolution:
        return self.solutions[self.instance.truth_index]


def build_policy_tables(instance: ProblemInstance, R: int, eta: float, rule: str = "dantzig") -> PolicyTables:
    """One LP and one stationary solve per configuration."""
    if R <= instance.K:
        raise ValidationError(f"R must exceed K (got R={R}, K={instance.K})")
    space = enumerate_state_space(instance.K, R, instance.n_states)
    solutions = []
    for C in instance.configs:
        log.debug("solving configuration %s", C)
        solutions.append(solve_configuration(instance, space, C, eta, rule=rule))
    rule_cdf = np.stack([_cdf(s.rule) for s in solutions])
    return PolicyTables(instance, space, eta, solutions, rule_cdf, log_power_bank(instance, R))


@dataclass
class TrialRecord:
    seed: int
    tau: int
    declared: int
    error: bool
    final_M: float
    threshold: float
    hit_horizon: bool


def run_rdcr_bai(
    tables: PolicyTables,
    config: PolicyConfig,
    seed: int,
    lazy: bool = False,
    trajectory: list | None = None,
) -> TrialRecord:
    """One trial of the stopping policy.

    ``tau`` is the number of pulls taken before stopping. When
    ``trajectory`` is a list it receives ``(n, arm, obs, state, M)`` rows.
    """
    inst = tables.instance
    if config.R != tables.space.R or config.eta != tables.eta:
        raise ValidationError("policy config does not match the precomputed tables")
    K = inst.K
    env = Environment(inst, seed, lazy=lazy)
    pol = _UniformStream(env.streams.policy)
    tie = env.streams.tie
    thr = stopping_threshold(config.L, K)
    first = [env.pull(a) for a in range(K)]
    sp = tables.space
    s = sp.initial_index(first)
    ledger = init_ledger(first, inst, sp, tables.logp)
    succ = sp.successor
    rule_cdf = tables.rule_cdf
    n = K
    while True:
        M = glr_all(ledger.z, ledger.best_pos, K)
        cbar = argmax_config(M, tie)
        if M[cbar] >= thr:
            declared = int(ledger.best_pos[cbar])
            return TrialRecord(seed, n, declared, declared != inst.best_arm(), float(M[cbar]), thr, False)
        if n >= config.max_horizon:
            declared = int(ledger.best_pos[cbar])
            log.warning("trial seed=%d hit the horizon %d", seed, config.max_horizon)
            return TrialRecord(seed, n, declared, declared != inst.best_arm(), float(M[cbar]), thr, True)
        a = _draw(rule_cdf[cbar, s], pol.next())
        j = env.pull(a)
        if trajectory is not None:
            trajectory.append((n, a, j, s, float(M[cbar])))
        record(ledger, s, a, j)
        s = int(succ[s, a, j])
        n += 1


@dataclass
class DriftRecord:
    config_index: int
    alt_indices: list[int]
    checkpoints: list[int]
    llr_slopes: np.ndarray
    occupancy: list[np.ndarray]
    estimates: list[int]
    limits: np.ndarray
    ledger: object = field(default=None, repr=False)


def run_nonstopping(
    tables: PolicyTables,
    horizon: int,
    seed: int,
    fixed_config: int | None = None,
    checkpoints=None,
    lazy: bool = False,
) -> DriftRecord:
    """Never-stopping variant of the policy.

    With ``fixed_config`` every pull uses that configuration's rule; otherwise
    the rule follows the running estimate. At each checkpoint ``n`` (pulls so
    far) the slopes ``Z_{CC'}(n) / n`` for the true ``C`` against each
    alternative, the empirical occupancy ``N(n, s, a) / n`` and the current
    estimate are stored.
    """
    inst = tables.instance
    K = inst.K
    ci = inst.truth_index
    alts = [inst.configs.index(Cp) for Cp in tables.solutions[ci].alts]
    if checkpoints is None:
        checkpoints = [horizon]
    checkpoints = sorted(set(int(c) for c in checkpoints if K < c <= horizon) | {horizon})
    env = Environment(inst, seed, lazy=lazy)
    pol = _UniformStream(env.streams.policy)
    tie = env.streams.tie
    first = [env.pull(a) for a in range(K)]
    sp = tables.space
    s = sp.initial_index(first)
    ledger = init_ledger(first, inst, sp, tables.logp)
    succ = sp.successor
    rule_cdf = tables.rule_cdf
    slopes, occ, est = [], [], []
    n = K
    k = 0
    cbar = ci if fixed_config is None else fixed_config
    while k < len(checkpoints):
        if fixed_config is None:
            cbar = argmax_config(glr_all(ledger.z, ledger.best_pos, K), tie)
        a = _draw(rule_cdf[cbar, s], pol.next())
        j = env.pull(a)
        record(ledger, s, a, j)
        s = int(succ[s, a, j])
        n += 1
        if n == checkpoints[k]:
            slopes.append((ledger.z[ci] - ledger.z[alts]) / n)
            occ.append(ledger.counts.sum(axis=2) / n)
            est.append(int(cbar))
            k += 1
    return DriftRecord(
        config_index=ci,
        alt_indices=alts,
        checkpoints=checkpoints,
        llr_slopes=np.array(slopes),
        occupancy=occ,
        estimates=est,
        limits=tables.solutions[ci].drift_limits(),
        ledger=ledger,
    )


def uniform_state_frequencies(tables: PolicyTables, steps: int, seed: int, lazy: bool = False) -> np.ndarray:
    """Empirical delay-state frequencies under uniform-with-forcing pulls.

    The state is counted just before each of ``steps`` pulls that follow the
    initial round robin.
    """
    inst = tables.instance
    sp = tables.space
    env = Environment(inst, seed, lazy=lazy)
    pol = _UniformStream(env.streams.policy)
    cdf = _cdf(uniform_rule(sp))
    s = sp.initial_index([env.pull(a) for a in range(inst.K)])
    succ = sp.successor
    visits = np.zeros(len(sp), dtype=np.int64)
    for _ in range(steps):
        visits[s] += 1
        a = _draw(cdf[s], pol.next())
        s = int(succ[s, a, env.pull(a)])
    return visits / steps
