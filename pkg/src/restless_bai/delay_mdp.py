"""Controlled Markov process of arm delays and last observed states.

A delay state is a pair ``(d, i)``: ``d[a]`` is the time since arm ``a`` was
last pulled and ``i[a]`` the state seen at that pull. With a maximum delay
``R``, an arm whose delay reaches ``R`` must be pulled next.

Arms and chain states are 0-based throughout.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DelayOverflow, IllegalAction, ValidationError
from .instance import ArmAssignment, ProblemInstance


@dataclass(frozen=True)
class DelayState:
    d: tuple[int, ...]
    i: tuple[int, ...]

    def __post_init__(self):
        if len(self.d) != len(self.i):
            raise ValidationError("delay and last-state vectors differ in length")
        if sum(1 for x in self.d if x == 1) != 1 or min(self.d) < 1:
            raise ValidationError(f"exactly one delay must equal 1, got {self.d}")
        if len(set(self.d)) != len(self.d):
            raise ValidationError(f"delays must be distinct, got {self.d}")

    @property
    def K(self) -> int:
        return len(self.d)


def initial_state(first_obs) -> DelayState:
    """State after the forced round robin: ``d = (K, ..., 1)``."""
    K = len(first_obs)
    return DelayState(tuple(range(K, 0, -1)), tuple(int(j) for j in first_obs))


def allowed_actions(s: DelayState, R: int) -> tuple[int, ...]:
    for a, da in enumerate(s.d):
        if da == R:
            return (a,)
    return tuple(range(s.K))


def apply_selection(s: DelayState, a: int, j: int, R: int) -> DelayState:
    """Pull arm ``a`` in state ``s`` and observe chain state ``j``."""
    if a not in allowed_actions(s, R):
        raise IllegalAction(f"arm {a} not allowed in {s} with R={R}")
    d = tuple(1 if b == a else db + 1 for b, db in enumerate(s.d))
    if max(d) > R:
        raise DelayOverflow(f"delay vector {d} exceeds R={R}")
    i = tuple(int(j) if b == a else ib for b, ib in enumerate(s.i))
    return DelayState(d, i)


@dataclass(frozen=True, eq=False)
class StateSpaceSR:
    """Reachable delay states for ``(K, R, |S|)`` with frozen dense indexing.

    ``successor[s, a, j]`` is the index reached by pulling ``a`` and seeing
    ``j``; it is -1 for illegal pulls. ``forced[s]`` is the forced arm or -1.
    """

    K: int
    R: int
    n_obs: int
    states: tuple[DelayState, ...]
    index: dict
    delays: np.ndarray
    last: np.ndarray
    forced: np.ndarray
    successor: np.ndarray

    def __len__(self):
        return len(self.states)

    @property
    def legal(self) -> np.ndarray:
        """Boolean ``(n, K)`` mask of legal (state, arm) pairs."""
        return self.successor[:, :, 0] >= 0

    def forced_states(self, a: int) -> np.ndarray:
        return np.flatnonzero(self.forced == a)

    def initial_index(self, first_obs) -> int:
        return self.index[initial_state(first_obs)]


def enumerate_state_space(K: int, R: int, n_obs: int) -> StateSpaceSR:
    """Breadth-first closure of all initial states under legal pulls."""
    if K < 2:
        raise ValidationError("K must be at least 2")
    if R <= K:
        raise ValidationError(f"R must exceed K (got R={R}, K={K})")
    if n_obs < 2:
        raise ValidationError("need at least two chain states")
    states: list[DelayState] = []
    index: dict[DelayState, int] = {}
    queue: deque[DelayState] = deque()
    for obs in itertools.product(range(n_obs), repeat=K):
        s0 = initial_state(obs)
        index[s0] = len(states)
        states.append(s0)
        queue.append(s0)
    edges: list[tuple[int, int, int, int]] = []
    while queue:
        s = queue.popleft()
        si = index[s]
        for a in allowed_actions(s, R):
            for j in range(n_obs):
                t = apply_selection(s, a, j, R)
                ti = index.get(t)
                if ti is None:
                    ti = index[t] = len(states)
                    states.append(t)
                    queue.append(t)
                edges.append((si, a, j, ti))
    n = len(states)
    successor = np.full((n, K, n_obs), -1, dtype=np.int64)
    for si, a, j, ti in edges:
        successor[si, a, j] = ti
    delays = np.array([s.d for s in states], dtype=np.int64)
    last = np.array([s.i for s in states], dtype=np.int64)
    forced = np.full(n, -1, dtype=np.int64)
    at_max = delays == R
    rows, arms = np.nonzero(at_max)
    forced[rows] = arms
    for arr in (delays, last, forced, successor):
        arr.setflags(write=False)
    return StateSpaceSR(K, R, n_obs, tuple(states), index, delays, last, forced, successor)


@dataclass(frozen=True, eq=False)
class SparseKernel:
    """``prob[s, a, j]``: chance of moving to ``space.successor[s, a, j]``.

    Each legal row has exactly ``|S|`` successors, one per observation; rows
    of illegal pulls are all zero.
    """

    space: StateSpaceSR
    config: ArmAssignment
    prob: np.ndarray

    def row(self, s: int, a: int) -> dict[int, float]:
        if not self.space.legal[s, a]:
            raise IllegalAction(f"no kernel row for state {s}, arm {a}")
        return {int(t): float(p) for t, p in zip(self.space.successor[s, a], self.prob[s, a])}

    def induced_chain(self, rule: np.ndarray) -> np.ndarray:
        """Dense state-to-state matrix when arms are drawn from ``rule[s, a]``."""
        sp = self.space
        n = len(sp)
        Q = np.zeros((n, n))
        w = rule[:, :, None] * self.prob
        src = np.broadcast_to(np.arange(n)[:, None, None], sp.successor.shape)
        ok = sp.successor >= 0
        np.add.at(Q, (src[ok], sp.successor[ok]), w[ok])
        return Q


def kernel_probabilities(instance: ProblemInstance, C: ArmAssignment, space: StateSpaceSR) -> np.ndarray:
    """``(n, K, |S|)`` array of ``(P_C^a)^{d_a}(j | i_a)`` on legal pulls."""
    n = len(space)
    prob = np.zeros((n, space.K, space.n_obs))
    legal = space.legal
    for a in range(space.K):
        P = instance.arm_tpm(C, a)
        rows = np.flatnonzero(legal[:, a])
        for d in np.unique(space.delays[rows, a]):
            sel = rows[space.delays[rows, a] == d]
            prob[sel, a, :] = P.power(int(d))[space.last[sel, a]]
    return prob


def transition_kernel(instance: ProblemInstance, C: ArmAssignment, space: StateSpaceSR) -> SparseKernel:
    """Kernel of the delay-constrained MDP under assignment ``C``."""
    if space.n_obs != instance.n_states or space.K != instance.K:
        raise ValidationError("state space does not match the instance")
    prob = kernel_probabilities(instance, C, space)
    prob.setflags(write=False)
    return SparseKernel(space, C, prob)


def uniform_rule(space: StateSpaceSR) -> np.ndarray:
    """Pull uniformly at random unless an arm is forced."""
    rule = np.full((len(space), space.K), 1.0 / space.K)
    f = space.forced >= 0
    rule[f] = 0.0
    rule[np.flatnonzero(f), space.forced[f]] = 1.0
    return rule
