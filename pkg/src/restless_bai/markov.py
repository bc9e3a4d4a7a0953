"""Finite-state Markov chain primitives.

Transition matrices are validated once and then treated as immutable. All
distributions are plain 1-d float arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import (
    DomainError,
    NegativeEntry,
    NotErgodic,
    RowSumViolation,
    SingularSystem,
    SupportViolation,
    ValidationError,
)

STOCHASTIC_TOL = 1e-12
POWER_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """A validated row-stochastic matrix.

    Build through :func:`validate_tpm`; the constructor does not check
    anything. ``rows`` is stored read-only.
    """

    rows: np.ndarray
    _powers: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    def power(self, d: int) -> np.ndarray:
        """Cached ``d``-step kernel as a raw array (``d = 0`` is the identity)."""
        if d not in self._powers:
            if d == 0:
                out = np.eye(self.size)
            else:
                out = matrix_power(self, d).rows
            out.setflags(write=False)
            self._powers[d] = out
        return self._powers[d]

    def __eq__(self, other):
        if not isinstance(other, TransitionMatrix):
            return NotImplemented
        return self.rows.shape == other.rows.shape and bool(np.array_equal(self.rows, other.rows))

    def __hash__(self):
        return hash(self.rows.tobytes())


def _as_square(rows) -> np.ndarray:
    arr = np.array(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"transition matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 2:
        raise ValidationError("transition matrix needs at least 2 states")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("transition matrix has non-finite entries")
    return arr


def check_stochastic(arr: np.ndarray, tol: float = STOCHASTIC_TOL) -> None:
    if np.any(arr < 0):
        i, j = np.argwhere(arr < 0)[0]
        raise NegativeEntry(f"negative entry {arr[i, j]!r} at ({i}, {j})")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise RowSumViolation(f"row {bad[0]} sums to {sums[bad[0]]!r}")


def validate_tpm(rows, require_ergodic: bool = True) -> TransitionMatrix:
    """Validate ``rows`` and wrap it as a :class:`TransitionMatrix`.

    Raises NegativeEntry, RowSumViolation (|row sum - 1| > 1e-12) or
    NotErgodic. ``require_ergodic=False`` is for test scaffolding only.
    """
    arr = _as_square(rows)
    check_stochastic(arr)
    if require_ergodic and not _graph_is_ergodic(arr > 0):
        raise NotErgodic("chain is not irreducible and aperiodic")
    return TransitionMatrix(arr)


def _bfs_levels(adj: np.ndarray, start: int) -> np.ndarray:
    n = adj.shape[0]
    level = np.full(n, -1, dtype=np.int64)
    level[start] = 0
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(adj[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return level


def graph_period(adj: np.ndarray) -> int:
    """Period of a strongly connected digraph given as a boolean adjacency.

    Uses BFS levels from node 0: the period is the gcd of
    ``level[u] + 1 - level[v]`` over all edges ``u -> v``.
    """
    level = _bfs_levels(adj, 0)
    us, vs = np.nonzero(adj)
    diffs = level[us] + 1 - level[vs]
    return reduce(math.gcd, (abs(int(x)) for x in diffs), 0)


def graph_is_irreducible(adj: np.ndarray) -> bool:
    forward = _bfs_levels(adj, 0)
    backward = _bfs_levels(adj.T, 0)
    return bool(np.all(forward >= 0) and np.all(backward >= 0))


def _graph_is_ergodic(adj: np.ndarray) -> bool:
    return graph_is_irreducible(adj) and graph_period(adj) == 1


def is_ergodic(P) -> bool:
    """True iff the positive-entry digraph is strongly connected and aperiodic."""
    rows = P.rows if isinstance(P, TransitionMatrix) else np.asarray(P, dtype=float)
    return _graph_is_ergodic(rows > 0)


def solve_stationary(rows: np.ndarray) -> np.ndarray:
    """Stationary vector of a row-stochastic array by a direct linear solve.

    One balance equation is replaced by the normalization ``sum(mu) = 1``.
    Works on any irreducible chain; used for the large delay-state chains too.
    """
    n = rows.shape[0]
    A = rows.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        mu = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(mu)):
        raise SingularSystem("non-finite stationary solution")
    # one step of refinement keeps the residual at machine precision for n ~ 1e3
    r = b - A @ mu
    mu = mu + np.linalg.solve(A, r)
    if np.any(mu < -1e-9):
        raise SingularSystem("stationary solution has negative mass; chain is not irreducible")
    mu = np.clip(mu, 0.0, None)
    return mu / mu.sum()


def stationary_distribution(P: TransitionMatrix) -> np.ndarray:
    """The unique ``mu`` with ``mu P = mu`` for an ergodic chain."""
    return solve_stationary(np.asarray(P.rows))


def matrix_power(P: TransitionMatrix, d: int) -> TransitionMatrix:
    """``P`` multiplied by itself ``d`` times, by repeated squaring."""
    if d < 1:
        raise ValueError("d must be a positive integer")
    result = None
    base = np.array(P.rows)
    while d:
        if d & 1:
            result = base.copy() if result is None else result @ base
        d >>= 1
        if d:
            base = base @ base
    return TransitionMatrix(result)


def kl_divergence(p, q) -> float:
    """Relative entropy in nats with the ``0 log(0/0) = 0`` convention."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValidationError("distributions must have the same support size")
    support = p > 0
    if np.any(q[support] <= 0):
        raise SupportViolation("p puts mass where q has none")
    ps = p[support]
    value = float(np.sum(ps * np.log(ps / q[support])))
    return max(value, 0.0)


def bernoulli_kl(x: float, y: float) -> float:
    """Relative entropy between Bernoulli(x) and Bernoulli(y)."""
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise DomainError(f"bernoulli_kl needs x, y in (0, 1), got {x!r}, {y!r}")
    return x * math.log(x / y) + (1.0 - x) * math.log((1.0 - x) / (1.0 - y))


def check_mutual_ac(P, Q) -> bool:
    """Rows of ``P`` and ``Q`` have identical zero patterns."""
    a = P.rows if isinstance(P, TransitionMatrix) else np.asarray(P)
    b = Q.rows if isinstance(Q, TransitionMatrix) else np.asarray(Q)
    if a.shape != b.shape:
        return False
    return bool(np.array_equal(a > 0, b > 0))
