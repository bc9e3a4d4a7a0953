"""Occupancy measures over (delay state, arm) pairs and the delay-constrained LP.

Every measure is an ``(n_states, K)`` array ``nu[s, a]``. Entries for
illegal pairs (state forcing a different arm) are always zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .delay_mdp import SparseKernel, StateSpaceSR, transition_kernel, uniform_rule
from .errors import Infeasible, NumericalBreakdown, ValidationError, ZeroMarginal
from .instance import ArmAssignment, ProblemInstance, alt_set
from .markov import kl_divergence, solve_stationary
from .simplex import solve_lp

log = logging.getLogger(__name__)

FLOW_TOL = 1e-8


def kl_coefficients(
    instance: ProblemInstance, C: ArmAssignment, space: StateSpaceSR, alts: list[ArmAssignment]
) -> np.ndarray:
    """``coef[s, a, k]``: KL between the ``d_a``-step rows of arm ``a`` under ``C`` and ``alts[k]``.

    The value depends only on (bank pair, d_a, i_a), so each distinct
    triple is evaluated once.
    """
    n, K = len(space), space.K
    coef = np.zeros((n, K, len(alts)))
    cache: dict[tuple[int, int, int], np.ndarray] = {}
    legal = space.legal
    for k, Cp in enumerate(alts):
        for a in range(K):
            p, q = C.perm[a], Cp.perm[a]
            if p == q:
                continue
            rows = np.flatnonzero(legal[:, a])
            for d in np.unique(space.delays[rows, a]):
                key = (p, q, int(d))
                if key not in cache:
                    Pd = instance.tpm_bank[p].power(int(d))
                    Qd = instance.tpm_bank[q].power(int(d))
                    cache[key] = np.array([kl_divergence(Pd[i], Qd[i]) for i in range(space.n_obs)])
                sel = rows[space.delays[rows, a] == d]
                coef[sel, a, k] = cache[key][space.last[sel, a]]
    return coef


def uniform_chain_stationary(kernel: SparseKernel) -> np.ndarray:
    """Stationary law of the delay-state chain under uniform-with-forcing pulls."""
    Q = kernel.induced_chain(uniform_rule(kernel.space))
    return solve_stationary(Q)


def uniform_occupancy(mu_unif: np.ndarray, space: StateSpaceSR) -> np.ndarray:
    return uniform_rule(space) * mu_unif[:, None]


def kl_weighted_objective(nu: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Inner sum of the LP objective, one value per alternative configuration."""
    return np.einsum("sa,sak->k", nu, coef)


def t_r_unif(nu_unif: np.ndarray, coef: np.ndarray) -> float:
    return float(kl_weighted_objective(nu_unif, coef).min())


@dataclass
class LpSolution:
    value: float
    measure: np.ndarray
    iterations: int
    primal_residual: float
    duality_gap: float
    min_reduced_cost: float
    diagnostics: dict = field(default_factory=dict)


def _lp_matrices(kernel: SparseKernel, coef: np.ndarray):
    sp = kernel.space
    n, K = len(sp), sp.K
    legal_s, legal_a = np.nonzero(sp.legal)
    ncol = legal_s.size
    n_alt = coef.shape[2]
    # columns: nu over legal pairs, then the epigraph variable t
    flow = np.zeros((n, ncol))
    flow[legal_s, np.arange(ncol)] = 1.0
    succ = sp.successor[legal_s, legal_a]
    prob = kernel.prob[legal_s, legal_a]
    cols = np.broadcast_to(np.arange(ncol)[:, None], succ.shape)
    np.add.at(flow, (succ.ravel(), cols.ravel()), -prob.ravel())
    A_eq = np.zeros((n, ncol + 1))
    A_eq[: n - 1, :ncol] = flow[:-1]  # last balance row is implied by the others
    A_eq[n - 1, :ncol] = 1.0
    b_eq = np.zeros(n)
    b_eq[n - 1] = 1.0
    A_ub = np.zeros((n_alt, ncol + 1))
    A_ub[:, :ncol] = -coef[legal_s, legal_a, :].T
    A_ub[:, ncol] = 1.0
    b_ub = np.zeros(n_alt)
    c = np.zeros(ncol + 1)
    c[ncol] = -1.0
    return c, A_eq, b_eq, A_ub, b_ub, (legal_s, legal_a)


def solve_T_R_star(kernel: SparseKernel, coef: np.ndarray, rule: str = "dantzig") -> LpSolution:
    """Maximize the worst-case KL separation over feasible occupancy measures."""
    sp = kernel.space
    c, A_eq, b_eq, A_ub, b_ub, (ls, la) = _lp_matrices(kernel, coef)
    try:
        res = solve_lp(c, A_eq, b_eq, A_ub, b_ub, rule=rule)
    except Infeasible as exc:
        raise Infeasible(f"delay-constrained LP reported infeasible: {exc}") from exc
    nu = np.zeros((len(sp), sp.K))
    nu[ls, la] = res.x[:-1]
    nu /= nu.sum()
    value = float(kl_weighted_objective(nu, coef).min())
    if abs(value - res.x[-1]) > 1e-9 * max(1.0, value):
        raise NumericalBreakdown(f"epigraph value {res.x[-1]!r} disagrees with measure value {value!r}")
    if res.duality_gap > 1e-9:
        raise NumericalBreakdown(f"duality gap {res.duality_gap:.3e} above 1e-9")
    report = verify_occupancy(nu, kernel)
    return LpSolution(
        value=value,
        measure=nu,
        iterations=res.iterations,
        primal_residual=res.primal_residual,
        duality_gap=res.duality_gap,
        min_reduced_cost=res.min_reduced_cost,
        diagnostics=report,
    )


def mixture_occupancy(nu_unif: np.ndarray, nu_star: np.ndarray, eta: float):
    """``eta`` parts uniform occupancy, ``1 - eta`` parts LP optimum, with state marginal."""
    if not 0.0 < eta <= 1.0:
        raise ValidationError(f"eta must lie in (0, 1], got {eta!r}")
    nu = eta * nu_unif + (1.0 - eta) * nu_star
    return nu, nu.sum(axis=1)


def sampling_rule(nu_eta: np.ndarray, mu_eta: np.ndarray, space: StateSpaceSR) -> np.ndarray:
    """Conditional arm distribution per delay state; forced states are point masses."""
    if np.any(mu_eta <= 0):
        raise ZeroMarginal(f"state {int(np.argmin(mu_eta))} has zero marginal mass")
    rule = nu_eta / mu_eta[:, None]
    f = space.forced >= 0
    rule[f] = 0.0
    rule[np.flatnonzero(f), space.forced[f]] = 1.0
    return rule / rule.sum(axis=1, keepdims=True)


def verify_occupancy(nu: np.ndarray, kernel: SparseKernel, tol: float = FLOW_TOL) -> dict:
    """Residuals of balance, normalization, sign and forced-pull constraints."""
    sp = kernel.space
    n = len(sp)
    inflow = np.zeros(n)
    ok = sp.successor >= 0
    w = nu[:, :, None] * kernel.prob
    np.add.at(inflow, sp.successor[ok], w[ok])
    flow = float(np.max(np.abs(nu.sum(axis=1) - inflow)))
    norm = float(abs(nu.sum() - 1.0))
    neg = float(max(0.0, -nu.min()))
    forced = float(np.max(np.abs(nu[~sp.legal]), initial=0.0))
    return {
        "flow_residual": flow,
        "normalization_error": norm,
        "negativity": neg,
        "forced_violation": forced,
        "ok": max(flow, norm, neg, forced) <= tol,
    }


def dump_lp(kernel: SparseKernel, coef: np.ndarray, path) -> Path:
    """Plain-text standard-form listing of the LP (maximize t)."""
    c, A_eq, b_eq, A_ub, b_ub, (ls, la) = _lp_matrices(kernel, coef)
    names = [f"nu_{s}_{a}" for s, a in zip(ls, la)] + ["t"]
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# delay-constrained LP, config {kernel.config}, R={kernel.space.R}\n")
        fh.write("maximize t\n")
        fh.write("subject to\n")
        for r in range(A_eq.shape[0]):
            terms = " ".join(f"{v:+.17g} {names[j]}" for j, v in enumerate(A_eq[r]) if v != 0.0)
            fh.write(f"  eq{r}: {terms} = {b_eq[r]:.17g}\n")
        for r in range(A_ub.shape[0]):
            terms = " ".join(f"{v:+.17g} {names[j]}" for j, v in enumerate(A_ub[r]) if v != 0.0)
            fh.write(f"  alt{r}: {terms} <= {b_ub[r]:.17g}\n")
        fh.write("bounds\n  all variables >= 0\nend\n")
    return path


@dataclass
class ConfigSolution:
    """Everything the policy needs about one hypothesis ``C``."""

    config: ArmAssignment
    kernel: SparseKernel
    alts: list[ArmAssignment]
    coef: np.ndarray
    mu_unif: np.ndarray
    nu_unif: np.ndarray
    lp: LpSolution
    t_unif: float
    eta: float
    nu_eta: np.ndarray
    mu_eta: np.ndarray
    rule: np.ndarray

    @property
    def t_star(self) -> float:
        return self.lp.value

    def drift_limits(self) -> np.ndarray:
        """Almost-sure slope of each pairwise LLR under the mixture rule."""
        return kl_weighted_objective(self.nu_eta, self.coef)

    def stopping_bound(self) -> float:
        """``1 / (eta T_unif + (1 - eta) T_R*)``."""
        return 1.0 / (self.eta * self.t_unif + (1.0 - self.eta) * self.t_star)


def solve_configuration(
    instance: ProblemInstance, space: StateSpaceSR, C: ArmAssignment, eta: float, rule: str = "dantzig"
) -> ConfigSolution:
    kernel = transition_kernel(instance, C, space)
    alts = alt_set(C, instance.configs)
    coef = kl_coefficients(instance, C, space, alts)
    mu_unif = uniform_chain_stationary(kernel)
    nu_unif = uniform_occupancy(mu_unif, space)
    lp = solve_T_R_star(kernel, coef, rule=rule)
    nu_eta, mu_eta = mixture_occupancy(nu_unif, lp.measure, eta)
    lam = sampling_rule(nu_eta, mu_eta, space)
    return ConfigSolution(
        config=C,
        kernel=kernel,
        alts=alts,
        coef=coef,
        mu_unif=mu_unif,
        nu_unif=nu_unif,
        lp=lp,
        t_unif=t_r_unif(nu_unif, coef),
        eta=eta,
        nu_eta=nu_eta,
        mu_eta=mu_eta,
        rule=lam,
    )


def identical_rows_value(instance: ProblemInstance, C: ArmAssignment) -> float:
    """Arm-weight LP for banks whose TPMs have identical rows.

    Maximizes ``min_{C'} sum_a kappa(a) KL(mu_C^a || mu_C'^a)`` over the
    simplex of arm weights; solved with scipy's HiGHS, independently of the
    tableau solver.
    """
    from scipy.optimize import linprog

    K = instance.K
    mus = [P.rows[0] for P in instance.tpm_bank]
    for P in instance.tpm_bank:
        if not np.allclose(P.rows, P.rows[0], atol=0, rtol=0):
            raise ValidationError("identical_rows_value needs TPMs with identical rows")
    alts = alt_set(C, instance.configs)
    D = np.array([[kl_divergence(mus[C.perm[a]], mus[Cp.perm[a]]) for a in range(K)] for Cp in alts])
    c = np.zeros(K + 1)
    c[-1] = -1.0
    A_ub = np.hstack([-D, np.ones((len(alts), 1))])
    A_eq = np.zeros((1, K + 1))
    A_eq[0, :K] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(len(alts)), A_eq=A_eq, b_eq=[1.0],
                  bounds=[(0, None)] * (K + 1), method="highs")
    if not res.success:
        raise NumericalBreakdown(res.message)
    return float(-res.fun)
