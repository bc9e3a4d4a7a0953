"""Problem instances: the bank of arm TPMs, the reward, and the hypothesis set.

A configuration (``ArmAssignment``) maps each arm position to an index into
the TPM bank. Bank index 0 always holds the best-arm TPM.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import TiedBestArm, ValidationError
from .markov import TransitionMatrix, check_mutual_ac, stationary_distribution, validate_tpm

TIE_TOL = 1e-10


@dataclass(frozen=True)
class ArmAssignment:
    """``perm[a]`` is the bank index of the TPM driving arm ``a`` (0-based)."""

    perm: tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(x) for x in self.perm)
        object.__setattr__(self, "perm", perm)
        if len(perm) < 2:
            raise ValidationError("need at least K = 2 arms")
        if sorted(perm) != list(range(len(perm))):
            raise ValidationError(f"assignment {perm} is not a permutation of 0..{len(perm) - 1}")

    @property
    def K(self) -> int:
        return len(self.perm)

    def best_position(self) -> int:
        """Arm holding bank TPM 0 (the best-arm TPM)."""
        return self.perm.index(0)

    def __str__(self):
        return "(" + ",".join(f"P{k + 1}" for k in self.perm) + ")"


def ergodic_mean(P: TransitionMatrix, f) -> float:
    """Long-run average of ``f`` under the stationary law of ``P``."""
    mu = stationary_distribution(P)
    return float(np.dot(np.asarray(f, dtype=float), mu))


def enumerate_configurations(K: int) -> list[ArmAssignment]:
    """All ``K!`` assignments, lexicographic in ``perm``."""
    if K < 2:
        raise ValidationError("K must be at least 2")
    return [ArmAssignment(p) for p in itertools.permutations(range(K))]


def alt_set(C: ArmAssignment, configs: list[ArmAssignment] | None = None) -> list[ArmAssignment]:
    """Configurations whose best arm sits at a different position than in ``C``."""
    if configs is None:
        configs = enumerate_configurations(C.K)
    b = C.best_position()
    return [Cp for Cp in configs if Cp.best_position() != b]


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    tpm_bank: tuple[TransitionMatrix, ...]
    reward: np.ndarray
    truth: ArmAssignment
    phi: np.ndarray

    def __post_init__(self):
        bank = tuple(self.tpm_bank)
        object.__setattr__(self, "tpm_bank", bank)
        K = len(bank)
        if K < 2:
            raise ValidationError("need at least two TPMs")
        n = bank[0].size
        if any(P.size != n for P in bank):
            raise ValidationError("all TPMs must share one state space")
        reward = np.array(self.reward, dtype=float)
        if reward.shape != (n,) or not np.all(np.isfinite(reward)):
            raise ValidationError(f"reward must be {n} finite values")
        if np.ptp(reward) == 0.0:
            raise TiedBestArm("reward is constant, every arm ties")
        phi = np.array(self.phi, dtype=float)
        if phi.shape != (n,) or np.any(phi <= 0) or abs(phi.sum() - 1.0) > 1e-12:
            raise ValidationError("phi must be a strictly positive distribution over the states")
        if self.truth.K != K:
            raise ValidationError(f"assignment has {self.truth.K} arms, bank has {K} TPMs")
        for x, y in itertools.combinations(range(K), 2):
            if not check_mutual_ac(bank[x], bank[y]):
                raise ValidationError(f"P{x + 1} and P{y + 1} are not mutually absolutely continuous")
        reward.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "phi", phi)
        means = self.bank_means
        gaps = means[0] - np.delete(means, 0)
        if np.min(gaps) <= TIE_TOL:
            raise TiedBestArm(
                f"P1 must have the strictly largest ergodic mean; means = {means.tolist()}"
            )

    @classmethod
    def build(cls, tpms, reward, truth=None, phi=None) -> "ProblemInstance":
        bank = tuple(P if isinstance(P, TransitionMatrix) else validate_tpm(P) for P in tpms)
        n = bank[0].size
        if truth is None:
            truth = tuple(range(len(bank)))
        if not isinstance(truth, ArmAssignment):
            truth = ArmAssignment(tuple(truth))
        if phi is None:
            phi = np.full(n, 1.0 / n)
        return cls(bank, np.asarray(reward, dtype=float), truth, np.asarray(phi, dtype=float))

    @property
    def K(self) -> int:
        return len(self.tpm_bank)

    @property
    def n_states(self) -> int:
        return self.tpm_bank[0].size

    @cached_property
    def bank_means(self) -> np.ndarray:
        return np.array([ergodic_mean(P, self.reward) for P in self.tpm_bank])

    @cached_property
    def configs(self) -> list[ArmAssignment]:
        return enumerate_configurations(self.K)

    @cached_property
    def truth_index(self) -> int:
        return self.configs.index(self.truth)

    def arm_tpm(self, C: ArmAssignment, a: int) -> TransitionMatrix:
        return self.tpm_bank[C.perm[a]]

    def arm_means(self, C: ArmAssignment) -> np.ndarray:
        return self.bank_means[list(C.perm)]

    def best_arm(self, C: ArmAssignment | None = None) -> int:
        return best_arm(self.truth if C is None else C, self)


def best_arm(C: ArmAssignment, instance: ProblemInstance) -> int:
    """0-based argmax of the ergodic means under ``C``.

    Raises TiedBestArm when the top two means are within 1e-10.
    """
    means = instance.arm_means(C)
    order = np.argsort(means)[::-1]
    if means[order[0]] - means[order[1]] <= TIE_TOL:
        raise TiedBestArm(f"best arm is not unique: means = {means.tolist()}")
    return int(order[0])
