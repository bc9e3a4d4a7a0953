"""Experiment configuration files (JSON syntax).

Example::

    {
      "state_space_size": 2,
      "reward": [0, 1],
      "tpms": [[[0.3, 0.7], [0.6, 0.4]], [[0.7, 0.3], [0.6, 0.4]]],
      "assignment": [1, 2],
      "phi": [0.5, 0.5],
      "policy": {"L": 100, "eta": 0.2, "R": 4, "max_horizon": 10000000},
      "experiment": {"trials": 2000, "seed": 1, "workers": 1, "mode": "montecarlo"}
    }

``tpms[0]`` is the best-arm TPM P1. ``assignment[a]`` is the 1-based number
of the TPM driving arm ``a + 1``. Give exactly one of ``L`` and
``epsilon`` (then ``L = 1 / epsilon``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError
from .instance import ArmAssignment, ProblemInstance
from .markov import validate_tpm

MODES = ("montecarlo", "drift", "lp-sweep", "verify")


@dataclass
class ExperimentConfig:
    instance: ProblemInstance
    L: float
    eta: float
    R: int
    max_horizon: int = 10_000_000
    epsilon: float | None = None
    trials: int = 1000
    seed: int = 0
    workers: int = 1
    mode: str = "montecarlo"
    L_values: list[float] = field(default_factory=list)
    R_values: list[int] = field(default_factory=list)
    horizon: int = 200_000
    checkpoints: list[int] = field(default_factory=list)
    source: str | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ParseError(f"missing key {key!r} in {where}")
    return d[key]


def parse_instance(data: dict) -> ProblemInstance:
    n = _require(data, "state_space_size", "config")
    tpms = _require(data, "tpms", "config")
    reward = _require(data, "reward", "config")
    if not isinstance(tpms, list) or len(tpms) < 2:
        raise ParseError("'tpms' must be a list of at least two matrices")
    try:
        bank = tuple(validate_tpm(P) for P in tpms)
    except ValidationError as exc:
        raise type(exc)(f"tpms: {exc}") from exc
    if bank[0].size != n:
        raise ValidationError(f"state_space_size is {n} but TPMs are {bank[0].size}x{bank[0].size}")
    K = len(bank)
    assignment = data.get("assignment", list(range(1, K + 1)))
    try:
        truth = ArmAssignment(tuple(int(x) - 1 for x in assignment))
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"assignment: {exc}") from exc
    return ProblemInstance.build(bank, reward, truth, data.get("phi"))


def parse_config(data: dict, source: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    instance = parse_instance(data)
    policy = _require(data, "policy", "config")
    has_L, has_eps = "L" in policy, "epsilon" in policy
    if has_L == has_eps:
        raise ParseError("policy must give exactly one of 'L' and 'epsilon'")
    if has_eps:
        eps = float(policy["epsilon"])
        if not 0.0 < eps < 1.0:
            raise ValidationError(f"epsilon must lie in (0, 1), got {eps!r}")
        L = 1.0 / eps
    else:
        eps = None
        L = float(policy["L"])
        if not L > 1:
            raise ValidationError(f"L must exceed 1, got {L!r}")
    eta = float(_require(policy, "eta", "policy"))
    if not 0.0 < eta <= 1.0:
        raise ValidationError(f"eta must lie in (0, 1], got {eta!r}")
    R = int(_require(policy, "R", "policy"))
    if R <= instance.K:
        raise ValidationError(f"R must exceed K={instance.K}, got {R}")
    exp = data.get("experiment", {})
    mode = exp.get("mode", "montecarlo")
    if mode not in MODES:
        raise ParseError(f"unknown mode {mode!r}; expected one of {MODES}")
    trials = int(exp.get("trials", 1000))
    if trials < 1:
        raise ValidationError("trial count must be at least 1")
    R_values = [int(r) for r in exp.get("R_values", [])]
    if any(r <= instance.K for r in R_values):
        raise ValidationError("every R in R_values must exceed K")
    return ExperimentConfig(
        instance=instance,
        L=L,
        eta=eta,
        R=R,
        max_horizon=int(policy.get("max_horizon", 10_000_000)),
        epsilon=eps,
        trials=trials,
        seed=int(exp.get("seed", 0)),
        workers=max(1, int(exp.get("workers", 1))),
        mode=mode,
        L_values=[float(x) for x in exp.get("L_values", [])],
        R_values=R_values,
        horizon=int(exp.get("horizon", 200_000)),
        checkpoints=[int(x) for x in exp.get("checkpoints", [])],
        source=source,
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return parse_config(data, source=str(path))


def load_instance(path) -> ProblemInstance:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object")
    return parse_instance(data)
