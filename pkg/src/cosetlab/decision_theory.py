"""Stochastic decision rules for guessing a state from an observation.

Exact error probabilities for arbitrary (stochastic or deterministic)
decision rules on a finite joint law, the optimal maximum a posteriori
rule, and the verification that sampling the posterior at most doubles
the MAP error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .rng import make_rng

_MASS_TOL = 1e-12

DETERMINISTIC = "deterministic"
STOCHASTIC = "stochastic"


@dataclass(eq=False)
class DecisionProblem:
    """Known joint law p_UV of a hidden state U and an observation V."""

    joint: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.joint, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
            raise ValueError("joint table must be 2-d and non-empty")
        if np.any(mat < -_MASS_TOL):
            raise ValueError("probabilities must be non-negative")
        if abs(mat.sum() - 1.0) > _MASS_TOL:
            raise ValueError(f"joint mass must be 1 within {_MASS_TOL}")
        mat = mat.copy()
        mat.flags.writeable = False
        self.joint = mat
        self.p_v = mat.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.posterior = np.where(self.p_v[None, :] > 0.0, mat / self.p_v[None, :], 0.0)

    @property
    def u_size(self) -> int:
        return self.joint.shape[0]

    @property
    def v_size(self) -> int:
        return self.joint.shape[1]


@dataclass(eq=False)
class DecisionRule:
    """Either a map v -> u or a conditional table q(u-hat | v)."""

    kind: str
    f: Optional[np.ndarray] = None       # (|V|,) state indices
    table: Optional[np.ndarray] = None   # (|V|, |U|) rows are probability vectors

    def __post_init__(self):
        if self.kind == DETERMINISTIC:
            if self.f is None:
                raise ValueError("deterministic rules need the decision map f")
            self.f = np.asarray(self.f, dtype=np.int64)
        elif self.kind == STOCHASTIC:
            if self.table is None:
                raise ValueError("stochastic rules need the conditional table")
            tab = np.asarray(self.table, dtype=np.float64)
            if np.any(tab < -_MASS_TOL) or np.any(np.abs(tab.sum(axis=1) - 1.0) > 1e-9):
                raise ValueError("rule rows must be probability vectors")
            self.table = tab
        else:
            raise ValueError(f"unknown rule kind {self.kind!r}")

    def prob_table(self, u_size: int) -> np.ndarray:
        """q(u-hat | v) as a (|V|, |U|) array for either kind."""
        if self.kind == STOCHASTIC:
            return self.table
        tab = np.zeros((len(self.f), u_size))
        tab[np.arange(len(self.f)), self.f] = 1.0
        return tab


def rule_error(prob: DecisionProblem, rule: DecisionRule) -> float:
    """sum_v p(v) sum_u p(u|v) (1 - q(u|v)), exactly."""
    q = rule.prob_table(prob.u_size)
    if q.shape != (prob.v_size, prob.u_size):
        raise ValueError("rule alphabets do not match the problem")
    correct = (prob.posterior.T * q).sum(axis=1)  # sum_u p(u|v) q(u|v)
    return float((prob.p_v * (1.0 - correct)).sum())


def map_rule(prob: DecisionProblem) -> DecisionRule:
    """argmax_u p(u|v) per observation; ties go to the smallest state index."""
    return DecisionRule(kind=DETERMINISTIC, f=prob.posterior.argmax(axis=0))


def posterior_rule(prob: DecisionProblem) -> DecisionRule:
    """Guess by sampling the posterior itself.

    Observations with zero probability get an arbitrary valid row (they
    never contribute to the error).
    """
    tab = prob.posterior.T.copy()
    empty = tab.sum(axis=1) <= 0.0
    tab[empty, 0] = 1.0
    return DecisionRule(kind=STOCHASTIC, table=tab)


@dataclass(frozen=True)
class FactorTwoReport:
    err_map: float
    err_posterior: float
    ratio: float
    passed: bool


def verify_factor2(prob: DecisionProblem) -> FactorTwoReport:
    """Exact check that posterior sampling at most doubles the MAP error."""
    err_map = rule_error(prob, map_rule(prob))
    err_post = rule_error(prob, posterior_rule(prob))
    if err_map > 0.0:
        ratio = err_post / err_map
    else:
        ratio = 1.0 if err_post <= _MASS_TOL else math.inf
    return FactorTwoReport(err_map=err_map, err_posterior=err_post, ratio=ratio,
                           passed=err_post <= 2.0 * err_map + _MASS_TOL)


def random_problem(rng: np.random.Generator, max_u: int = 4, max_v: int = 4,
                   zero_fraction: float = 0.3) -> DecisionProblem:
    """Random joint with occasional hard zeros for edge coverage."""
    u = int(rng.integers(1, max_u + 1))
    v = int(rng.integers(1, max_v + 1))
    mat = rng.random((u, v))
    if rng.random() < 0.5:
        mat = np.where(rng.random((u, v)) < zero_fraction, 0.0, mat)
    if mat.sum() <= 0.0:
        mat[0, 0] = 1.0
    return DecisionProblem(mat / mat.sum())


def random_problems(count: int, seed, max_u: int = 4, max_v: int = 4):
    rng = make_rng(seed)
    return [random_problem(rng, max_u=max_u, max_v=max_v) for _ in range(count)]
