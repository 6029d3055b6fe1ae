"""Strictly proper scoring rules and their lift to density-matrix reports.

The quantum lift follows the verification protocol: the verifier measures
in an eigenbasis of the report and scores the observed outcome with the
report's eigenvalue for it.  For the logarithmic (HERS) rule the expected
payoff is ``C + D Tr(rho ln sigma)``.

Extended-real conventions: ``-inf`` plus anything finite is ``-inf`` and a
zero-probability outcome contributes nothing to an expectation, even when
its payoff is ``-inf`` (0 ln 0 = 0).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    SUPPORT_TOL,
    SUPPORT_WEIGHT_TOL,
    DensityMatrix,
    OutcomeDistribution,
    Povm,
    _same_dim,
    born_probabilities,
    eigendecompose,
)
from .errors import DimensionMismatchError, InvalidInputError


class RuleKind(str, enum.Enum):
    HERS = "hers"
    BRIER = "brier"


@dataclass(frozen=True)
class ScoringRule:
    """Affine family ``c + d * score``; ``d`` must be positive."""

    kind: RuleKind = RuleKind.HERS
    c: float = 0.0
    d: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", RuleKind(self.kind))
        if not (self.d > 0 and math.isfinite(self.d)):
            raise InvalidInputError(f"scale d must be positive and finite, got {self.d}")
        if not math.isfinite(self.c):
            raise InvalidInputError(f"offset c must be finite, got {self.c}")

    @classmethod
    def hers(cls, c: float = 0.0, d: float = 1.0) -> "ScoringRule":
        return cls(RuleKind.HERS, c, d)

    @classmethod
    def brier(cls, c: float = 0.0, d: float = 1.0) -> "ScoringRule":
        return cls(RuleKind.BRIER, c, d)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "c": self.c, "d": self.d}

    @classmethod
    def from_dict(cls, data: dict) -> "ScoringRule":
        unknown = set(data) - {"kind", "c", "d"}
        if unknown:
            raise InvalidInputError(f"unknown scoring-rule key: {sorted(unknown)[0]}")
        return cls(RuleKind(data.get("kind", "hers")), float(data.get("c", 0.0)), float(data.get("d", 1.0)))


@dataclass(frozen=True)
class RewardOutcome:
    outcome_index: int
    payoff: float


def hers_payoff(rule: ScoringRule, reported_prob: float) -> float:
    """C + D ln s, and ``-inf`` when s = 0."""
    if rule.kind is not RuleKind.HERS:
        raise InvalidInputError("hers_payoff requires a HERS rule")
    s = float(reported_prob)
    if not 0.0 <= s <= 1.0:
        raise InvalidInputError(f"reported probability must be in [0, 1], got {s}")
    if s == 0.0:
        return -math.inf
    return rule.c + rule.d * math.log(s)


def outcome_payoffs(rule: ScoringRule, report_probs) -> np.ndarray:
    """Payoff for each possible outcome given the reported distribution."""
    q = np.asarray(report_probs, dtype=float)
    if rule.kind is RuleKind.HERS:
        with np.errstate(divide="ignore"):
            return rule.c + rule.d * np.log(q)
    # Brier in reward orientation: 2 q_i - sum_j q_j^2
    return rule.c + rule.d * (2.0 * q - np.dot(q, q))


def _expectation(p, payoffs, weight_tol=0.0) -> float:
    dead = np.isneginf(payoffs)
    if np.any(p[dead] > weight_tol):
        return -math.inf
    live = (p > 0) & ~dead
    return float(np.dot(p[live], payoffs[live]))


def _report_spectrum(report):
    s, basis = eigendecompose(report)
    s[s < SUPPORT_TOL] = 0.0
    return s, basis


def _as_dist(x) -> np.ndarray:
    if isinstance(x, OutcomeDistribution):
        return x.probs
    return OutcomeDistribution(x).probs


def classical_expected_score(rule: ScoringRule, truth, report) -> float:
    """Average reward R(P : Q) of forecast Q when outcomes follow P."""
    p, q = _as_dist(truth), _as_dist(report)
    if p.size != q.size:
        raise DimensionMismatchError(f"outcome counts differ: {p.size} vs {q.size}")
    return _expectation(p, outcome_payoffs(rule, q))


def value_function(rule: ScoringRule, p) -> float:
    """G(P) = R(P : P); for HERS(0, 1) this is minus the Shannon entropy."""
    return classical_expected_score(rule, p, p)


def expected_reward(rule: ScoringRule, truth: DensityMatrix, report: DensityMatrix) -> float:
    """Expected payoff when the verifier measures in the report's eigenbasis."""
    _same_dim(truth, report)
    s, basis = _report_spectrum(report)
    p = born_probabilities(truth, basis).probs
    return _expectation(p, outcome_payoffs(rule, s), SUPPORT_WEIGHT_TOL)


def propriety_gap(rule: ScoringRule, truth: DensityMatrix, report: DensityMatrix) -> float:
    """Honest expected reward minus the reward for ``report`` (>= 0)."""
    honest = expected_reward(rule, truth, truth)
    lied = expected_reward(rule, truth, report)
    if lied == -math.inf:
        return math.inf
    return max(honest - lied, 0.0)


def povm_expected_reward(rule: ScoringRule, truth: DensityMatrix, report: DensityMatrix, povm: Povm) -> float:
    """Fixed-measurement regime: score the report's predicted POVM statistics."""
    p = born_probabilities(truth, povm).probs
    q = born_probabilities(report, povm).probs
    q = np.where(q < SUPPORT_TOL, 0.0, q)
    return _expectation(p, outcome_payoffs(rule, q), SUPPORT_WEIGHT_TOL)


def ensemble_expected_reward(rule: ScoringRule, states: Sequence[DensityMatrix] | np.ndarray,
                             weights, report: DensityMatrix) -> float:
    """Average of ``expected_reward(rule, rho_k, report)`` over a weighted ensemble.

    ``states`` may be a list of DensityMatrix or arrays, or a stacked (n, d, d) array.
    The average is taken term by term, not through the ensemble mean.
    """
    mats = np.asarray([getattr(s, "matrix", s) for s in states] if not isinstance(states, np.ndarray) else states)
    w = np.asarray(weights, dtype=float)
    if mats.shape[0] != w.size:
        raise DimensionMismatchError("states and weights differ in length")
    if mats.shape[1] != report.dim:
        raise DimensionMismatchError(f"dimension mismatch: {mats.shape[1]} vs {report.dim}")
    s, basis = _report_spectrum(report)
    v = basis.vectors
    probs = np.clip(np.real(np.einsum("ai,nab,bi->ni", v.conj(), mats, v)), 0.0, 1.0)
    payoffs = outcome_payoffs(rule, s)
    total = 0.0
    for wk, pk in zip(w, probs):
        if wk == 0:
            continue
        r = _expectation(pk, payoffs, SUPPORT_WEIGHT_TOL)
        if r == -math.inf:
            return -math.inf
        total += wk * r
    return total
