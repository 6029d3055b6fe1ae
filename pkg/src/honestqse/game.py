"""Monte Carlo simulation of the verification game.

The experimentalist reports a state; the verifier measures a fresh copy of
the true state in an eigenbasis of the report and pays according to the
scoring rule.  Rounds are i.i.d. copies of a fixed true state.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .core import (
    DensityMatrix,
    _bloch_op,
    _same_dim,
    bloch_state,
    counter_rng,
    born_probabilities,
    eigendecompose,
    fidelity,
)
from .errors import InvalidInputError
from .scoring import (
    RewardOutcome,
    ScoringRule,
    _report_spectrum,
    ensemble_expected_reward,
    expected_reward,
    outcome_payoffs,
)


@dataclass(frozen=True)
class GameConfig:
    truth: DensityMatrix
    report: DensityMatrix
    rule: ScoringRule = field(default_factory=ScoringRule.hers)
    rounds: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise InvalidInputError(f"rounds must be >= 1, got {self.rounds}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        _same_dim(self.truth, self.report)


@dataclass(frozen=True)
class GameTranscript:
    outcomes: np.ndarray
    payoffs: np.ndarray
    mean_payoff: float
    analytic_expected: float

    @property
    def rounds(self) -> int:
        return self.outcomes.size

    @property
    def standard_error(self) -> float:
        if not np.all(np.isfinite(self.payoffs)):
            return math.inf
        if self.rounds < 2:
            return math.inf
        return float(np.std(self.payoffs, ddof=1) / math.sqrt(self.rounds))

    def within(self, n_se: float = 5.0, floor: float = 1e-12) -> bool:
        """|mean - analytic| <= n_se standard errors (``floor`` covers zero-variance runs)."""
        if not (math.isfinite(self.mean_payoff) and math.isfinite(self.analytic_expected)):
            return self.mean_payoff == self.analytic_expected
        return abs(self.mean_payoff - self.analytic_expected) <= n_se * self.standard_error + floor

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "outcome", "payoff"])
            for i, (o, p) in enumerate(zip(self.outcomes, self.payoffs)):
                w.writerow([i, int(o), repr(float(p))])

    def summary(self) -> dict:
        return {
            "rounds": self.rounds,
            "mean_payoff": _jsonable(self.mean_payoff),
            "analytic_expected": _jsonable(self.analytic_expected),
            "standard_error": _jsonable(self.standard_error),
            "within_5_standard_errors": self.within(),
            "outcome_counts": np.bincount(self.outcomes).tolist(),
        }


def _jsonable(x: float):
    """JSON has no infinities; encode them as strings."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def play_round(truth: DensityMatrix, report: DensityMatrix, rule: ScoringRule,
               rng: np.random.Generator) -> RewardOutcome:
    """One visit: measure in the report's eigenbasis and pay for the outcome."""
    _same_dim(truth, report)
    s, basis = _report_spectrum(report)
    p = born_probabilities(truth, basis).probs
    outcome = int(kernels.sample_outcomes(p, [rng.random()])[0])
    return RewardOutcome(outcome, float(outcome_payoffs(rule, s)[outcome]))


def simulate_game(config: GameConfig) -> GameTranscript:
    """Play ``config.rounds`` independent rounds; deterministic in ``config.seed``.

    Round ``i`` consumes the ``i``-th uniform of the Philox stream keyed by
    the seed, so the transcript does not depend on how rounds are batched.
    """
    s, basis = _report_spectrum(config.report)
    p = born_probabilities(config.truth, basis).probs
    payoff_table = outcome_payoffs(config.rule, s)
    uniforms = counter_rng(config.seed).random(config.rounds)
    outcomes = kernels.sample_outcomes(p, uniforms)
    payoffs = payoff_table[outcomes]
    if np.any(np.isneginf(payoffs)):
        mean = -math.inf
    else:
        mean = float(np.mean(payoffs))
    return GameTranscript(outcomes, payoffs, mean, expected_reward(config.rule, config.truth, config.report))


def best_report_on_grid(truth: DensityMatrix, candidates: Sequence[DensityMatrix], rule: ScoringRule) -> int:
    """Index of the candidate with the largest expected reward (lowest index on ties)."""
    if len(candidates) == 0:
        raise InvalidInputError("candidate list is empty")
    values = np.array([expected_reward(rule, truth, c) for c in candidates])
    return int(np.argmax(values))


def bloch_ball_grid(resolution: int = 20) -> list[DensityMatrix]:
    """Qubit states on radius shells x polar x azimuth (``resolution``^3 points, centre deduplicated)."""
    if resolution < 2:
        raise InvalidInputError("grid resolution must be >= 2")
    radii = np.linspace(0.0, 1.0, resolution)
    polar = np.linspace(0.0, np.pi, resolution)
    azim = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    states = [bloch_state([0.0, 0.0, 0.0])]
    for r in radii[1:]:
        for th in polar:
            for ph in azim:
                n = r * np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
                states.append(bloch_state(n))
    return states


@dataclass
class CounterexampleReport:
    ensemble: list
    weights: list
    mean_state: DensityMatrix
    top_eigenvalue: float
    top_projector: DensityMatrix
    fidelity_optimal: DensityMatrix
    hers_optimal: DensityMatrix
    avg_fidelity_top: float
    avg_fidelity_mean: float
    hers_reward_top: float
    hers_reward_mean: float
    refined_fidelity_max: float
    grid_size: int

    def to_dict(self) -> dict:
        return {
            "ensemble": [s.to_dict() for s in self.ensemble],
            "weights": list(self.weights),
            "mean_state": self.mean_state.to_dict(),
            "top_eigenvalue": self.top_eigenvalue,
            "top_projector": self.top_projector.to_dict(),
            "fidelity_optimal": self.fidelity_optimal.to_dict(),
            "hers_optimal": self.hers_optimal.to_dict(),
            "fidelity_optimum_is_top_projector": self.fidelity_optimal.isclose(self.top_projector, 1e-9),
            "hers_optimum_is_mean": self.hers_optimal.isclose(self.mean_state, 1e-9),
            "average_fidelity": {"top_projector": self.avg_fidelity_top, "mean_state": self.avg_fidelity_mean},
            "hers_ensemble_reward": {"top_projector": _jsonable(self.hers_reward_top),
                                     "mean_state": _jsonable(self.hers_reward_mean)},
            "refined_fidelity_max": self.refined_fidelity_max,
            "grid_size": self.grid_size,
        }


def _avg_pure_fidelity(psis, weights, sigma_mats):
    # F(sigma, |psi><psi|) = <psi|sigma|psi>
    vals = np.einsum("ka,nab,kb->nk", np.conj(psis), sigma_mats, psis).real
    return vals @ weights


def fidelity_counterexample(resolution: int = 20, rule: ScoringRule | None = None) -> CounterexampleReport:
    """Equal mixture of |0> and |+>: fidelity prefers a pure report, HERS prefers the mean."""
    rule = rule or ScoringRule.hers()
    psis = np.array([[1.0, 0.0], [1.0, 1.0]], dtype=complex)
    psis /= np.linalg.norm(psis, axis=1, keepdims=True)
    weights = np.array([0.5, 0.5])
    ensemble = [DensityMatrix.pure(v) for v in psis]
    mean = DensityMatrix(sum(w * s.matrix for w, s in zip(weights, ensemble)))
    lam, basis = eigendecompose(mean)
    top = DensityMatrix.pure(basis.vectors[:, 0])

    grid = bloch_ball_grid(resolution)
    candidates = grid + [mean, top]
    mats = np.array([c.matrix for c in candidates])
    avg_f = _avg_pure_fidelity(psis, weights, mats)
    hers = np.array([ensemble_expected_reward(rule, ensemble, weights, c) for c in candidates])
    f_best = int(np.argmax(avg_f))
    h_best = int(np.argmax(hers))

    # continuous refinement of the fidelity optimum, started from the best grid point
    g_best = int(np.argmax(avg_f[: len(grid)]))
    m = grid[g_best].matrix
    r0 = np.array([2 * m[0, 1].real, -2 * m[0, 1].imag, (m[0, 0] - m[1, 1]).real])

    def neg_avg_fidelity(x):
        n = x / max(1.0, np.linalg.norm(x))
        sig = 0.5 * (np.eye(2) + _bloch_op(n))
        return -float(_avg_pure_fidelity(psis, weights, sig[None])[0])

    res = minimize(neg_avg_fidelity, r0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-13})

    def avg_fid(sigma):
        return float(sum(w * fidelity(sigma, s) for w, s in zip(weights, ensemble)))

    return CounterexampleReport(
        ensemble=ensemble,
        weights=weights.tolist(),
        mean_state=mean,
        top_eigenvalue=float(lam[0]),
        top_projector=top,
        fidelity_optimal=candidates[f_best],
        hers_optimal=candidates[h_best],
        avg_fidelity_top=avg_fid(top),
        avg_fidelity_mean=avg_fid(mean),
        hers_reward_top=ensemble_expected_reward(rule, ensemble, weights, top),
        hers_reward_mean=ensemble_expected_reward(rule, ensemble, weights, mean),
        refined_fidelity_max=-float(res.fun),
        grid_size=len(candidates),
    )
