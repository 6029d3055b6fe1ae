"""Honest quantum state estimation.

Strictly proper scoring of density-matrix reports (the logarithmic HERS
rule), Monte Carlo simulation of the verification game, Bayesian
posterior-mean estimation from measurement records, and a numerical check
that per-outcome reward offsets must be equal.
"""

__version__ = "0.1.0"

from .core import (
    DensityMatrix,
    MeasurementBasis,
    OutcomeDistribution,
    Povm,
    born_probabilities,
    dephase,
    eigendecompose,
    fidelity,
    majorizes,
    relative_entropy,
    tensor_power,
    trace_distance,
    von_neumann_entropy,
)
from .scoring import (
    ScoringRule,
    classical_expected_score,
    expected_reward,
    hers_payoff,
    propriety_gap,
    value_function,
)

__all__ = [
    "DensityMatrix",
    "MeasurementBasis",
    "OutcomeDistribution",
    "Povm",
    "ScoringRule",
    "born_probabilities",
    "classical_expected_score",
    "dephase",
    "eigendecompose",
    "expected_reward",
    "fidelity",
    "hers_payoff",
    "majorizes",
    "propriety_gap",
    "relative_entropy",
    "tensor_power",
    "trace_distance",
    "value_function",
    "von_neumann_entropy",
]
