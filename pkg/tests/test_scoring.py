import math

import numpy as np
import pytest
import scipy.linalg as sla

from honestqse.core import (
    DensityMatrix,
    MeasurementBasis,
    Povm,
    born_probabilities,
    dephase,
    random_basis,
    random_density_matrix,
    relative_entropy,
    tensor_power,
    von_neumann_entropy,
)
from honestqse.errors import DimensionMismatchError, InvalidInputError
from honestqse.scoring import (
    ScoringRule,
    classical_expected_score,
    ensemble_expected_reward,
    expected_reward,
    hers_payoff,
    outcome_payoffs,
    povm_expected_reward,
    propriety_gap,
    value_function,
)

from conftest import MIXED2, PLUS, ZERO

HERS = ScoringRule.hers()
BRIER = ScoringRule.brier()


def commuting_pair(rng, d):
    b = random_basis(d, rng).vectors
    p, q = rng.dirichlet(np.ones(d)), rng.dirichlet(np.ones(d))
    return DensityMatrix((b * p) @ b.conj().T), DensityMatrix((b * q) @ b.conj().T)


class TestRule:
    def test_d_must_be_positive(self):
        with pytest.raises(InvalidInputError):
            ScoringRule.hers(0.0, 0.0)
        with pytest.raises(InvalidInputError):
            ScoringRule.hers(0.0, -1.0)

    def test_json_roundtrip(self):
        rule = ScoringRule.brier(1.5, 2.0)
        assert ScoringRule.from_dict(rule.to_dict()) == rule
        assert rule.to_dict() == {"kind": "brier", "c": 1.5, "d": 2.0}

    def test_unknown_key(self):
        with pytest.raises(InvalidInputError, match="scale"):
            ScoringRule.from_dict({"kind": "hers", "scale": 1})


class TestHersPayoff:
    def test_values(self):
        assert hers_payoff(HERS, 1.0) == 0.0
        assert hers_payoff(HERS, 0.5) == pytest.approx(-0.693147, abs=1e-6)
        assert hers_payoff(HERS, 0.0) == -math.inf
        assert hers_payoff(ScoringRule.hers(3.0, 2.0), 0.25) == pytest.approx(3.0 + 2 * math.log(0.25))

    def test_range_checked(self):
        with pytest.raises(InvalidInputError):
            hers_payoff(HERS, 1.5)
        with pytest.raises(InvalidInputError):
            hers_payoff(BRIER, 0.5)


class TestExpectedReward:
    def test_examples(self):
        assert expected_reward(HERS, MIXED2, MIXED2) == pytest.approx(-math.log(2), abs=1e-12)
        assert expected_reward(ScoringRule.hers(5.0, 1.0), ZERO, ZERO) == pytest.approx(5.0, abs=1e-12)
        assert expected_reward(HERS, PLUS, ZERO) == -math.inf

    def test_pure_honest_report_is_finite(self):
        assert expected_reward(HERS, PLUS, PLUS) == pytest.approx(0.0, abs=1e-12)

    def test_matches_trace_log_oracle(self, rng):
        rule = ScoringRule.hers(0.7, 1.3)
        for _ in range(100):
            d = int(rng.integers(2, 5))
            rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
            oracle = rule.c + rule.d * np.real(np.trace(rho.matrix @ sla.logm(sigma.matrix)))
            assert expected_reward(rule, rho, sigma) == pytest.approx(oracle, abs=1e-9)

    def test_entropy_plus_relative_entropy_form(self, rng):
        # holds for non-commuting pairs too: sum_i p_i ln s_i = Tr(rho ln sigma)
        rule = ScoringRule.hers(2.0, 0.5)
        for _ in range(200):
            d = int(rng.integers(2, 5))
            rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
            form = rule.c - rule.d * (von_neumann_entropy(rho) + relative_entropy(rho, sigma))
            assert expected_reward(rule, rho, sigma) == pytest.approx(form, abs=1e-9)

    def test_commuting_pair_uses_dephased_truth_exactly(self, rng):
        for _ in range(50):
            rho, sigma = commuting_pair(rng, 3)
            _, basis = np.linalg.eigh(sigma.matrix)
            dephased = dephase(rho, MeasurementBasis(basis))
            assert dephased.isclose(rho, 1e-10)
            form = -(von_neumann_entropy(rho) + relative_entropy(rho, sigma))
            assert expected_reward(HERS, rho, sigma) == pytest.approx(form, abs=1e-10)

    def test_degenerate_report_basis_invariance(self, rng):
        # two different eigenbases of a degenerate report give the same reward
        v = random_basis(3, rng).vectors
        s = np.array([0.4, 0.4, 0.2])
        sigma = DensityMatrix((v * s) @ v.conj().T)
        rho = random_density_matrix(3, rng)
        block = random_basis(2, rng).vectors
        v2 = v.copy()
        v2[:, :2] = v[:, :2] @ block
        p1 = born_probabilities(rho, MeasurementBasis(v)).probs
        p2 = born_probabilities(rho, MeasurementBasis(v2)).probs
        assert not np.allclose(p1, p2)
        for rule in (HERS, BRIER):
            by_basis1 = classical_expected_score(rule, p1, s)
            by_basis2 = classical_expected_score(rule, p2, s)
            assert by_basis1 == pytest.approx(by_basis2, abs=1e-12)
            assert expected_reward(rule, rho, sigma) == pytest.approx(by_basis1, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            expected_reward(HERS, MIXED2, DensityMatrix.maximally_mixed(3))

    def test_n_copy_additivity(self, rng):
        for _ in range(100):
            rho, sigma = random_density_matrix(2, rng), random_density_matrix(2, rng)
            one = expected_reward(HERS, rho, sigma)
            two = expected_reward(HERS, tensor_power(rho, 2), tensor_power(sigma, 2))
            assert two == pytest.approx(2 * one, abs=1e-8)


class TestClassical:
    def test_examples(self):
        assert classical_expected_score(HERS, [1, 0], [1, 0]) == 0.0
        assert classical_expected_score(HERS, [1, 0], [0.5, 0.5]) == pytest.approx(-0.693147, abs=1e-6)
        assert classical_expected_score(HERS, [0.25] * 4, [0.25] * 4) == pytest.approx(-math.log(4), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            classical_expected_score(HERS, [1, 0], [0.2, 0.3, 0.5])

    def test_brier_formula(self):
        p, q = np.array([0.2, 0.5, 0.3]), np.array([0.1, 0.6, 0.3])
        direct = sum(p[i] * (2 * q[i] - np.sum(q**2)) for i in range(3))
        assert classical_expected_score(BRIER, p, q) == pytest.approx(direct, abs=1e-15)

    def test_brier_strictly_proper(self, rng):
        for _ in range(500):
            n = int(rng.integers(2, 6))
            p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            assert value_function(BRIER, p) > classical_expected_score(BRIER, p, q)

    def test_hers_strictly_proper_classically(self, rng):
        for _ in range(500):
            n = int(rng.integers(2, 6))
            p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            assert value_function(HERS, p) > classical_expected_score(HERS, p, q)


class TestValueFunction:
    def test_examples(self):
        assert value_function(HERS, [0.5, 0.5]) == pytest.approx(-math.log(2), abs=1e-12)
        assert value_function(HERS, [1.0, 0.0]) == 0.0

    def test_negative_shannon_entropy(self, rng):
        p = rng.dirichlet(np.ones(5))
        assert value_function(HERS, p) == pytest.approx(float(np.sum(p * np.log(p))), abs=1e-12)

    @pytest.mark.parametrize("rule", [HERS, BRIER], ids=["hers", "brier"])
    def test_strict_convexity(self, rule, rng):
        for _ in range(300):
            n = int(rng.integers(2, 6))
            p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
            mid = value_function(rule, 0.5 * (p + q))
            assert mid < 0.5 * value_function(rule, p) + 0.5 * value_function(rule, q)


class TestProprietyGap:
    def test_examples(self, rng):
        rho = random_density_matrix(3, rng)
        assert propriety_gap(HERS, rho, rho) == pytest.approx(0.0, abs=1e-12)
        assert propriety_gap(HERS, ZERO, MIXED2) == pytest.approx(math.log(2), abs=1e-12)
        assert propriety_gap(HERS, MIXED2, ZERO) == math.inf

    @pytest.mark.parametrize("rule", [HERS, BRIER, ScoringRule.hers(-3.0, 0.2)], ids=["hers", "brier", "hers-affine"])
    def test_strictly_proper_quantum(self, rule, rng):
        for _ in range(1000):
            d = int(rng.integers(2, 5))
            rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
            assert propriety_gap(rule, rho, sigma) > 0
            assert propriety_gap(rule, rho, rho) < 1e-10

    def test_hers_gap_is_scaled_relative_entropy_commuting(self, rng):
        rule = ScoringRule.hers(1.0, 2.5)
        for _ in range(200):
            rho, sigma = commuting_pair(rng, int(rng.integers(2, 5)))
            assert propriety_gap(rule, rho, sigma) == pytest.approx(rule.d * relative_entropy(rho, sigma), abs=1e-9)

    def test_hers_gap_is_scaled_relative_entropy_general(self, rng):
        for _ in range(200):
            d = int(rng.integers(2, 5))
            rho, sigma = random_density_matrix(d, rng), random_density_matrix(d, rng)
            assert propriety_gap(HERS, rho, sigma) == pytest.approx(relative_entropy(rho, sigma), abs=1e-9)

    def test_affine_freedom_preserves_argmax(self, rng):
        for _ in range(30):
            d = int(rng.integers(2, 4))
            truth = random_density_matrix(d, rng)
            grid = [random_density_matrix(d, rng) for _ in range(40)]
            rules = [ScoringRule.hers(0, 1), ScoringRule.hers(-7.0, 0.01), ScoringRule.hers(100.0, 42.0)]
            picks = {int(np.argmax([expected_reward(r, truth, g) for g in grid])) for r in rules}
            assert len(picks) == 1


class TestFixedPovmRegime:
    def test_sic_regime_is_strictly_proper(self, rng):
        sic = Povm.qubit_sic()
        for _ in range(300):
            rho, sigma = random_density_matrix(2, rng), random_density_matrix(2, rng)
            assert povm_expected_reward(HERS, rho, rho, sic) > povm_expected_reward(HERS, rho, sigma, sic)

    def test_computational_povm_cannot_tell_phases(self):
        comp = Povm.from_basis(MeasurementBasis.computational(2))
        # fixed non-IC POVM: |+> and I/2 give identical statistics, so honesty is not enforced
        assert povm_expected_reward(HERS, PLUS, MIXED2, comp) == pytest.approx(
        povm_expected_reward(HERS, PLUS, PLUS, comp), abs=1e-15)


def test_ensemble_reward_equals_reward_of_mean(rng):
    for _ in range(50):
        d = int(rng.integers(2, 4))
        states = [random_density_matrix(d, rng) for _ in range(5)]
        w = rng.dirichlet(np.ones(5))
        mean = DensityMatrix(sum(wi * s.matrix for wi, s in zip(w, states)))
        sigma = random_density_matrix(d, rng)
        assert ensemble_expected_reward(HERS, states, w, sigma) == pytest.approx(
            expected_reward(HERS, mean, sigma), abs=1e-10)


def test_outcome_payoffs_brier_orientation():
    q = np.array([0.7, 0.3])
    np.testing.assert_allclose(outcome_payoffs(BRIER, q), 2 * q - 0.58)
