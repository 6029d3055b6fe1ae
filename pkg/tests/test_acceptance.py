"""Acceptance gate: one test per criterion, tolerances and runtime limits pinned.

Each test records a PASS/FAIL line (printed in the terminal summary) with
the measured quantities before asserting.
"""

import math
import time

import numpy as np
import pytest

from honestqse.appendix import (
    construct_counterexample,
    g_function,
    random_curve,
    scan_negative_g,
    second_derivative_analytic,
    second_derivative_numeric,
    verify_ci_equality,
)
from honestqse.bayes import (
    MeasurementRecord,
    PriorSpec,
    discrete_ensemble,
    estimator_risk,
    mle_estimate,
    posterior_mean,
    posterior_update,
    simulate_record,
)
from honestqse.core import (
    DensityMatrix,
    Povm,
    counter_rng,
    depolarize,
    random_basis,
    random_density_matrix,
    random_pure_state,
    relative_entropy,
    tensor_power,
    trace_distance,
)
from honestqse.game import GameConfig, bloch_ball_grid, fidelity_counterexample, simulate_game
from honestqse.scoring import ScoringRule, ensemble_expected_reward, propriety_gap

from conftest import MIXED2, PLUS, RHO_BAR, ZERO

pytestmark = pytest.mark.acceptance

HERS = ScoringRule.hers()


def test_c1_strict_propriety(record_criterion):
    start = time.perf_counter()
    violations, min_gap, max_self_gap = 0, math.inf, 0.0
    for k in range(1200):
        rng = counter_rng(101, k)
        d = 2 + k % 3
        rho = random_density_matrix(d, rng)
        if k % 3 == 0:
            # near-miss reports: small mixtures toward another state
            eps = 10 ** rng.uniform(-3, -1)
            sigma = DensityMatrix((1 - eps) * rho.matrix + eps * random_density_matrix(d, rng).matrix)
        else:
            sigma = random_density_matrix(d, rng)
        gap = propriety_gap(HERS, rho, sigma)
        min_gap = min(min_gap, gap)
        violations += not gap > 0
        max_self_gap = max(max_self_gap, abs(propriety_gap(HERS, rho, rho)))
    elapsed = time.perf_counter() - start
    ok = violations == 0 and max_self_gap < 1e-10 and elapsed < 10
    record_criterion("C1 strict propriety of HERS", ok,
                     f"pairs=1200 violations={violations} min_gap={min_gap:.3e} "
                     f"max|gap(rho,rho)|={max_self_gap:.1e} t={elapsed:.2f}s")
    assert violations == 0
    assert max_self_gap < 1e-10
    assert elapsed < 10


def test_c2_monte_carlo_matches_analytic(record_criterion):
    start = time.perf_counter()
    hits = 0
    for k in range(20):
        rng = counter_rng(202, k)
        d = 2 + k % 3
        truth = random_density_matrix(d, rng)
        report = random_density_matrix(d, rng)  # full rank, so every payoff is finite
        rule = HERS if k % 4 else ScoringRule.brier()
        t = simulate_game(GameConfig(truth, report, rule, 100_000, k))
        assert math.isfinite(t.mean_payoff)
        hits += t.within(5.0)
    anchor = simulate_game(GameConfig(MIXED2, MIXED2, ScoringRule.hers(0.0, 1.0), 100_000, 7))
    elapsed = time.perf_counter() - start
    anchor_ok = abs(anchor.mean_payoff - (-0.693147)) <= 0.01
    ok = hits >= 19 and anchor_ok and elapsed < 30
    record_criterion("C2 Monte Carlo vs analytic reward", ok,
                     f"within_5se={hits}/20 anchor_mean={anchor.mean_payoff:.6f} t={elapsed:.2f}s")
    assert hits >= 19
    assert anchor_ok
    assert elapsed < 30


def test_c3_fidelity_counterexample(record_criterion):
    start = time.perf_counter()
    rep = fidelity_counterexample()
    elapsed = time.perf_counter() - start
    # independent oracle: the average fidelity of reporting rho_bar is Tr(rho_bar^2)
    purity = float(np.real(np.trace(RHO_BAR.matrix @ RHO_BAR.matrix)))
    checks = {
        "mean": rep.mean_state.isclose(RHO_BAR, 1e-12),
        "top_eig": abs(rep.top_eigenvalue - 0.853553) <= 1e-6,
        "fid_opt": rep.fidelity_optimal.isclose(rep.top_projector, 1e-9),
        "fid_top": abs(rep.avg_fidelity_top - 0.853553) <= 1e-6,
        "fid_mean": abs(rep.avg_fidelity_mean - purity) <= 1e-9,
        "hers_opt": rep.hers_optimal.isclose(RHO_BAR, 1e-12),
        "hers_top_neg_inf": rep.hers_reward_top == -math.inf,
        "hers_inverted": rep.hers_reward_mean > rep.hers_reward_top,
        "time": elapsed < 5,
    }
    ok = all(checks.values())
    record_criterion("C3 fidelity counterexample", ok,
                     f"lambda={rep.top_eigenvalue:.6f} F(top)={rep.avg_fidelity_top:.6f} "
                     f"F(rho_bar)={rep.avg_fidelity_mean:.6f} R(rho_bar)={rep.hers_reward_mean:.6f} "
                     f"R(top)={rep.hers_reward_top} t={elapsed:.2f}s "
                     f"failed={[k for k, v in checks.items() if not v]}")
    assert ok, checks


@pytest.mark.xfail(strict=True, reason="the quoted 0.625 disagrees with Tr(rho_bar^2) = 0.75")
def test_c3_quoted_mean_fidelity_literal():
    rep = fidelity_counterexample(resolution=4)
    assert rep.avg_fidelity_mean == pytest.approx(0.625, abs=1e-6)


def _criterion4_scenario(k):
    rng = counter_rng(404, k)
    d = 2 if k % 2 == 0 else 3
    m = int(rng.integers(2, 6))
    members = [random_density_matrix(d, rng) for _ in range(m)]
    prior = PriorSpec.discrete(list(zip(members, rng.dirichlet(np.ones(m)))))
    truth = members[int(rng.integers(m))]
    povm = Povm.pauli6() if d == 2 else Povm.from_basis(random_basis(3, rng))
    rec, _ = simulate_record(truth, povm, int(rng.integers(1, 25)), rng)
    post = posterior_update(discrete_ensemble(prior), rec, resample=False)
    mean = posterior_mean(post)
    if d == 2:
        grid = bloch_ball_grid(11)
    else:
        grid = [random_density_matrix(3, rng) for _ in range(1000)]
    perturbed = []
    for j in range(50):
        eps = 10 ** rng.uniform(-2, -1)
        kind = j % 3
        if kind == 0:
            s = (1 - eps) * mean.matrix + eps * random_density_matrix(d, rng).matrix
        elif kind == 1:
            # traceless unit-norm generator so the rotation really moves the state by ~eps
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            h = 0.5 * (a + a.conj().T)
            h -= np.trace(h).real / d * np.eye(d)
            h /= np.linalg.norm(h, 2)
            w = np.linalg.eigh(eps * h)
            rot = w[1] @ np.diag(np.exp(1j * w[0])) @ w[1].conj().T
            s = rot @ mean.matrix @ rot.conj().T
        else:
            s = depolarize(mean, eps).matrix
        perturbed.append(DensityMatrix(0.5 * (s + s.conj().T)))
    return post, mean, list(grid) + perturbed


def test_c4_posterior_mean_optimality(record_criterion):
    start = time.perf_counter()
    wins, min_sep, min_grid = 0, math.inf, math.inf
    for k in range(50):
        post, mean, grid = _criterion4_scenario(k)
        min_grid = min(min_grid, len(grid) + 1)
        best = ensemble_expected_reward(HERS, post.particles, post.weights, mean)
        others = np.array([ensemble_expected_reward(HERS, post.particles, post.weights, s) for s in grid])
        sep = best - float(np.max(others))
        min_sep = min(min_sep, sep)
        wins += sep >= 1e-8
    elapsed = time.perf_counter() - start
    ok = wins == 50 and min_grid >= 1000 and elapsed < 60
    record_criterion("C4 posterior-mean optimality", ok,
                     f"scenarios=50 optimal={wins} min_grid={min_grid} min_separation={min_sep:.3e} t={elapsed:.2f}s")
    assert wins == 50
    assert min_grid >= 1000
    assert elapsed < 60


def test_c5_appendix(record_criterion):
    start = time.perf_counter()
    worst_ratio = 0.0
    for k in range(500):
        rng = counter_rng(505, k)
        d = 2 + k % 3
        curve = random_curve(d, rng, rng.normal(size=d))
        a, n = second_derivative_analytic(curve), second_derivative_numeric(curve)
        worst_ratio = max(worst_ratio, abs(a - n) / max(1e-4, 1e-3 * abs(a)))
    part_a = worst_ratio <= 1.0
    equal_min = math.inf
    for k in range(500):
        rng = counter_rng(506, k)
        d = 2 + k % 3
        equal_min = min(equal_min, second_derivative_analytic(random_curve(d, rng, np.full(d, rng.normal()))))
    report = verify_ci_equality(3, 1000, seed=1)
    part_b = equal_min >= -1e-10 and report.equal_constant_violations == 0 and report.passed
    curve = construct_counterexample(0.0, 2 * math.log(2))
    t_neg = scan_negative_g(curve)
    ddg = second_derivative_analytic(curve)
    part_c = (np.allclose(curve.rho.matrix, np.diag([0.5, 0.25, 0.25]), atol=1e-12) and ddg < 0
              and t_neg is not None and 0 < t_neg <= 0.1 and g_function(curve, t_neg) < 0)
    elapsed = time.perf_counter() - start
    ok = part_a and part_b and part_c and elapsed < 30
    record_criterion("C5 appendix verification", ok,
                     f"(a) worst_err/tol={worst_ratio:.2e} (b) min_ddg_equal={min(equal_min, report.equal_constant_min_ddg):.3e} "
                     f"(c) ddg={ddg:.5f} t_neg={t_neg} t={elapsed:.2f}s")
    assert part_a and part_b and part_c
    assert elapsed < 30


def test_c6_relative_entropy_core(record_criterion):
    start = time.perf_counter()
    self_max = 0.0
    add_err = 0.0
    for k in range(200):
        rng = counter_rng(606, k)
        rho, sigma = random_density_matrix(2, rng), random_density_matrix(2, rng)
        self_max = max(self_max, abs(relative_entropy(rho, rho)))
        s2 = relative_entropy(tensor_power(rho, 2), tensor_power(sigma, 2))
        add_err = max(add_err, abs(s2 - 2 * relative_entropy(rho, sigma)))
    ln2_err = abs(relative_entropy(ZERO, MIXED2) - math.log(2))
    support = relative_entropy(PLUS, ZERO)
    elapsed = time.perf_counter() - start
    ok = self_max <= 1e-10 and ln2_err <= 1e-10 and support == math.inf and add_err <= 1e-8 and elapsed < 5
    record_criterion("C6 relative-entropy core", ok,
                     f"max S(rho||rho)={self_max:.1e} |S(0||I/2)-ln2|={ln2_err:.1e} support={support} "
                     f"tensor_err={add_err:.1e} t={elapsed:.2f}s")
    assert ok


def test_c7_estimation_pipeline(record_criterion):
    start = time.perf_counter()
    prior = PriorSpec.discrete([(ZERO, 0.5), (PLUS, 0.5)])
    post = posterior_update(discrete_ensemble(prior), MeasurementRecord(ZERO.matrix[None], dim=2), resample=False)
    w_err = float(np.max(np.abs(post.weights - [2 / 3, 1 / 3])))
    m_err = float(np.max(np.abs(posterior_mean(post).matrix - np.array([[5, 1], [1, 1]]) / 6)))
    mle = mle_estimate(MeasurementRecord(np.array([ZERO.matrix, np.diag([0.0, 1.0])]), dim=2))
    mle_err = trace_distance(mle.state, MIXED2)
    # N = 0 under the HS prior: the Bayes estimate is the prior particle mean; with truth I/2 the
    # trace-distance column is the distance of that estimate from I/2.  Bloch components of HS
    # qubits have variance 1/5, so 5 standard errors of |mean Bloch vector| / 2 bound it.
    particles = 10_000
    t0 = estimator_risk(PriorSpec.hilbert_schmidt(2), 1, 0, Povm.pauli6(), ["bayes-mean"], seed=7,
                        particles=particles, truths=[MIXED2])
    n0_dist = t0.rows[0][4]
    n0_tol = 5 * math.sqrt(3 * 0.2 / particles) / 2
    rng = counter_rng(707)
    truths = [depolarize(random_pure_state(2, rng), 0.02) for _ in range(100)]
    table = estimator_risk(PriorSpec.hilbert_schmidt(2), 0, [10], Povm.pauli6(), ["mle", "bayes-mean"],
                           seed=7, particles=particles, truths=truths)
    summ = {s["estimator"]: s for s in table.summary()}
    rank_freq = summ["mle"]["rank_deficient_frequency"]
    elapsed = time.perf_counter() - start
    ok = (w_err <= 1e-12 and m_err <= 1e-12 and mle_err <= 1e-6 and n0_dist <= n0_tol
          and rank_freq > 0 and elapsed < 120)
    record_criterion("C7 estimation pipeline", ok,
                     f"weights_err={w_err:.1e} mean_err={m_err:.1e} mle_td={mle_err:.1e} "
                     f"N0_bayes_td={n0_dist:.4f}<= {n0_tol:.4f} mle_rank_deficient@N10={rank_freq:.2f} "
                     f"mle_inf_risk@N10={summ['mle']['infinite_risk_frequency']:.2f} t={elapsed:.2f}s")
    assert ok
