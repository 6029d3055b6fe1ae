"""Why the per-outcome reward constants must all be equal.

Take a reward ``ln s_i + C_i`` with outcome-dependent offsets and rotate
the honest report along ``sigma(t) = U(t) rho U(t)^dag`` with
``U(t) = exp(iXt)``.  The propriety gap along the curve is

    g(t) = S(rho || sigma(t)) + sum_i C_i (r_i - <e_i|U^dag rho U|e_i>)

with ``g(0) = g'(0) = 0`` and ``g''(0) = 2 Tr([X, rho](ln rho + B) X)``,
``B = sum_i C_i |e_i><e_i|``.  Unequal constants admit curves with
``g''(0) < 0``, i.e. a lie that pays better than the truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .core import (
    HERMITIAN_TOL,
    PSD_TOL,
    SUPPORT_WEIGHT_TOL,
    DensityMatrix,
    counter_rng,
    matrix_to_dict,
    random_unitary,
)
from .errors import InvalidInputError, InvalidStateError

FULL_RANK_TOL = 1e-12


@dataclass(frozen=True)
class PerturbationCurve:
    """A state ``rho = sum_i r_i |e_i><e_i|`` rotated by the Hermitian ``generator``.

    ``eigenbasis`` holds the ``|e_i>`` as columns (identity means rho is
    diagonal); ``constants[i]`` is the offset paired with ``|e_i>``.
    """

    eigenvalues: np.ndarray
    generator: np.ndarray
    constants: np.ndarray
    eigenbasis: np.ndarray | None = None

    def __post_init__(self):
        r = np.asarray(self.eigenvalues, dtype=float)
        d = r.size
        x = np.asarray(self.generator, dtype=complex)
        c = np.asarray(self.constants, dtype=float)
        v = np.eye(d, dtype=complex) if self.eigenbasis is None else np.asarray(self.eigenbasis, dtype=complex)
        if x.shape != (d, d) or c.shape != (d,) or v.shape != (d, d):
            raise InvalidInputError("eigenvalues, generator, constants and eigenbasis disagree in dimension")
        herm = float(np.max(np.abs(x - x.conj().T)))
        if herm > HERMITIAN_TOL:
            raise InvalidStateError("hermitian", herm, f"generator is not Hermitian (residual {herm:.3g})")
        if np.any(r < -PSD_TOL) or abs(r.sum() - 1.0) > 1e-10:
            raise InvalidStateError("spectrum", abs(r.sum() - 1.0), "eigenvalues must be non-negative and sum to 1")
        unit = float(np.max(np.abs(v.conj().T @ v - np.eye(d))))
        if unit > 1e-10:
            raise InvalidStateError("orthonormal", unit, "eigenbasis is not unitary")
        for name, val in (("eigenvalues", np.clip(r, 0, None)), ("generator", 0.5 * (x + x.conj().T)),
                          ("constants", c), ("eigenbasis", v)):
            val = np.array(val)
            val.flags.writeable = False
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def rho(self) -> DensityMatrix:
        v = self.eigenbasis
        return DensityMatrix((v * self.eigenvalues) @ v.conj().T)

    @property
    def full_rank(self) -> bool:
        return bool(np.min(self.eigenvalues) > FULL_RANK_TOL)

    def b_operator(self) -> np.ndarray:
        v = self.eigenbasis
        return (v * self.constants) @ v.conj().T

    def to_dict(self) -> dict:
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "constants": self.constants.tolist(),
            "generator": matrix_to_dict(self.generator),
            "eigenbasis": matrix_to_dict(self.eigenbasis),
        }


def unitary_at(curve: PerturbationCurve, t: float) -> np.ndarray:
    return expm(1j * t * curve.generator)


def sigma_at(curve: PerturbationCurve, t: float) -> DensityMatrix:
    u = unitary_at(curve, t)
    m = u @ curve.rho.matrix @ u.conj().T
    return DensityMatrix(0.5 * (m + m.conj().T))


def g_function(curve: PerturbationCurve, t: float) -> float:
    """Propriety gap of the rotated report under offsets ``constants``; +inf on support loss.

    Evaluated in the eigenframe of rho through the transition matrix
    ``M[j, k] = |<e_j|U(t)|e_k>|^2``: sigma(t) has eigenvalues r_k on
    ``U|e_k>``, so ``S(rho||sigma) = sum_j r_j ln r_j - r^T M ln r`` and the
    rotated outcome probabilities are ``M^T r``.  At t = 0, M = I and g is 0
    exactly.
    """
    r = curve.eigenvalues
    v = curve.eigenbasis
    u = expm(1j * t * (v.conj().T @ curve.generator @ v))
    m = np.abs(u) ** 2
    pos = r > 0
    if np.any((r[:, None] * m)[:, ~pos] > SUPPORT_WEIGHT_TOL):
        return math.inf
    log_r = np.zeros_like(r)
    log_r[pos] = np.log(r[pos])
    kl = float(r @ log_r - r @ (m[:, pos] @ log_r[pos]))
    p = m.T @ r
    return max(kl, 0.0) + float(np.dot(curve.constants, r - p))


def _log_rho(curve):
    if not curve.full_rank:
        raise InvalidInputError("analytic second derivative needs a full-rank rho (ln rho is undefined otherwise)")
    v = curve.eigenbasis
    return (v * np.log(curve.eigenvalues)) @ v.conj().T


def second_derivative_analytic(curve: PerturbationCurve) -> float:
    """2 Tr([X, rho](ln rho + B) X)."""
    rho = curve.rho.matrix
    x = curve.generator
    comm = x @ rho - rho @ x
    return float(2.0 * np.real(np.trace(comm @ (_log_rho(curve) + curve.b_operator()) @ x)))


def second_derivative_numeric(curve: PerturbationCurve, h: float = 1e-3) -> float:
    if not 1e-5 <= h <= 1e-2:
        raise InvalidInputError(f"finite-difference step must be in [1e-5, 1e-2], got {h}")
    return (g_function(curve, h) - 2.0 * g_function(curve, 0.0) + g_function(curve, -h)) / h**2


def first_derivative_numeric(curve: PerturbationCurve, h: float = 1e-3) -> float:
    return (g_function(curve, h) - g_function(curve, -h)) / (2.0 * h)


def _block_pauli_x(dim, i, j):
    x = np.zeros((dim, dim), dtype=complex)
    x[i, j] = x[j, i] = 1.0
    return x


def construct_counterexample(c1: float, c2: float, c3: float = 0.0) -> PerturbationCurve:
    """Three-level witness that offsets ``c1 != c2`` break propriety.

    ``r_j = exp(-(c_j + 2 ln 2)/2)`` for j = 1, 2 and ``r_3 = 1 - r_1 - r_2``,
    rotated by Pauli-X on the span of the first two eigenvectors.
    """
    if c1 == c2:
        raise InvalidInputError("the construction needs c1 != c2")
    r1 = math.exp(-(c1 + 2 * math.log(2)) / 2)
    r2 = math.exp(-(c2 + 2 * math.log(2)) / 2)
    r3 = 1.0 - r1 - r2
    if not (0 < r1 <= 0.5 and 0 < r2 <= 0.5 and 0 <= r3 < 1):
        raise InvalidInputError(f"(c1, c2) = ({c1}, {c2}) gives r = ({r1:.4g}, {r2:.4g}, {r3:.4g}), not a valid spectrum; "
                                "both constants must be >= 0")
    return PerturbationCurve(np.array([r1, r2, r3]), _block_pauli_x(3, 0, 1), np.array([c1, c2, c3]))


def scan_negative_g(curve: PerturbationCurve, t_max: float = 0.1, points: int = 200):
    """Smallest scanned t in (0, t_max] with g(t) < 0, or None."""
    for t in np.linspace(t_max / points, t_max, points):
        if g_function(curve, float(t)) < 0:
            return float(t)
    return None


def random_curve(dim: int, rng: np.random.Generator, constants=None, min_eigenvalue: float = 0.02) -> PerturbationCurve:
    """Random full-rank curve: Dirichlet spectrum mixed toward I/d, Haar eigenbasis, GUE generator.

    The spectrum floor ``min_eigenvalue`` keeps ln rho moderate so the
    default finite-difference step stays accurate.
    """
    floor = min_eigenvalue * dim
    if not 0 <= floor < 1:
        raise InvalidInputError("min_eigenvalue * dim must lie in [0, 1)")
    r = (1 - floor) * rng.dirichlet(np.ones(dim)) + min_eigenvalue
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    x = 0.5 * (a + a.conj().T)
    x /= np.linalg.norm(x)
    c = np.zeros(dim) if constants is None else np.asarray(constants, dtype=float)
    return PerturbationCurve(r, x, c, random_unitary(dim, rng))


@dataclass
class VerificationReport:
    dim: int
    trials: int
    seed: int
    equal_constant_violations: int = 0
    equal_constant_min_ddg: float = math.inf
    unequal_trials: int = 0
    unequal_violations_found: int = 0
    witnesses: list = field(default_factory=list)
    equal_witnesses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.equal_constant_violations == 0 and self.unequal_violations_found == self.unequal_trials

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "equal_constants": {"violations": self.equal_constant_violations,
                                "min_second_derivative": self.equal_constant_min_ddg,
                                "violating_curves": self.equal_witnesses},
            "unequal_constants": {"trials": self.unequal_trials,
                                  "violations_found": self.unequal_violations_found,
                                  "witnesses": self.witnesses},
        }

    def text(self) -> str:
        lines = [
            f"appendix verification: dim={self.dim} trials={self.trials} seed={self.seed}",
            f"  equal constants: {self.equal_constant_violations} curves with g''(0) < -1e-10 "
            f"(min g''(0) = {self.equal_constant_min_ddg:.3e})",
            f"  unequal constants: propriety violation found in {self.unequal_violations_found}/{self.unequal_trials} trials",
            f"  result: {'PASS' if self.passed else 'FAIL'}",
        ]
        return "\n".join(lines)


def find_violation(constants, rng=None, search: int = 200):
    """Curve with g''(0) < 0 for unequal ``constants``, or None.

    Uses the canonical construction on the first unequal pair (offsets
    shifted so the pair's minimum is 0, which leaves the gap unchanged),
    then falls back to random generators on that 2-d block.
    """
    c = np.asarray(constants, dtype=float)
    dim = c.size
    if dim < 3:
        raise InvalidInputError(f"need at least 3 offsets, got {dim}")
    rng = counter_rng(0) if rng is None else rng
    pairs = [(i, j) for i in range(dim) for j in range(i + 1, dim) if c[i] != c[j]]
    if not pairs:
        return None
    i, j = pairs[0]
    shift = min(c[i], c[j])
    ri = math.exp(-((c[i] - shift) + 2 * math.log(2)) / 2)
    rj = math.exp(-((c[j] - shift) + 2 * math.log(2)) / 2)
    rest = (1.0 - ri - rj) / (dim - 2)
    r = np.full(dim, rest)
    r[i], r[j] = ri, rj
    curve = PerturbationCurve(r, _block_pauli_x(dim, i, j), c)
    if second_derivative_analytic(curve) < 0:
        return curve
    for _ in range(search):
        a = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        x = np.zeros((dim, dim), dtype=complex)
        x[np.ix_([i, j], [i, j])] = 0.5 * (a + a.conj().T)
        curve = PerturbationCurve(r, x, c)
        if second_derivative_analytic(curve) < 0:
            return curve
    return None


def verify_ci_equality(dim: int, trials: int, seed: int = 0, max_witnesses: int = 5) -> VerificationReport:
    """Check both directions numerically.

    Equal offsets: ``g''(0) >= -1e-10`` on ``trials`` random full-rank curves.
    Unequal offsets: ``trials`` random offset vectors, each needing a curve
    with ``g''(0) < 0``.
    """
    if dim < 3:
        raise InvalidInputError(f"dim must be >= 3 (the offset-equality argument needs at least 3 outcomes), got {dim}")
    if trials < 1:
        raise InvalidInputError("trials must be >= 1")
    report = VerificationReport(dim, trials, seed)
    for k in range(trials):
        rng = counter_rng(seed, 0, k)
        common = rng.normal()
        curve = random_curve(dim, rng, np.full(dim, common))
        ddg = second_derivative_analytic(curve)
        report.equal_constant_min_ddg = min(report.equal_constant_min_ddg, ddg)
        if ddg < -1e-10:
            report.equal_constant_violations += 1
            if len(report.equal_witnesses) < max_witnesses:
                report.equal_witnesses.append({"second_derivative": ddg, "curve": curve.to_dict()})

        rng = counter_rng(seed, 1, k)
        consts = rng.exponential(1.0, dim)
        report.unequal_trials += 1
        witness = find_violation(consts, rng)
        if witness is not None:
            report.unequal_violations_found += 1
            if len(report.witnesses) < max_witnesses:
                report.witnesses.append({"second_derivative": second_derivative_analytic(witness),
                                         "negative_g_at": scan_negative_g(witness),
                                         "curve": witness.to_dict()})
    return report
