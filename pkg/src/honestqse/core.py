"""Dense quantum-information primitives.

States, bases and POVMs are immutable values checked on construction.
Every quantity is reported in nats.  The extended real +/-infinity is the
IEEE float ``math.inf`` and is never replaced by a large finite sentinel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.stats import unitary_group

from .errors import (
    DimensionMismatchError,
    InvalidInputError,
    InvalidStateError,
    NumericalError,
    ResourceError,
)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
ORTHONORMAL_TOL = 1e-10
# report eigenvalues below SUPPORT_TOL are treated as outside the support;
# a truth weight above SUPPORT_WEIGHT_TOL on them makes S(truth||report) infinite
SUPPORT_TOL = 1e-12
SUPPORT_WEIGHT_TOL = 1e-10
TENSOR_DIM_CAP = 256


def _readonly(a):
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


def _eigh(m):
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hermitian eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("Hermitian eigensolver returned non-finite eigenvalues")
    return w, v


def _square(m, what):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InvalidInputError(f"{what} must be a non-empty square matrix, got shape {m.shape}")
    return m


def _check_hermitian_psd(m, what):
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > HERMITIAN_TOL:
        raise InvalidStateError("hermitian", herm, f"{what} is not Hermitian (max |A - A^dag| = {herm:.3g})")
    m = 0.5 * (m + m.conj().T)
    lam_min = float(_eigh(m)[0][0])
    if lam_min < -PSD_TOL:
        raise InvalidStateError("psd", -lam_min, f"{what} is not positive semidefinite (min eigenvalue {lam_min:.3g})")
    return m


class DensityMatrix:
    """Hermitian, positive semidefinite, unit-trace complex matrix."""

    __slots__ = ("_m",)

    def __init__(self, entries, *, check: bool = True):
        m = _square(entries, "density matrix")
        if check:
            m = _check_hermitian_psd(m, "density matrix")
            tr = complex(np.trace(m))
            resid = abs(tr - 1.0)
            if resid > TRACE_TOL:
                raise InvalidStateError("trace", resid, f"density matrix trace is {tr.real:.12g} (residual {resid:.3g})")
        self._m = _readonly(m)

    @property
    def matrix(self) -> np.ndarray:
        return self._m

    @property
    def dim(self) -> int:
        return self._m.shape[0]

    @classmethod
    def pure(cls, vector) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex).ravel()
        norm = np.linalg.norm(v)
        if norm == 0:
            raise InvalidInputError("cannot build a pure state from the zero vector")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        if dim < 1:
            raise InvalidInputError(f"dimension must be positive, got {dim}")
        return cls(np.eye(dim) / dim)

    @classmethod
    def basis_state(cls, index: int, dim: int = 2) -> "DensityMatrix":
        v = np.zeros(dim)
        v[index] = 1.0
        return cls.pure(v)

    def isclose(self, other: "DensityMatrix", atol: float = 1e-9) -> bool:
        """Frobenius-norm comparison."""
        if other.dim != self.dim:
            return False
        return float(np.linalg.norm(self._m - other._m)) <= atol

    def to_dict(self) -> dict:
        flat = self._m.ravel()
        return {"dim": self.dim, "entries": [[float(z.real), float(z.imag)] for z in flat]}

    @classmethod
    def from_dict(cls, data: dict) -> "DensityMatrix":
        return cls(matrix_from_dict(data))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls.from_dict(json.loads(text))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim}, entries={np.array2string(self._m, precision=6)})"


def matrix_from_dict(data: dict) -> np.ndarray:
    """Decode ``{"dim": d, "entries": [[re, im], ...]}`` (row-major)."""
    try:
        dim = int(data["dim"])
        pairs = data["entries"]
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"matrix JSON needs 'dim' and 'entries': {exc}") from exc
    if len(pairs) != dim * dim:
        raise InvalidInputError(f"matrix JSON has {len(pairs)} entries, expected {dim * dim}")
    arr = np.array([complex(re, im) for re, im in pairs], dtype=complex)
    return arr.reshape(dim, dim)


def matrix_to_dict(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0], "entries": [[float(z.real), float(z.imag)] for z in m.ravel()]}


class MeasurementBasis:
    """Orthonormal basis ``{|f_i>}`` stored as the columns of a unitary."""

    __slots__ = ("_v",)

    def __init__(self, vectors, *, check: bool = True):
        v = _square(vectors, "basis matrix")
        if check:
            gram = v.conj().T @ v
            resid = float(np.max(np.abs(gram - np.eye(v.shape[0]))))
            if resid > ORTHONORMAL_TOL:
                raise InvalidStateError("orthonormal", resid, f"basis vectors are not orthonormal (residual {resid:.3g})")
        self._v = _readonly(v)

    @property
    def vectors(self) -> np.ndarray:
        """Columns are the basis vectors."""
        return self._v

    @property
    def dim(self) -> int:
        return self._v.shape[0]

    @classmethod
    def computational(cls, dim: int) -> "MeasurementBasis":
        return cls(np.eye(dim))

    def projectors(self) -> np.ndarray:
        v = self._v
        return np.einsum("ai,bi->iab", v, v.conj())


class Povm:
    """Positive operator-valued measure given by its effects."""

    __slots__ = ("_e",)

    def __init__(self, effects, *, check: bool = True):
        e = np.asarray(effects, dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2] or e.shape[0] < 1:
            raise InvalidInputError(f"POVM effects must have shape (k, d, d), got {e.shape}")
        if check:
            e = np.stack([_check_hermitian_psd(x, f"POVM effect {k}") for k, x in enumerate(e)])
            resid = float(np.max(np.abs(e.sum(axis=0) - np.eye(e.shape[1]))))
            if resid > ORTHONORMAL_TOL:
                raise InvalidStateError("completeness", resid, f"POVM effects do not sum to the identity (residual {resid:.3g})")
        self._e = _readonly(e)

    @property
    def effects(self) -> np.ndarray:
        return self._e

    @property
    def dim(self) -> int:
        return self._e.shape[1]

    def __len__(self):
        return self._e.shape[0]

    @classmethod
    def from_basis(cls, basis: MeasurementBasis) -> "Povm":
        return cls(basis.projectors())

    @classmethod
    def pauli6(cls) -> "Povm":
        """Qubit POVM: one of X, Y, Z chosen uniformly, then measured projectively."""
        return cls(np.concatenate([_pauli_projectors(p) for p in PAULIS]) / 3.0)

    @classmethod
    def qubit_sic(cls) -> "Povm":
        """Tetrahedral symmetric informationally complete qubit POVM."""
        s = 1.0 / math.sqrt(3.0)
        dirs = np.array([[s, s, s], [s, -s, -s], [-s, s, -s], [-s, -s, s]])
        return cls(np.stack([(np.eye(2) + _bloch_op(n)) / 4.0 for n in dirs]))


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def _bloch_op(n):
    return n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z


def _pauli_projectors(p):
    return np.stack([(np.eye(2) + p) / 2.0, (np.eye(2) - p) / 2.0])


def bloch_state(vector) -> DensityMatrix:
    """Qubit state ``(I + r.sigma)/2`` for a Bloch vector with |r| <= 1."""
    r = np.asarray(vector, dtype=float)
    return DensityMatrix((np.eye(2) + _bloch_op(r)) / 2.0)


@dataclass(frozen=True)
class OutcomeDistribution:
    """Probabilities over measurement outcomes; entries clamped into [0, 1]."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).ravel()
        if p.size == 0:
            raise InvalidInputError("outcome distribution is empty")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12) or not np.all(np.isfinite(p)):
            raise InvalidStateError("probability-range", float(max(-p.min(), p.max() - 1, 0.0)),
                                    "outcome probabilities must lie in [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        resid = abs(float(p.sum()) - 1.0)
        if resid > 1e-10:
            raise InvalidStateError("normalization", resid, f"outcome probabilities sum to {p.sum():.12g}")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size


def _same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch: {a.dim} vs {b.dim}")


def eigendecompose(state: DensityMatrix):
    """Eigenvalues in descending order (clamped to >= 0) and the eigenbasis.

    Within a degenerate eigenspace the choice of vectors is whatever the
    LAPACK solver returns; nothing downstream depends on it.
    """
    w, v = _eigh(state.matrix)
    w = w[::-1].copy()
    v = v[:, ::-1]
    w[w < 0] = 0.0
    return w, MeasurementBasis(v, check=False)


def _entropy_of(lam):
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def von_neumann_entropy(state: DensityMatrix) -> float:
    """H(rho) = -sum lambda ln lambda, with 0 ln 0 = 0."""
    lam, _ = eigendecompose(state)
    return min(max(_entropy_of(lam), 0.0), math.log(state.dim))


def _tr_rho_log_sigma(truth: DensityMatrix, report: DensityMatrix) -> float:
    """Tr(rho ln sigma) evaluated in sigma's eigenbasis; -inf on support violation."""
    s, basis = eigendecompose(report)
    p = born_probabilities(truth, basis).probs
    outside = s < SUPPORT_TOL
    if np.any(p[outside] > SUPPORT_WEIGHT_TOL):
        return -math.inf
    inside = ~outside
    return float(np.sum(p[inside] * np.log(s[inside])))


def relative_entropy(truth: DensityMatrix, report: DensityMatrix) -> float:
    """Quantum relative entropy S(truth || report) in nats.

    Returns ``math.inf`` when the support of ``truth`` is not contained in
    the support of ``report``.
    """
    _same_dim(truth, report)
    cross = _tr_rho_log_sigma(truth, report)
    if cross == -math.inf:
        return math.inf
    lam, _ = eigendecompose(truth)
    value = -_entropy_of(lam) - cross
    # rounding can push S(rho||rho) a few ulps below zero
    return max(value, 0.0)


def born_probabilities(state: DensityMatrix, measurement: Union[MeasurementBasis, Povm]) -> OutcomeDistribution:
    """Outcome probabilities ``Tr(E_i rho)`` (``<f_i|rho|f_i>`` for a basis)."""
    _same_dim(state, measurement)
    if isinstance(measurement, MeasurementBasis):
        v = measurement.vectors
        p = np.real(np.einsum("ai,ab,bi->i", v.conj(), state.matrix, v))
    else:
        p = np.real(np.einsum("kab,ba->k", measurement.effects, state.matrix))
    p = np.clip(p, 0.0, 1.0)
    return OutcomeDistribution(p)


def dephase(state: DensityMatrix, basis: MeasurementBasis) -> DensityMatrix:
    """Delete the off-diagonal elements of ``state`` in ``basis``."""
    p = born_probabilities(state, basis).probs
    v = basis.vectors
    m = (v * p) @ v.conj().T
    return DensityMatrix(m)


def majorizes(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` majorizes ``b`` (prefix sums of the sorted vectors)."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise DimensionMismatchError(f"length mismatch: {a.size} vs {b.size}")
    for name, x in (("first", a), ("second", b)):
        if abs(x.sum() - 1.0) > 1e-9:
            raise InvalidInputError(f"{name} vector sums to {x.sum():.12g}, expected 1")
    ca = np.cumsum(np.sort(a)[::-1])
    cb = np.cumsum(np.sort(b)[::-1])
    return bool(np.all(ca >= cb - 1e-10))


def _psd_sqrt(m):
    w, v = _eigh(m)
    # eigenvalues at the rounding floor would otherwise contribute ~1e-8 after the sqrt
    w = np.sqrt(np.where(w < 1e-14, 0.0, w))
    return (v * w) @ v.conj().T


def fidelity(a: DensityMatrix, b: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr|sqrt(a) sqrt(b)|)^2, which is <psi|a|psi> for pure b."""
    _same_dim(a, b)
    sv = np.linalg.svd(_psd_sqrt(a.matrix) @ _psd_sqrt(b.matrix), compute_uv=False)
    return float(min(max(np.sum(sv) ** 2, 0.0), 1.0))


def trace_distance(a: DensityMatrix, b: DensityMatrix) -> float:
    _same_dim(a, b)
    w = np.linalg.eigvalsh(a.matrix - b.matrix)
    return float(0.5 * np.sum(np.abs(w)))


def tensor_power(state: DensityMatrix, n: int, cap: int = TENSOR_DIM_CAP) -> DensityMatrix:
    if n < 1:
        raise InvalidInputError(f"tensor power must be >= 1, got {n}")
    if state.dim ** n > cap:
        raise ResourceError(f"dimension {state.dim}^{n} exceeds the tensor cap {cap}")
    m = state.matrix
    out = m
    for _ in range(n - 1):
        out = np.kron(out, m)
    return DensityMatrix(out)


# -- random sampling helpers -------------------------------------------------

def counter_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based (Philox) generator.

    With no ``stream`` indices the key is ``seed`` itself, so draw ``i``
    depends only on ``(seed, i)``.  Extra indices (trial, particle block, ...)
    select independent keyed streams, which keeps results identical no matter
    how work is split across workers.
    """
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise InvalidInputError(f"seed must be a 64-bit unsigned integer, got {seed}")
    if stream:
        key = np.random.SeedSequence([seed, *[int(s) for s in stream]]).generate_state(2, np.uint64)
        return np.random.Generator(np.random.Philox(key=key))
    return np.random.Generator(np.random.Philox(key=seed))


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Hilbert-Schmidt (Ginibre) random state; ``rank`` < dim gives induced measures."""
    k = dim if rank is None else rank
    g = rng.standard_normal((dim, k)) + 1j * rng.standard_normal((dim, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng) if dim > 1 else np.exp(2j * np.pi * rng.random()) * np.eye(1)


def random_basis(dim: int, rng: np.random.Generator) -> MeasurementBasis:
    return MeasurementBasis(random_unitary(dim, rng), check=False)


def random_pure_state(dim: int, rng: np.random.Generator) -> DensityMatrix:
    return DensityMatrix.pure(rng.standard_normal(dim) + 1j * rng.standard_normal(dim))


def depolarize(state: DensityMatrix, noise: float) -> DensityMatrix:
    """(1 - noise) rho + noise I/d."""
    if not 0.0 <= noise <= 1.0:
        raise InvalidInputError(f"depolarizing noise must be in [0, 1], got {noise}")
    d = state.dim
    return DensityMatrix((1.0 - noise) * state.matrix + noise * np.eye(d) / d)
