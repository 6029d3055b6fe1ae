"""Bayesian state estimation with a weighted particle ensemble.

The posterior after a measurement record is prior weight times the Born
likelihood ``prod_k Tr(E_k rho)``, renormalized; the reported estimate is
the posterior mean.  Weights are handled in the log domain.  A plain
RrhoR maximum-likelihood estimator is provided as the baseline.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import unitary_group

from . import kernels
from .core import (
    HERMITIAN_TOL,
    PSD_TOL,
    TRACE_TOL,
    DensityMatrix,
    Povm,
    born_probabilities,
    counter_rng,
    matrix_from_dict,
    matrix_to_dict,
    relative_entropy,
    trace_distance,
)
from .errors import (
    DegeneratePosteriorError,
    DimensionMismatchError,
    InvalidInputError,
    InvalidStateError,
)


class PriorKind(str, enum.Enum):
    HILBERT_SCHMIDT = "hilbert-schmidt"
    BURES_LIKE = "bures-like"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class PriorSpec:
    """Prior over density matrices.

    ``ensemble`` is only used for the discrete kind and holds
    ``(DensityMatrix, probability)`` pairs.
    """

    kind: PriorKind
    dim: int
    ensemble: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind(self.kind))
        if self.dim < 1:
            raise InvalidInputError(f"prior dimension must be positive, got {self.dim}")
        if self.kind is PriorKind.DISCRETE:
            if not self.ensemble:
                raise InvalidInputError("a discrete prior needs a non-empty ensemble")
            probs = np.array([p for _, p in self.ensemble], dtype=float)
            if np.any(probs < 0):
                raise InvalidInputError("ensemble probabilities must be non-negative")
            if abs(probs.sum() - 1.0) > 1e-10:
                raise InvalidStateError("normalization", abs(probs.sum() - 1.0),
                                        f"ensemble probabilities sum to {probs.sum():.12g}")
            for state, _ in self.ensemble:
                if state.dim != self.dim:
                    raise DimensionMismatchError(f"ensemble state has dim {state.dim}, prior dim is {self.dim}")
            object.__setattr__(self, "ensemble", tuple((s, float(p)) for s, p in self.ensemble))

    @classmethod
    def hilbert_schmidt(cls, dim: int) -> "PriorSpec":
        return cls(PriorKind.HILBERT_SCHMIDT, dim)

    @classmethod
    def bures_like(cls, dim: int) -> "PriorSpec":
        return cls(PriorKind.BURES_LIKE, dim)

    @classmethod
    def discrete(cls, pairs: Iterable) -> "PriorSpec":
        pairs = tuple(pairs)
        return cls(PriorKind.DISCRETE, pairs[0][0].dim, pairs)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "dim": self.dim}
        if self.kind is PriorKind.DISCRETE:
            out["ensemble"] = [{"state": s.to_dict(), "probability": p} for s, p in self.ensemble]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "PriorSpec":
        unknown = set(data) - {"kind", "dim", "ensemble"}
        if unknown:
            raise InvalidInputError(f"unknown prior key: {sorted(unknown)[0]}")
        kind = PriorKind(data["kind"])
        if kind is PriorKind.DISCRETE:
            pairs = tuple((DensityMatrix.from_dict(e["state"]), float(e["probability"])) for e in data["ensemble"])
            return cls(kind, int(data.get("dim", pairs[0][0].dim)), pairs)
        return cls(kind, int(data["dim"]))


class MeasurementRecord:
    """Ordered list of observed POVM effects, one per measured copy."""

    __slots__ = ("_e",)

    def __init__(self, effects, dim: int | None = None, *, check: bool = True):
        e = np.asarray(effects, dtype=complex)
        if e.size == 0:
            if dim is None:
                raise InvalidInputError("an empty record needs an explicit dim")
            e = np.zeros((0, dim, dim), dtype=complex)
        if e.ndim != 3 or e.shape[1] != e.shape[2]:
            raise InvalidInputError(f"record effects must have shape (n, d, d), got {e.shape}")
        if dim is not None and e.shape[1] != dim:
            raise DimensionMismatchError(f"record effects have dim {e.shape[1]}, expected {dim}")
        if check and e.shape[0]:
            herm = float(np.max(np.abs(e - np.conj(np.swapaxes(e, 1, 2)))))
            if herm > HERMITIAN_TOL:
                raise InvalidStateError("hermitian", herm, "record effect is not Hermitian")
            lam = float(np.min(np.linalg.eigvalsh(e)))
            if lam < -PSD_TOL:
                raise InvalidStateError("psd", -lam, "record effect is not positive semidefinite")
        e = np.array(e)
        e.flags.writeable = False
        self._e = e

    @classmethod
    def from_outcomes(cls, povm: Povm, outcomes: Sequence[int]) -> "MeasurementRecord":
        idx = np.asarray(outcomes, dtype=np.int64)
        return cls(povm.effects[idx], dim=povm.dim, check=False)

    @property
    def effects(self) -> np.ndarray:
        return self._e

    @property
    def dim(self) -> int:
        return self._e.shape[1]

    def __len__(self):
        return self._e.shape[0]

    def __getitem__(self, item) -> "MeasurementRecord":
        if isinstance(item, slice):
            return MeasurementRecord(self._e[item], dim=self.dim, check=False)
        raise TypeError("records support slicing only")

    def compressed(self):
        """Distinct effects and their multiplicities (order-independent)."""
        n, d = self._e.shape[0], self.dim
        if n == 0:
            return np.zeros((0, d, d), dtype=complex), np.zeros(0)
        flat = np.ascontiguousarray(self._e.reshape(n, -1)).view(np.float64)
        uniq, inverse, counts = np.unique(flat, axis=0, return_inverse=True, return_counts=True)
        effects = uniq.view(complex).reshape(-1, d, d)
        return effects, counts.astype(float)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "effects": [matrix_to_dict(e) for e in self._e]}

    @classmethod
    def from_dict(cls, data: dict) -> "MeasurementRecord":
        unknown = set(data) - {"dim", "effects"}
        if unknown:
            raise InvalidInputError(f"unknown record key: {sorted(unknown)[0]}")
        dim = int(data["dim"])
        effects = [matrix_from_dict(e) for e in data["effects"]]
        return cls(np.array(effects) if effects else [], dim=dim)


def simulate_record(truth: DensityMatrix, povm: Povm, copies: int, rng: np.random.Generator) -> tuple:
    """Measure ``copies`` copies of ``truth``; returns (record, outcome indices)."""
    p = born_probabilities(truth, povm).probs
    outcomes = kernels.sample_outcomes(p, rng.random(copies)) if copies else np.zeros(0, dtype=np.int64)
    return MeasurementRecord.from_outcomes(povm, outcomes), outcomes


class ParticleEnsemble:
    """Weighted particles approximating a distribution over density matrices."""

    __slots__ = ("_p", "_w", "log_evidence")

    def __init__(self, particles, weights=None, log_evidence: float = 0.0, *, check: bool = True):
        p = np.asarray(particles, dtype=complex)
        if p.ndim != 3 or p.shape[1] != p.shape[2] or p.shape[0] < 1:
            raise InvalidInputError(f"particles must have shape (n, d, d), got {p.shape}")
        n = p.shape[0]
        w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float).copy()
        if w.shape != (n,):
            raise DimensionMismatchError(f"{w.size} weights for {n} particles")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise InvalidStateError("weights", abs(w.sum() - 1.0), "particle weights must be non-negative and sum to 1")
        if check:
            _check_stack(p)
        p = np.array(p)
        p.flags.writeable = False
        w.flags.writeable = False
        self._p, self._w = p, w
        self.log_evidence = float(log_evidence)

    @property
    def particles(self) -> np.ndarray:
        return self._p

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def dim(self) -> int:
        return self._p.shape[1]

    def __len__(self):
        return self._p.shape[0]

    @property
    def effective_sample_size(self) -> float:
        return float(1.0 / np.sum(self._w ** 2))

    def particle(self, i: int) -> DensityMatrix:
        return DensityMatrix(self._p[i])


def _check_stack(p):
    herm = float(np.max(np.abs(p - np.conj(np.swapaxes(p, 1, 2)))))
    if herm > HERMITIAN_TOL:
        raise InvalidStateError("hermitian", herm, "particle is not Hermitian")
    tr = float(np.max(np.abs(np.trace(p, axis1=1, axis2=2) - 1.0)))
    if tr > TRACE_TOL:
        raise InvalidStateError("trace", tr, "particle trace differs from 1")
    lam = float(np.min(np.linalg.eigvalsh(p)))
    if lam < -PSD_TOL:
        raise InvalidStateError("psd", -lam, "particle is not positive semidefinite")


def _normalize_stack(m):
    m = 0.5 * (m + np.conj(np.swapaxes(m, 1, 2)))
    tr = np.real(np.trace(m, axis1=1, axis2=2))
    return m / tr[:, None, None]


def sample_prior(spec: PriorSpec, count: int, seed: int = 0) -> ParticleEnsemble:
    """Draw ``count`` equally weighted particles from the prior."""
    if count < 1:
        raise InvalidInputError(f"particle count must be >= 1, got {count}")
    rng = counter_rng(seed)
    d = spec.dim
    if spec.kind is PriorKind.DISCRETE:
        probs = np.array([p for _, p in spec.ensemble])
        idx = kernels.sample_outcomes(probs, rng.random(count))
        mats = np.array([s.matrix for s, _ in spec.ensemble])[idx]
        return ParticleEnsemble(mats, check=False)
    g = rng.standard_normal((count, d, d)) + 1j * rng.standard_normal((count, d, d))
    if spec.kind is PriorKind.BURES_LIKE:
        u = unitary_group.rvs(d, size=count, random_state=rng) if d > 1 else np.exp(2j * np.pi * rng.random((count, 1, 1)))
        u = u.reshape(count, d, d)
        g = (np.eye(d) + u) @ g
    m = g @ np.conj(np.swapaxes(g, 1, 2))
    return ParticleEnsemble(_normalize_stack(m))


def discrete_ensemble(spec: PriorSpec) -> ParticleEnsemble:
    """Exact particle representation of a discrete prior (one particle per member)."""
    if spec.kind is not PriorKind.DISCRETE:
        raise InvalidInputError("discrete_ensemble needs a discrete prior")
    mats = np.array([s.matrix for s, _ in spec.ensemble])
    return ParticleEnsemble(mats, [p for _, p in spec.ensemble], check=False)


def log_likelihood(state: DensityMatrix, record: MeasurementRecord) -> float:
    """sum_k ln Tr(E_k rho); ``-inf`` if any factor is <= 1e-15."""
    if state.dim != record.dim:
        raise DimensionMismatchError(f"state dim {state.dim} vs record dim {record.dim}")
    if len(record) == 0:
        return 0.0
    effects, counts = record.compressed()
    return float(kernels.log_likelihoods(state.matrix[None], effects, counts)[0])


def posterior_update(prior: ParticleEnsemble, record: MeasurementRecord, *,
                     resample: bool = True, seed: int = 0) -> ParticleEnsemble:
    """Bayes + Born update of the particle weights.

    Systematic resampling runs when the effective sample size drops below
    half the particle count (disable with ``resample=False``).
    ``log_evidence`` accumulates ``ln sum_i w_i L_i``.
    """
    if prior.dim != record.dim:
        raise DimensionMismatchError(f"ensemble dim {prior.dim} vs record dim {record.dim}")
    if len(record) == 0:
        return prior
    effects, counts = record.compressed()
    ll = kernels.log_likelihoods(prior.particles, effects, counts)
    with np.errstate(divide="ignore"):
        logw = np.log(prior.weights) + ll
    top = float(np.max(logw))
    if top == -math.inf:
        raise DegeneratePosteriorError("the record has zero likelihood under every particle")
    shifted = np.exp(logw - top)
    total = float(shifted.sum())
    weights = shifted / total
    log_ev = prior.log_evidence + top + math.log(total)
    post = ParticleEnsemble(prior.particles, weights, log_ev, check=False)
    if resample and post.effective_sample_size < len(post) / 2:
        idx = kernels.systematic_resample(weights, counter_rng(seed).random())
        post = ParticleEnsemble(prior.particles[idx], None, log_ev, check=False)
    return post


def posterior_mean(ensemble: ParticleEnsemble) -> DensityMatrix:
    return DensityMatrix(np.einsum("n,nab->ab", ensemble.weights, ensemble.particles))


@dataclass(frozen=True)
class PosteriorSummary:
    mean: DensityMatrix
    log_evidence: float
    ess: float

    @classmethod
    def of(cls, ensemble: ParticleEnsemble) -> "PosteriorSummary":
        return cls(posterior_mean(ensemble), ensemble.log_evidence, ensemble.effective_sample_size)

    def to_dict(self) -> dict:
        return {"mean": self.mean.to_dict(), "log_evidence": self.log_evidence, "ess": self.ess}


@dataclass(frozen=True)
class MleResult:
    state: DensityMatrix
    converged: bool
    iterations: int
    log_likelihood: float


def mle_estimate(record: MeasurementRecord, dim: int | None = None, tolerance: float = 1e-8,
                 max_iters: int = 10_000) -> MleResult:
    """Maximum-likelihood state by the RrhoR fixed-point iteration from I/d.

    Stops once successive iterates are within ``tolerance`` in trace
    distance.  If ``max_iters`` is reached first the best iterate seen is
    returned with ``converged=False``.
    """
    if len(record) == 0:
        raise InvalidInputError("maximum likelihood needs a non-empty record")
    d = record.dim if dim is None else dim
    if d != record.dim:
        raise DimensionMismatchError(f"requested dim {d} vs record dim {record.dim}")
    effects, counts = record.compressed()
    freqs = counts / counts.sum()

    def loglik(r):
        p = np.real(np.einsum("kab,ba->k", effects, r))
        if np.any(p <= 1e-15):
            return -math.inf
        return float(counts @ np.log(p))

    rho = np.eye(d, dtype=complex) / d
    best, best_ll = rho, loglik(rho)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        p = np.real(np.einsum("kab,ba->k", effects, rho))
        r_op = np.einsum("k,kab->ab", freqs / p, effects)
        new = r_op @ rho @ r_op
        new = 0.5 * (new + new.conj().T)
        new /= np.trace(new).real
        step = 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(new - rho))))
        rho = new
        ll = loglik(rho)
        if ll >= best_ll:
            best, best_ll = rho, ll
        if step < tolerance:
            converged = True
            break
    return MleResult(DensityMatrix(best), converged, it, best_ll)


# -- risk studies -------------------------------------------------------------

class Estimator(str, enum.Enum):
    BAYES_MEAN = "bayes-mean"
    MLE = "mle"


RANK_TOL = 1e-6

RISK_COLUMNS = ["estimator", "N", "trial", "relative_entropy_risk", "trace_distance", "rank_deficient_flag"]


@dataclass
class RiskTable:
    rows: list = field(default_factory=list)

    def add(self, estimator, n, trial, risk, tdist, rank_deficient):
        self.rows.append((Estimator(estimator).value, int(n), int(trial), float(risk), float(tdist), bool(rank_deficient)))

    def select(self, estimator, n) -> list:
        est = Estimator(estimator).value
        return [r for r in self.rows if r[0] == est and r[1] == n]

    def summary(self) -> list[dict]:
        out = []
        keys = sorted({(r[0], r[1]) for r in self.rows})
        for est, n in keys:
            rows = self.select(est, n)
            risks = np.array([r[3] for r in rows])
            tds = np.array([r[4] for r in rows])
            finite = risks[np.isfinite(risks)]
            out.append({
                "estimator": est,
                "N": n,
                "trials": len(rows),
                "mean_risk": float(np.mean(risks)),
                "median_risk": float(np.median(risks)),
                "q10_risk": _quantile(risks, 0.1),
                "q90_risk": _quantile(risks, 0.9),
                "mean_finite_risk": float(np.mean(finite)) if finite.size else math.nan,
                "infinite_risk_frequency": float(np.mean(~np.isfinite(risks))),
                "rank_deficient_frequency": float(np.mean([r[5] for r in rows])),
                "mean_trace_distance": float(np.mean(tds)),
                "median_trace_distance": float(np.median(tds)),
            })
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RISK_COLUMNS)
            for est, n, trial, risk, td, flag in self.rows:
                w.writerow([est, n, trial, repr(risk), repr(td), int(flag)])

    def to_dict(self) -> dict:
        return {"columns": RISK_COLUMNS,
                "rows": [[e, n, t, _enc(r), d, f] for e, n, t, r, d, f in self.rows],
                "summary": [{k: _enc(v) if isinstance(v, float) else v for k, v in s.items()} for s in self.summary()]}


def _quantile(x, q):
    # linear interpolation between two +inf order statistics would give nan
    with np.errstate(invalid="ignore"):
        v = float(np.quantile(x, q))
    return v if not math.isnan(v) else float(np.quantile(x, q, method="higher"))


def _enc(x):
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, float) and math.isnan(x):
        return None
    return x


def estimator_risk(prior: PriorSpec, true_states: int, copies: int | Sequence[int], measurement: Povm,
                   estimators: Sequence[Estimator | str] = (Estimator.BAYES_MEAN,), seed: int = 0,
                   particles: int = 2000, truths: Sequence[DensityMatrix] | None = None,
                   mle_tolerance: float = 1e-8, mle_max_iters: int = 10_000) -> RiskTable:
    """Relative-entropy risk S(truth || estimate) of each estimator versus copies N.

    Truths are drawn from ``prior`` unless given explicitly.  For each truth
    one outcome sequence of length max(N) is simulated and its prefixes are
    used for every N, so the curves are coupled.  The Bayes estimator uses a
    single prior particle sample shared by all trials.  With N = 0 the MLE
    has no data and reports I/d, the starting point of its iteration.
    """
    ns = [copies] if np.isscalar(copies) else list(copies)
    if any(n < 0 for n in ns):
        raise InvalidInputError("copies must be non-negative")
    if measurement.dim != prior.dim:
        raise DimensionMismatchError(f"measurement dim {measurement.dim} vs prior dim {prior.dim}")
    ests = [Estimator(e) for e in estimators]
    if truths is None:
        truths = [sample_prior(prior, 1, seed=_sub(seed, 1, t)).particle(0) for t in range(true_states)]
    else:
        truths = list(truths)[:true_states] if true_states else list(truths)
    prior_particles = None
    if Estimator.BAYES_MEAN in ests:
        if prior.kind is PriorKind.DISCRETE:
            prior_particles = discrete_ensemble(prior)
        else:
            prior_particles = sample_prior(prior, particles, seed=_sub(seed, 2))
    table = RiskTable()
    nmax = max(ns)
    dmix = DensityMatrix.maximally_mixed(prior.dim)
    for t, truth in enumerate(truths):
        full, _ = simulate_record(truth, measurement, nmax, counter_rng(seed, 3, t))
        for n in ns:
            record = full[:n]
            for est in ests:
                if est is Estimator.BAYES_MEAN:
                    estimate = posterior_mean(posterior_update(prior_particles, record, resample=False))
                else:
                    estimate = mle_estimate(record, prior.dim, mle_tolerance, mle_max_iters).state if n else dmix
                lam_min = float(np.linalg.eigvalsh(estimate.matrix)[0])
                table.add(est, n, t, relative_entropy(truth, estimate), trace_distance(truth, estimate),
                          lam_min < RANK_TOL)
    return table


def _sub(seed, *stream):
    """Derive a 64-bit sub-seed for an independent keyed stream."""
    return int(np.random.SeedSequence([int(seed), *stream]).generate_state(1, np.uint64)[0])
