"""Pure-numpy versions of the compiled kernels; same signatures and results."""

import numpy as np

PROB_FLOOR = 1e-15


def log_likelihoods(particles, effects, counts):
    particles = np.asarray(particles, dtype=complex)
    effects = np.asarray(effects, dtype=complex)
    counts = np.asarray(counts, dtype=float)
    keep = counts != 0
    effects, counts = effects[keep], counts[keep]
    if counts.size == 0:
        return np.zeros(particles.shape[0])
    probs = np.real(np.einsum("kab,nba->nk", effects, particles))
    bad = np.any(probs <= PROB_FLOOR, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(np.where(probs > PROB_FLOOR, probs, 1.0)) @ counts
    out[bad] = -np.inf
    return out


def sample_outcomes(cdf, uniforms):
    cdf = np.asarray(cdf, dtype=float)
    idx = np.searchsorted(cdf, np.asarray(uniforms, dtype=float), side="right")
    return np.minimum(idx, cdf.size - 1).astype(np.int64)


def systematic_resample(weights, u):
    w = np.asarray(weights, dtype=float)
    n = w.size
    positions = (np.arange(n) + u) / n
    idx = np.searchsorted(np.cumsum(w), positions, side="right")
    return np.minimum(idx, n - 1).astype(np.int64)
