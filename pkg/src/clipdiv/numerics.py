"""Deterministic scalar/vector primitives used by every other module.

All math runs in float64. Softmax is computed in the log domain with
max-subtraction; KL clamps the reference distribution away from zero;
cosine similarity stabilizes both norms with a small epsilon.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DimensionError, InvalidParameterError

EPS_KL = 1e-12
EPS_NORM = 1e-12
EPS_DEN = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 generator: identical seed, identical stream."""
    return np.random.default_rng(int(seed))


def _as_f64(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def softmax(logits, tau: float = 1.0) -> np.ndarray:
    """Temperature-scaled softmax over the last axis.

    Accepts a vector or a matrix (row-wise). Output rows are non-negative,
    sum to 1, and keep the argmax of the input.
    """
    if tau <= 0:
        raise InvalidParameterError(f"temperature must be positive, got {tau}")
    z = _as_f64(logits)
    if z.size == 0:
        raise InvalidParameterError("softmax of empty input")
    z = z / tau
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """x * log(y) with the 0 * log(anything) = 0 convention."""
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    mask = x > 0
    out[mask] = (x * np.log(np.where(mask, y, 1.0)))[mask]
    return out


def kl_div(p, q) -> float:
    """Kullback-Leibler divergence sum_k p_k ln(p_k / q_k) for two probability vectors.

    q is clamped below by EPS_KL before the log, so the result can dip a few
    ulps below zero when q has exact zeros; it is never materially negative.
    """
    p = _as_f64(p)
    q = _as_f64(q)
    if p.shape != q.shape:
        raise DimensionError(f"kl_div shape mismatch: {p.shape} vs {q.shape}")
    q = np.maximum(q, EPS_KL)
    return float(np.sum(_xlogy(p, p) - p * np.log(q)))


def kl_div_rows(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL for N x K blocks; same clamping as kl_div."""
    p = _as_f64(p)
    q = _as_f64(q)
    if p.shape != q.shape:
        raise DimensionError(f"kl_div_rows shape mismatch: {p.shape} vs {q.shape}")
    q = np.maximum(q, EPS_KL)
    return np.sum(_xlogy(p, p) - p * np.log(q), axis=-1)


def cosine_sim(a, b) -> float:
    """Cosine similarity with EPS_NORM added to each norm for stability."""
    a = _as_f64(a)
    b = _as_f64(b)
    if a.shape != b.shape:
        raise DimensionError(f"cosine_sim shape mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na <= EPS_NORM and nb <= EPS_NORM:
        raise DegenerateInputError("cosine_sim: both vectors are (near-)zero")
    return float(np.dot(a, b) / ((na + EPS_NORM) * (nb + EPS_NORM)))


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """Divide each row by its L2 norm (plus EPS_NORM)."""
    m = _as_f64(m)
    norms = np.linalg.norm(m, axis=-1, keepdims=True)
    return m / (norms + EPS_NORM)


def row_norms(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(_as_f64(m), axis=-1)


def validate_prob_rows(probs: np.ndarray, tol: float = 1e-6) -> None:
    """Check every row is a probability vector: entries >= 0, sums to 1 within tol."""
    p = _as_f64(probs)
    if np.any(p < 0):
        raise InvalidParameterError("probability entries must be non-negative")
    if p.size:
        sums = np.sum(p, axis=-1)
        if np.any(np.abs(sums - 1.0) > tol):
            worst = float(np.max(np.abs(sums - 1.0)))
            raise InvalidParameterError(f"probability rows must sum to 1 (off by {worst:.3g})")
