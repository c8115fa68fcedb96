"""Every training loss and its exact gradient with respect to model logits.

All losses are batch means, so the loss weights are independent of batch
size. Gradients assume the model probabilities are softmax(logits) at
temperature 1; the finite-difference suite in the tests holds them to that.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateInputError, DimensionError, InvalidLabelError,
                     InvalidParameterError)
from .numerics import EPS_KL, EPS_NORM, kl_div_rows, validate_prob_rows

KL_DIRECTIONS = ("guidance_first", "model_first")

_TINY = 1e-300  # floor inside logs only; never visible at trained scales


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights of the absolute, relative, and pseudo-label terms."""

    lambda_abs: float = 10.0
    lambda_rel: float = 1.0
    lambda_pl: float = 0.1

    def __post_init__(self):
        for name in ("lambda_abs", "lambda_rel", "lambda_pl"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value < 0:
                raise InvalidParameterError(f"{name} must be finite and >= 0, got {value}")
            object.__setattr__(self, name, value)


@dataclass
class LossBundle:
    """Scalar losses of one step plus the combined logit gradients per domain."""

    cls_source: float
    abs_source: float
    abs_target: float
    abs_total: float
    rel: float
    pl: float
    total: float
    grad_logits_source: np.ndarray
    grad_logits_target: np.ndarray

    def scalars(self) -> dict[str, float]:
        return {
            "cls_source": self.cls_source,
            "abs_source": self.abs_source,
            "abs_target": self.abs_target,
            "abs_total": self.abs_total,
            "rel": self.rel,
            "pl": self.pl,
            "total": self.total,
        }


def _check_labels(labels: np.ndarray, n: int, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise InvalidLabelError(f"labels must lie in [0, {k})")
    return labels


def _softmax_vjp(probs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to the logits."""
    return probs * (upstream - np.sum(probs * upstream, axis=1, keepdims=True))


def cross_entropy_loss(model_probs: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean -ln p_y over the batch; logit gradient is (p - onehot)/N."""
    p = np.asarray(model_probs, dtype=np.float64)
    n, k = p.shape
    if n == 0:
        raise InvalidParameterError("cross entropy of an empty batch")
    y = _check_labels(labels, n, k)
    picked = p[np.arange(n), y]
    loss = float(-np.mean(np.log(np.maximum(picked, _TINY))))
    grad = p.copy()
    grad[np.arange(n), y] -= 1.0
    return loss, grad / n


def source_cls_loss(model_probs: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Supervised classification loss on the labeled source batch."""
    return cross_entropy_loss(model_probs, labels)


def target_pl_loss(model_probs: np.ndarray, pseudo_labels) -> tuple[float, np.ndarray]:
    """Self-training loss on the target batch against its pseudo labels."""
    return cross_entropy_loss(model_probs, pseudo_labels)


def absolute_divergence(model_probs: np.ndarray, guidance_probs: np.ndarray,
                        direction: str = "guidance_first") -> tuple[float, np.ndarray]:
    """Mean KL between the frozen guidance rows and the model's output rows.

    `guidance_first` puts the guidance distribution first in the KL (the
    default); `model_first` reverses it. Both gradients are exact.
    """
    if direction not in KL_DIRECTIONS:
        raise InvalidParameterError(f"direction must be one of {KL_DIRECTIONS}, got {direction!r}")
    m = np.asarray(model_probs, dtype=np.float64)
    g = np.asarray(guidance_probs, dtype=np.float64)
    if m.shape != g.shape:
        raise DimensionError(f"shape mismatch: model {m.shape} vs guidance {g.shape}")
    if m.shape[0] == 0:
        raise InvalidParameterError("absolute divergence of an empty batch")
    validate_prob_rows(g)
    n = m.shape[0]
    if direction == "guidance_first":
        loss = float(np.mean(kl_div_rows(g, m)))
        grad = (m - g) / n
    else:
        g_safe = np.maximum(g, EPS_KL)
        log_ratio = np.log(np.maximum(m, _TINY)) - np.log(g_safe)
        per_row = np.sum(m * log_ratio, axis=1)
        loss = float(np.mean(per_row))
        grad = m * (log_ratio - per_row[:, None]) / n
    return loss, grad


def relative_divergence(src_probs: np.ndarray, tgt_probs: np.ndarray,
                        src_avg_guidance: np.ndarray, tgt_avg_guidance: np.ndarray,
                        ) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean over pairs of 1 - cos(guidance difference, model difference).

    Pair i couples source row i with target row i. Pairs whose guidance or
    model difference vector is (near-)zero are skipped and the mean is taken
    over the remaining pairs. Returns the loss and the logit gradients for
    both domains.
    """
    ps = np.asarray(src_probs, dtype=np.float64)
    pt = np.asarray(tgt_probs, dtype=np.float64)
    gs = np.asarray(src_avg_guidance, dtype=np.float64)
    gt = np.asarray(tgt_avg_guidance, dtype=np.float64)
    if not (ps.shape == pt.shape == gs.shape == gt.shape):
        raise DimensionError(
            f"paired blocks disagree: {ps.shape}, {pt.shape}, {gs.shape}, {gt.shape}")
    b = ps.shape[0]
    if b == 0:
        raise InvalidParameterError("relative divergence of an empty batch")

    d1 = gs - gt
    d2 = ps - pt
    n1 = np.linalg.norm(d1, axis=1)
    n2 = np.linalg.norm(d2, axis=1)
    valid = (n1 > EPS_NORM) & (n2 > EPS_NORM)
    m = int(np.count_nonzero(valid))
    if m == 0:
        raise DegenerateInputError("every pair has a (near-)zero difference vector")

    denom = (n1 + EPS_NORM) * (n2 + EPS_NORM)
    cos = np.sum(d1 * d2, axis=1) / denom
    loss = float(np.sum(np.where(valid, 1.0 - cos, 0.0)) / m)

    # d(1-cos)/d d2, zeroed on skipped pairs, averaged over the m kept pairs
    n2_safe = np.where(valid, n2, 1.0)
    grad_d2 = -(d1 / denom[:, None] - (cos / (n2_safe * (n2_safe + EPS_NORM)))[:, None] * d2)
    grad_d2 = np.where(valid[:, None], grad_d2, 0.0) / m

    grad_src = _softmax_vjp(ps, grad_d2)
    grad_tgt = _softmax_vjp(pt, -grad_d2)
    return loss, grad_src, grad_tgt


def total_objective(cls_source: tuple[float, np.ndarray],
                    abs_source: tuple[float, np.ndarray],
                    abs_target: tuple[float, np.ndarray],
                    rel: tuple[float, np.ndarray, np.ndarray],
                    pl: tuple[float, np.ndarray],
                    weights: LossWeights) -> LossBundle:
    """Weighted sum of all terms with gradients combined under the same weights."""
    cls_val, cls_grad = cls_source
    abs_s_val, abs_s_grad = abs_source
    abs_t_val, abs_t_grad = abs_target
    rel_val, rel_grad_s, rel_grad_t = rel
    pl_val, pl_grad = pl

    if cls_grad.shape != abs_s_grad.shape or cls_grad.shape != rel_grad_s.shape:
        raise DimensionError("source-side gradients disagree on shape")
    if abs_t_grad.shape != rel_grad_t.shape or abs_t_grad.shape != pl_grad.shape:
        raise DimensionError("target-side gradients disagree on shape")

    abs_total = abs_s_val + abs_t_val
    total = (cls_val + weights.lambda_abs * abs_total
             + weights.lambda_rel * rel_val + weights.lambda_pl * pl_val)
    grad_src = (cls_grad + weights.lambda_abs * abs_s_grad + weights.lambda_rel * rel_grad_s)
    grad_tgt = (weights.lambda_abs * abs_t_grad + weights.lambda_rel * rel_grad_t
                + weights.lambda_pl * pl_grad)
    return LossBundle(
        cls_source=float(cls_val),
        abs_source=float(abs_s_val),
        abs_target=float(abs_t_val),
        abs_total=float(abs_total),
        rel=float(rel_val),
        pl=float(pl_val),
        total=float(total),
        grad_logits_source=grad_src,
        grad_logits_target=grad_tgt,
    )
