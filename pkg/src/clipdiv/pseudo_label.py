"""Language-calibrated pseudo labels for the target domain.

Centroids are weighted feature means where each sample contributes its model
probability plus its zero-shot probability under target-specific prompts;
labels come from a nearest-centroid pass under cosine distance, followed by
exactly one refinement round.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, InvalidParameterError
from .numerics import EPS_DEN, EPS_NORM, normalize_rows, row_norms


@dataclass
class PseudoLabelState:
    centroids: np.ndarray          # K x d_feat, calibrated
    refined_centroids: np.ndarray  # K x d_feat, after the refinement round
    labels: np.ndarray             # N_t final pseudo labels
    weights: np.ndarray            # N_t x K calibration weights (model + zero-shot probs)


def calibrated_centroids(features: np.ndarray, model_probs: np.ndarray,
                         clip_target_probs: np.ndarray) -> np.ndarray:
    """Per-class weighted feature means with weights model_probs + clip_target_probs."""
    f = np.asarray(features, dtype=np.float64)
    dp = np.asarray(model_probs, dtype=np.float64)
    cp = np.asarray(clip_target_probs, dtype=np.float64)
    if f.shape[0] == 0:
        raise InvalidParameterError("cannot compute centroids of an empty target set")
    if dp.shape != cp.shape or dp.shape[0] != f.shape[0]:
        raise DimensionError(
            f"row mismatch: features {f.shape}, model probs {dp.shape}, clip probs {cp.shape}")
    weights = dp + cp  # N x K
    return (weights.T @ f) / (weights.sum(axis=0)[:, None] + EPS_DEN)


def assign_nearest(features: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """argmin over classes of the cosine distance 1 - cos(feature, centroid); ties pick the lowest class."""
    f = np.asarray(features, dtype=np.float64)
    c = np.asarray(centroids, dtype=np.float64)
    if f.shape[1] != c.shape[1]:
        raise DimensionError(f"feature width {f.shape[1]} != centroid width {c.shape[1]}")
    dead = np.nonzero(row_norms(c) <= EPS_NORM)[0]
    if dead.size:
        raise DegenerateInputError(f"centroid {dead[0]} is (near-)zero")
    sims = normalize_rows(f) @ normalize_rows(c).T
    return np.argmin(1.0 - sims, axis=1)


def refine_round(features: np.ndarray, labels: np.ndarray,
                 fallback_centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rebuild centroids as plain per-class means of the labeled features, then reassign.

    A class with no members keeps its fallback (calibrated) centroid so K
    never shrinks.
    """
    f = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    k = fallback_centroids.shape[0]
    refined = np.array(fallback_centroids, dtype=np.float64, copy=True)
    for cls in range(k):
        member = y == cls
        if member.any():
            refined[cls] = f[member].mean(axis=0)
    return refined, assign_nearest(f, refined)


def run(features: np.ndarray, model_probs: np.ndarray,
        clip_target_probs: np.ndarray) -> PseudoLabelState:
    """Calibrated centroids -> nearest-centroid labels -> one refinement round."""
    centroids = calibrated_centroids(features, model_probs, clip_target_probs)
    first_labels = assign_nearest(features, centroids)
    refined_centroids, labels = refine_round(features, first_labels, centroids)
    return PseudoLabelState(
        centroids=centroids,
        refined_centroids=refined_centroids,
        labels=labels,
        weights=np.asarray(model_probs, dtype=np.float64) + np.asarray(clip_target_probs, dtype=np.float64),
    )
