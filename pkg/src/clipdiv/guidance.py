"""Zero-shot class distributions from precomputed image/text embeddings.

The encoders behind the embeddings are frozen, so every distribution here is
a constant of the data: it is computed once per dataset and reused for all
epochs. A digest helper makes that contract checkable.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .dataio import EmbeddingDataset
from .errors import ConfigurationError, DegenerateInputError, DimensionError
from .numerics import EPS_NORM, normalize_rows, row_norms, softmax
from .prompts import PromptBank


@dataclass(frozen=True)
class GuidanceDistribution:
    """N x K matrix of probability rows for one prompt set at one temperature."""

    probs: np.ndarray
    prompt_set: str
    tau: float

    @property
    def num_samples(self) -> int:
        return int(self.probs.shape[0])

    @property
    def num_classes(self) -> int:
        return int(self.probs.shape[1])


def zero_shot_probs(image_embs: np.ndarray, text_embs: np.ndarray, tau: float,
                    prompt_set: str = "agnostic") -> GuidanceDistribution:
    """Row i = softmax over classes of cos(text_k, image_i) / tau."""
    imgs = np.asarray(image_embs, dtype=np.float64)
    texts = np.asarray(text_embs, dtype=np.float64)
    if imgs.ndim != 2 or texts.ndim != 2:
        raise DimensionError("embeddings must be 2-D matrices")
    if imgs.shape[1] != texts.shape[1]:
        raise DimensionError(
            f"embedding width mismatch: images {imgs.shape[1]} vs texts {texts.shape[1]}")
    bad_text = np.nonzero(row_norms(texts) <= EPS_NORM)[0]
    if bad_text.size:
        raise DegenerateInputError(f"text embedding row {bad_text[0]} is (near-)zero")
    bad_img = np.nonzero(row_norms(imgs) <= EPS_NORM)[0]
    if bad_img.size:
        raise DegenerateInputError(f"image embedding row {bad_img[0]} is (near-)zero")
    if imgs.shape[0] == 0:
        return GuidanceDistribution(np.zeros((0, texts.shape[0])), prompt_set, float(tau))
    cosines = normalize_rows(imgs) @ normalize_rows(texts).T
    return GuidanceDistribution(softmax(cosines, tau), prompt_set, float(tau))


def guidance_cache(dataset: EmbeddingDataset, bank: PromptBank, tau: float,
                   include_target_specific: bool = False) -> dict[str, GuidanceDistribution]:
    """Precompute the distributions one training run needs for this dataset.

    Always includes the agnostic and averaged sets; target datasets also get
    the target-specific set used for pseudo-label calibration.
    """
    if dataset.dim_clip != bank.dim_clip:
        raise ConfigurationError(
            f"dataset {dataset.domain_name!r} has clip width {dataset.dim_clip}, "
            f"prompt bank has {bank.dim_clip}")
    sets = ["agnostic", "averaged"] + (["target_specific"] if include_target_specific else [])
    return {name: zero_shot_probs(dataset.clip_embs, bank.text_for(name), tau, name)
            for name in sets}


def cache_digest(cache: dict[str, GuidanceDistribution]) -> str:
    """SHA-256 over every distribution's bytes; equal digests mean bit-identical caches."""
    h = hashlib.sha256()
    for name in sorted(cache):
        dist = cache[name]
        h.update(name.encode())
        h.update(str(dist.probs.shape).encode())
        h.update(np.ascontiguousarray(dist.probs).tobytes())
    return h.hexdigest()
