"""Per-class text embeddings for each prompt set, plus the prompt string templates.

The averaged set is always derived from the source- and target-specific sets
(elementwise mean per class row) and is never stored separately.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidParameterError

# Prompt-set names used throughout the package and the CLI.
PROMPT_SETS = ("agnostic", "averaged", "source_specific", "target_specific")


def render_prompts(class_names: list[str], domain_name: str | None = None) -> list[str]:
    """Render one prompt string per class, preserving order.

    With a domain name: "a {domain} photo of a {class}"; without: "a photo of
    a {class}". The article is always "a", even before vowel-initial class
    names, to stay byte-compatible with published prompt lists.
    """
    if not class_names:
        raise InvalidParameterError("class_names must be non-empty")
    if len(set(class_names)) != len(class_names):
        raise InvalidParameterError("class_names contains duplicates")
    if domain_name is None:
        return [f"a photo of a {name}" for name in class_names]
    return [f"a {domain_name} photo of a {name}" for name in class_names]


def build_averaged(source_text: np.ndarray, target_text: np.ndarray) -> np.ndarray:
    """Per-class mean of the two domain-specific text embedding matrices."""
    src = np.asarray(source_text, dtype=np.float64)
    tgt = np.asarray(target_text, dtype=np.float64)
    if src.shape != tgt.shape:
        raise DimensionError(f"build_averaged shape mismatch: {src.shape} vs {tgt.shape}")
    return (src + tgt) / 2.0


@dataclass(frozen=True)
class PromptBank:
    """Text embeddings for all prompt sets, one row per class.

    Immutable after construction; `averaged_text` is recomputed from the
    stored sets so its defining identity cannot drift.
    """

    class_names: tuple[str, ...]
    source_text: np.ndarray
    target_text: np.ndarray
    agnostic_text: np.ndarray
    averaged_text: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        k = len(self.class_names)
        if k == 0:
            raise InvalidParameterError("PromptBank needs at least one class")
        if len(set(self.class_names)) != k:
            raise InvalidParameterError("PromptBank class names contain duplicates")
        for name, mat in (("source", self.source_text), ("target", self.target_text),
                          ("agnostic", self.agnostic_text)):
            arr = np.asarray(mat, dtype=np.float64)
            if arr.ndim != 2 or arr.shape[0] != k:
                raise DimensionError(f"{name} text matrix must be {k} x dim_clip, got {arr.shape}")
            if arr.shape[1] != np.asarray(self.source_text).shape[1]:
                raise DimensionError("prompt sets disagree on embedding width")
            object.__setattr__(self, f"{name}_text", arr)
        object.__setattr__(self, "averaged_text",
                           build_averaged(self.source_text, self.target_text))

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim_clip(self) -> int:
        return int(self.source_text.shape[1])

    def text_for(self, prompt_set: str) -> np.ndarray:
        if prompt_set == "agnostic":
            return self.agnostic_text
        if prompt_set == "averaged":
            return self.averaged_text
        if prompt_set == "source_specific":
            return self.source_text
        if prompt_set == "target_specific":
            return self.target_text
        raise InvalidParameterError(f"unknown prompt set {prompt_set!r}; expected one of {PROMPT_SETS}")
