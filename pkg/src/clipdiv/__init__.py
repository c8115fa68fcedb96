"""Language-guided unsupervised domain adaptation on precomputed frozen embeddings."""

from .dataio import (EmbeddingDataset, SynthConfig, load_checkpoint, read_dataset,
                     read_prompts, save_checkpoint, synth_generate, write_dataset,
                     write_prompts)
from .guidance import GuidanceDistribution, cache_digest, guidance_cache, zero_shot_probs
from .losses import (LossBundle, LossWeights, absolute_divergence, relative_divergence,
                     source_cls_loss, target_pl_loss, total_objective)
from .model import ForwardRecord, ParamGrads, UdaModel, backward, forward, init, predict
from .prompts import PromptBank, build_averaged, render_prompts
from .pseudo_label import PseudoLabelState, assign_nearest, calibrated_centroids, refine_round
from .trainer import RunMetrics, TrainingConfig, evaluate, lr_multiplier, sgd_step, train

__version__ = "0.1.0"

__all__ = [
    "EmbeddingDataset", "SynthConfig", "synth_generate",
    "read_dataset", "write_dataset", "read_prompts", "write_prompts",
    "save_checkpoint", "load_checkpoint",
    "GuidanceDistribution", "zero_shot_probs", "guidance_cache", "cache_digest",
    "LossBundle", "LossWeights", "source_cls_loss", "target_pl_loss",
    "absolute_divergence", "relative_divergence", "total_objective",
    "UdaModel", "ForwardRecord", "ParamGrads", "init", "forward", "backward", "predict",
    "PromptBank", "render_prompts", "build_averaged",
    "PseudoLabelState", "calibrated_centroids", "assign_nearest", "refine_round",
    "TrainingConfig", "RunMetrics", "train", "evaluate", "lr_multiplier", "sgd_step",
    "__version__",
]
