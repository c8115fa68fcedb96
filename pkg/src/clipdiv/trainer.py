"""The training loop: paired minibatches, per-epoch pseudo labels, annealed SGD.

Each epoch first recomputes pseudo labels over the whole target set with the
current model, then walks equal-size shuffled minibatches from both domains.
Guidance distributions are precomputed once and never change during a run.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import model as uda_model
from . import pseudo_label
from .dataio import EmbeddingDataset, check_pairing
from .errors import ConfigurationError, DimensionError, InvalidParameterError
from .guidance import GuidanceDistribution, cache_digest, guidance_cache
from .losses import (KL_DIRECTIONS, LossWeights, absolute_divergence,
                     relative_divergence, source_cls_loss, target_pl_loss,
                     total_objective)
from .model import ParamGrads, UdaModel
from .prompts import PromptBank


@dataclass
class TrainingConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    epochs: int = 30
    batch_size: int = 32
    lr_extractor: float = 2e-3
    lr_classifier: float = 2e-2
    momentum: float = 0.9
    eta0: float = 0.01
    alpha: float = 10.0
    beta: float = 0.75
    tau: float = 0.01
    seed: int = 0
    kl_direction: str = "guidance_first"
    hidden_dims: tuple[int, ...] = (256, 256)

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be >= 1")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigurationError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.lr_extractor <= 0 or self.lr_classifier <= 0:
            raise ConfigurationError("learning rates must be positive")
        if self.eta0 <= 0 or self.alpha <= 0 or self.beta < 0:
            raise ConfigurationError("schedule constants must satisfy eta0, alpha > 0 and beta >= 0")
        if self.tau <= 0:
            raise ConfigurationError("tau must be positive")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ConfigurationError(f"kl_direction must be one of {KL_DIRECTIONS}")
        if not self.hidden_dims or any(int(d) < 1 for d in self.hidden_dims):
            raise ConfigurationError("hidden_dims must be non-empty positive ints")


@dataclass(frozen=True)
class ScheduleState:
    """Training progress in [0, 1] and the annealing multiplier at that point."""

    theta: float
    eta_theta: float


@dataclass
class RunMetrics:
    """One record per completed epoch, plus guidance digests taken before and after."""

    epochs: list[dict]
    guidance_digest_start: str
    guidance_digest_end: str

    def write_jsonl(self, path: str | Path) -> None:
        """One JSON object per epoch. Wall time is dropped so identical runs write identical bytes."""
        import json

        lines = []
        for record in self.epochs:
            clean = {k: v for k, v in record.items() if k != "wall_time_s"}
            lines.append(json.dumps(clean))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def lr_multiplier(theta: float, eta0: float, alpha: float, beta: float) -> float:
    """Annealed multiplier eta0 / (1 + alpha * theta)^beta."""
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"theta must be in [0, 1], got {theta}")
    if eta0 <= 0 or alpha <= 0 or beta < 0:
        raise InvalidParameterError("need eta0, alpha > 0 and beta >= 0")
    return eta0 / (1.0 + alpha * theta) ** beta


def sgd_step(model: UdaModel, grads: ParamGrads, velocity: ParamGrads,
             lr_extractor: float, lr_classifier: float, momentum: float) -> None:
    """Heavy-ball update in place: v <- momentum*v + g; p <- p - lr_group * v."""
    params = model.parameters()
    grad_arrays = grads.arrays()
    vel_arrays = velocity.arrays()
    if len(params) != len(grad_arrays) or any(
            p.shape != g.shape for p, g in zip(params, grad_arrays)):
        raise DimensionError("gradient arrays are not shape-congruent with the model")
    n_extractor = 2 * len(model.extractor_weights)
    for i, (p, g, v) in enumerate(zip(params, grad_arrays, vel_arrays)):
        lr = lr_extractor if i < n_extractor else lr_classifier
        v *= momentum
        v += g
        p -= lr * v


def evaluate(model: UdaModel, dataset: EmbeddingDataset) -> float:
    """Fraction of predictions matching the dataset's labels (eval labels if that is all it has)."""
    labels = dataset.labels if dataset.labels is not None else dataset.eval_labels
    if labels is None:
        raise InvalidParameterError(f"dataset {dataset.domain_name!r} has no labels to evaluate against")
    predictions = uda_model.predict(model, dataset.inputs)
    return float(np.mean(predictions == labels))


def _index_stream(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Concatenate fresh shuffles of range(n) until `count` indices are available."""
    chunks = []
    total = 0
    while total < count:
        chunks.append(rng.permutation(n))
        total += n
    return np.concatenate(chunks)[:count]


def train(source: EmbeddingDataset, target: EmbeddingDataset, bank: PromptBank,
          config: TrainingConfig,
          caches: tuple[dict[str, GuidanceDistribution], dict[str, GuidanceDistribution]] | None = None,
          ) -> tuple[UdaModel, RunMetrics]:
    """Run the full objective for `config.epochs` epochs and return the adapted model.

    `caches` may supply prebuilt (source, target) guidance caches; otherwise
    they are computed here. They are hashed at the start and end of the run.
    """
    config.validate()
    if source.labels is None:
        raise ConfigurationError("source dataset has no labels")
    if source.num_samples == 0 or target.num_samples == 0:
        raise ConfigurationError("datasets must be non-empty")
    check_pairing(source, bank)
    check_pairing(target, bank)
    if source.dim_input != target.dim_input:
        raise ConfigurationError(
            f"input width mismatch: source {source.dim_input} vs target {target.dim_input}")

    if caches is None:
        src_cache = guidance_cache(source, bank, config.tau)
        tgt_cache = guidance_cache(target, bank, config.tau, include_target_specific=True)
    else:
        src_cache, tgt_cache = caches
        if "target_specific" not in tgt_cache:
            raise ConfigurationError("target cache must include the target_specific distribution")
    digest_start = cache_digest(src_cache) + cache_digest(tgt_cache)

    k = bank.num_classes
    model = uda_model.init((source.dim_input, *config.hidden_dims), k, seed=config.seed)
    velocity = ParamGrads.zeros_like(model)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(1,)))

    n_s, n_t = source.num_samples, target.num_samples
    batch = config.batch_size
    steps_per_epoch = math.ceil(max(n_s, n_t) / batch)
    total_steps = config.epochs * steps_per_epoch

    src_agnostic = src_cache["agnostic"].probs
    tgt_agnostic = tgt_cache["agnostic"].probs
    src_averaged = src_cache["averaged"].probs
    tgt_averaged = tgt_cache["averaged"].probs
    tgt_specific = tgt_cache["target_specific"].probs

    epoch_records: list[dict] = []
    for epoch in range(config.epochs):
        t0 = time.perf_counter()

        full_target = uda_model.forward(model, target.inputs)
        pl_state = pseudo_label.run(full_target.features, full_target.probs, tgt_specific)

        src_stream = _index_stream(n_s, steps_per_epoch * batch, shuffle_rng)
        tgt_stream = _index_stream(n_t, steps_per_epoch * batch, shuffle_rng)

        step_scalars: list[dict] = []
        schedule = ScheduleState(0.0, config.eta0)
        for step in range(steps_per_epoch):
            global_step = epoch * steps_per_epoch + step
            theta = global_step / total_steps
            eta = lr_multiplier(theta, config.eta0, config.alpha, config.beta)
            schedule = ScheduleState(theta, eta)
            scale = eta / config.eta0
            lr_f = config.lr_extractor * scale
            lr_g = config.lr_classifier * scale

            si = src_stream[step * batch:(step + 1) * batch]
            ti = tgt_stream[step * batch:(step + 1) * batch]
            rec_s = uda_model.forward(model, source.inputs[si])
            rec_t = uda_model.forward(model, target.inputs[ti])

            bundle = total_objective(
                cls_source=source_cls_loss(rec_s.probs, source.labels[si]),
                abs_source=absolute_divergence(rec_s.probs, src_agnostic[si], config.kl_direction),
                abs_target=absolute_divergence(rec_t.probs, tgt_agnostic[ti], config.kl_direction),
                rel=relative_divergence(rec_s.probs, rec_t.probs, src_averaged[si], tgt_averaged[ti]),
                pl=target_pl_loss(rec_t.probs, pl_state.labels[ti]),
                weights=config.weights,
            )
            grads = uda_model.backward(model, rec_s, bundle.grad_logits_source)
            grads.add_scaled(uda_model.backward(model, rec_t, bundle.grad_logits_target))
            sgd_step(model, grads, velocity, lr_f, lr_g, config.momentum)
            step_scalars.append(bundle.scalars())

        record: dict = {"epoch": epoch}
        for key in step_scalars[0]:
            record[key] = float(np.mean([s[key] for s in step_scalars]))
        record["source_accuracy"] = evaluate(model, source)
        record["target_accuracy"] = (
            evaluate(model, target)
            if (target.labels is not None or target.eval_labels is not None) else None)
        record["theta"] = (epoch + 1) / config.epochs
        record["eta_theta"] = schedule.eta_theta
        record["lr_extractor"] = config.lr_extractor * schedule.eta_theta / config.eta0
        record["lr_classifier"] = config.lr_classifier * schedule.eta_theta / config.eta0
        record["steps"] = step_scalars
        record["wall_time_s"] = time.perf_counter() - t0
        epoch_records.append(record)

    digest_end = cache_digest(src_cache) + cache_digest(tgt_cache)
    metrics = RunMetrics(epochs=epoch_records,
                         guidance_digest_start=digest_start,
                         guidance_digest_end=digest_end)
    return model, metrics
