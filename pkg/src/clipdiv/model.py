"""Trainable model: a small tanh MLP feature extractor topped by a linear classifier.

Forward produces features, logits, and probabilities (softmax at temperature 1).
Backward consumes a gradient in logit space and returns exact analytic parameter
gradients; there is no autodiff anywhere in the package.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InvalidParameterError
from .numerics import make_rng, softmax


@dataclass
class UdaModel:
    """Feature extractor weights/biases plus classifier weight/bias.

    `extractor_weights[i]` has shape (layer_dims[i], layer_dims[i+1]);
    `classifier_weight` has shape (layer_dims[-1], num_classes). tanh is
    applied after every extractor layer, so features live in (-1, 1).
    """

    layer_dims: tuple[int, ...]
    num_classes: int
    extractor_weights: list[np.ndarray]
    extractor_biases: list[np.ndarray]
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray
    activation: str = "tanh"

    @property
    def dim_input(self) -> int:
        return self.layer_dims[0]

    @property
    def dim_feature(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "UdaModel":
        return UdaModel(
            layer_dims=self.layer_dims,
            num_classes=self.num_classes,
            extractor_weights=[w.copy() for w in self.extractor_weights],
            extractor_biases=[b.copy() for b in self.extractor_biases],
            classifier_weight=self.classifier_weight.copy(),
            classifier_bias=self.classifier_bias.copy(),
            activation=self.activation,
        )

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (extractor W, b per layer; classifier W, b)."""
        params: list[np.ndarray] = []
        for w, b in zip(self.extractor_weights, self.extractor_biases):
            params.extend((w, b))
        params.extend((self.classifier_weight, self.classifier_bias))
        return params

    def to_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.parameters():
            n = p.size
            if offset + n > flat.size:
                raise DimensionError("flat parameter vector too short for model")
            p[...] = flat[offset:offset + n].reshape(p.shape)
            offset += n
        if offset != flat.size:
            raise DimensionError(f"flat parameter vector has {flat.size - offset} extra entries")


@dataclass
class ForwardRecord:
    """Everything backward needs: per-layer pre-activations/activations, features, logits, probs."""

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    features: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


@dataclass
class ParamGrads:
    """Gradients shape-congruent with UdaModel parameters."""

    extractor_weights: list[np.ndarray]
    extractor_biases: list[np.ndarray]
    classifier_weight: np.ndarray
    classifier_bias: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.extractor_weights, self.extractor_biases):
            out.extend((w, b))
        out.extend((self.classifier_weight, self.classifier_bias))
        return out

    def add_scaled(self, other: "ParamGrads", scale: float = 1.0) -> None:
        for mine, theirs in zip(self.arrays(), other.arrays()):
            mine += scale * theirs

    @staticmethod
    def zeros_like(model: UdaModel) -> "ParamGrads":
        return ParamGrads(
            extractor_weights=[np.zeros_like(w) for w in model.extractor_weights],
            extractor_biases=[np.zeros_like(b) for b in model.extractor_biases],
            classifier_weight=np.zeros_like(model.classifier_weight),
            classifier_bias=np.zeros_like(model.classifier_bias),
        )


def init(layer_dims, num_classes: int, seed: int) -> UdaModel:
    """Build a model with uniform fan-in weights (|w| <= sqrt(6/fan_in)) and zero biases."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise InvalidParameterError(f"layer_dims must be >= 2 entries of positive ints, got {dims}")
    if num_classes < 1:
        raise InvalidParameterError(f"num_classes must be >= 1, got {num_classes}")
    rng = make_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    bound = np.sqrt(6.0 / dims[-1])
    cls_w = rng.uniform(-bound, bound, size=(dims[-1], num_classes))
    cls_b = np.zeros(num_classes)
    return UdaModel(
        layer_dims=dims,
        num_classes=int(num_classes),
        extractor_weights=weights,
        extractor_biases=biases,
        classifier_weight=cls_w,
        classifier_bias=cls_b,
    )


def forward(model: UdaModel, inputs: np.ndarray) -> ForwardRecord:
    """Run the extractor and classifier; probs = softmax(logits) at temperature 1."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.dim_input:
        raise DimensionError(f"expected inputs of width {model.dim_input}, got shape {x.shape}")
    pre: list[np.ndarray] = []
    act: list[np.ndarray] = []
    a = x
    for w, b in zip(model.extractor_weights, model.extractor_biases):
        z = a @ w + b
        a = np.tanh(z)
        pre.append(z)
        act.append(a)
    features = a
    logits = features @ model.classifier_weight + model.classifier_bias
    probs = softmax(logits, 1.0) if logits.shape[0] else logits.copy()
    return ForwardRecord(inputs=x, pre_activations=pre, activations=act,
                         features=features, logits=logits, probs=probs)


def backward(model: UdaModel, record: ForwardRecord, grad_logits: np.ndarray) -> ParamGrads:
    """Chain a logit-space gradient through the classifier and the tanh stack."""
    g = np.asarray(grad_logits, dtype=np.float64)
    if g.shape != record.logits.shape:
        raise DimensionError(f"grad_logits shape {g.shape} != logits shape {record.logits.shape}")
    grads = ParamGrads.zeros_like(model)
    grads.classifier_weight[...] = record.features.T @ g
    grads.classifier_bias[...] = g.sum(axis=0)
    upstream = g @ model.classifier_weight.T
    for i in reversed(range(len(model.extractor_weights))):
        a = record.activations[i]
        below = record.activations[i - 1] if i > 0 else record.inputs
        dz = upstream * (1.0 - a * a)  # d tanh(z)/dz = 1 - tanh(z)^2
        grads.extractor_weights[i][...] = below.T @ dz
        grads.extractor_biases[i][...] = dz.sum(axis=0)
        upstream = dz @ model.extractor_weights[i].T
    return grads


def predict(model: UdaModel, inputs: np.ndarray) -> np.ndarray:
    """Per-row argmax of logits; ties resolve to the lowest class index."""
    record = forward(model, inputs)
    return np.argmax(record.logits, axis=1)
