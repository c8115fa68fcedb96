"""On-disk formats and the synthetic two-domain benchmark generator.

A dataset directory holds `manifest.json` plus raw little-endian blobs:
`inputs.f32`, `clip.f32`, and optionally `labels.u32` / `eval_labels.u32`.
A prompts directory holds `source.f32`, `target.f32`, `agnostic.f32` (the
averaged set is always recomputed on load). A checkpoint directory holds a
single `params.f64` blob. Blobs are row-major with no headers; all shape
and byte-length information lives in the manifest. Files are float32 on
disk and widened to float64 in memory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, FormatError, InvalidParameterError
from .model import UdaModel, init as model_init
from .numerics import make_rng, normalize_rows
from .prompts import PromptBank

MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1

_DTYPES = {"f32": np.dtype("<f4"), "u32": np.dtype("<u4"), "f64": np.dtype("<f8")}

# Internal constants of the synthetic benchmark (not part of SynthConfig):
# geometry chosen so the guidance channel is informative but imperfect and
# the input-space domain shift genuinely hurts a source-only classifier.
CLASS_SCALE = 2.0          # norm of each class mean in input space
CLIP_NOISE_FACTOR = 6.0    # per-component noise scale in embedding space, times (1-fidelity)*noise_scale
CLIP_DOMAIN_SCALE = 0.1    # magnitude of the per-domain offset in embedding space
TEXT_JITTER = 0.1          # how far domain-specific text rows sit from the agnostic ones
PAIR_MIX_FACTOR = 10.0     # how fast the last two classes collapse in the embedding as fidelity drops
PAIR_HIDDEN = 0.5          # strength of the pair identity along the hidden axis, and of its probe


@dataclass
class EmbeddingDataset:
    """Per-sample model inputs, frozen image embeddings, and (optional) labels.

    `labels` are visible to training (source supervision); `eval_labels` are
    ground truth held out for evaluation only, which is how synthetic target
    domains keep the training path honest.
    """

    domain_name: str
    class_names: tuple[str, ...]
    inputs: np.ndarray
    clip_embs: np.ndarray
    labels: np.ndarray | None = None
    eval_labels: np.ndarray | None = None

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.clip_embs = np.asarray(self.clip_embs, dtype=np.float64)
        if self.inputs.ndim != 2 or self.clip_embs.ndim != 2:
            raise InvalidParameterError("inputs and clip_embs must be 2-D")
        if self.inputs.shape[0] != self.clip_embs.shape[0]:
            raise InvalidParameterError(
                f"row count mismatch: {self.inputs.shape[0]} inputs vs "
                f"{self.clip_embs.shape[0]} clip embeddings")
        k = len(self.class_names)
        for name in ("labels", "eval_labels"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.asarray(arr, dtype=np.int64)
            if arr.shape != (self.inputs.shape[0],):
                raise InvalidParameterError(f"{name} must have one entry per sample")
            if arr.size and (arr.min() < 0 or arr.max() >= k):
                raise InvalidParameterError(f"{name} contain ids outside [0, {k})")
            setattr(self, name, arr)

    @property
    def num_samples(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def dim_input(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def dim_clip(self) -> int:
        return int(self.clip_embs.shape[1])


@dataclass
class SynthConfig:
    """Knobs of the synthetic domain-shift benchmark; defaults are the standard benchmark."""

    k: int = 5
    d_in: int = 16
    d_clip: int = 32
    n_per_domain: int = 500
    domain_gap: float = 3.0
    clip_fidelity: float = 0.9
    noise_scale: float = 0.5
    seed: int = 7

    def validate(self) -> None:
        for name in ("k", "d_in", "d_clip", "n_per_domain"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.clip_fidelity <= 1.0:
            raise ConfigurationError(f"clip_fidelity must be in [0,1], got {self.clip_fidelity}")
        if self.noise_scale < 0 or self.domain_gap < 0:
            raise ConfigurationError("noise_scale and domain_gap must be non-negative")
        if self.d_clip < self.k:
            raise ConfigurationError(
                f"d_clip ({self.d_clip}) must be >= k ({self.k}) for orthonormal class text rows")


# --------------------------------------------------------------------------
# blob + manifest plumbing
# --------------------------------------------------------------------------

def _write_blob(path: Path, arr: np.ndarray, dtype_tag: str) -> dict:
    data = np.ascontiguousarray(arr, dtype=_DTYPES[dtype_tag])
    path.write_bytes(data.tobytes())
    rows, cols = (arr.shape + (1,))[:2] if arr.ndim == 1 else arr.shape
    return {
        "file": path.name,
        "rows": int(rows),
        "cols": int(cols),
        "dtype": dtype_tag,
        "bytes": int(data.nbytes),
    }


def _check_blob_entry(name: str, entry: dict, root: Path) -> None:
    for key in ("file", "rows", "cols", "dtype", "bytes"):
        if key not in entry:
            raise FormatError(f"blob {name!r}: manifest entry missing {key!r}")
    if entry["dtype"] not in _DTYPES:
        raise FormatError(f"blob {name!r}: unknown dtype {entry['dtype']!r}")
    itemsize = _DTYPES[entry["dtype"]].itemsize
    expected = int(entry["rows"]) * int(entry["cols"]) * itemsize
    if int(entry["bytes"]) != expected:
        raise FormatError(
            f"blob {name!r}: declared {entry['bytes']} bytes but "
            f"{entry['rows']}x{entry['cols']} {entry['dtype']} needs {expected}")
    blob_path = root / entry["file"]
    if not blob_path.is_file():
        raise FormatError(f"blob {name!r}: missing file {blob_path}")
    actual = blob_path.stat().st_size
    if actual != expected:
        raise FormatError(
            f"blob {name!r}: file {blob_path} has {actual} bytes, expected {expected} "
            f"(short from offset {min(actual, expected)})")


def _read_blob(entry: dict, root: Path) -> np.ndarray:
    dtype = _DTYPES[entry["dtype"]]
    raw = np.fromfile(root / entry["file"], dtype=dtype)
    arr = raw.reshape(int(entry["rows"]), int(entry["cols"]))
    if entry["dtype"] == "u32":
        return arr.astype(np.int64)
    return arr.astype(np.float64)


def _load_manifest(path: Path, kind: str) -> dict:
    root = Path(path)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FormatError(f"no {MANIFEST_NAME} in {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{manifest_path}: invalid JSON ({exc})") from exc
    if manifest.get("version") != FORMAT_VERSION:
        raise FormatError(f"{manifest_path}: unsupported version {manifest.get('version')!r}")
    if manifest.get("kind") != kind:
        raise FormatError(f"{manifest_path}: kind {manifest.get('kind')!r}, expected {kind!r}")
    return manifest


def _write_manifest(root: Path, manifest: dict) -> None:
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------

def write_dataset(dataset: EmbeddingDataset, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    blobs = {
        "inputs": _write_blob(root / "inputs.f32", dataset.inputs, "f32"),
        "clip": _write_blob(root / "clip.f32", dataset.clip_embs, "f32"),
    }
    if dataset.labels is not None:
        blobs["labels"] = _write_blob(root / "labels.u32", dataset.labels, "u32")
    if dataset.eval_labels is not None:
        blobs["eval_labels"] = _write_blob(root / "eval_labels.u32", dataset.eval_labels, "u32")
    _write_manifest(root, {
        "version": FORMAT_VERSION,
        "kind": "dataset",
        "domain": dataset.domain_name,
        "class_names": list(dataset.class_names),
        "num_samples": dataset.num_samples,
        "dim_input": dataset.dim_input,
        "dim_clip": dataset.dim_clip,
        "blobs": blobs,
    })


def read_dataset(path: str | Path) -> EmbeddingDataset:
    root = Path(path)
    manifest = _load_manifest(root, "dataset")
    for key in ("domain", "class_names", "num_samples", "dim_input", "dim_clip", "blobs"):
        if key not in manifest:
            raise FormatError(f"dataset manifest missing {key!r}")
    n = int(manifest["num_samples"])
    d_in = int(manifest["dim_input"])
    d_clip = int(manifest["dim_clip"])
    if n < 0 or d_in < 1 or d_clip < 1:
        raise FormatError(f"dataset manifest has invalid dims ({n} x {d_in}, clip {d_clip})")
    blobs = manifest["blobs"]
    for required in ("inputs", "clip"):
        if required not in blobs:
            raise FormatError(f"dataset manifest missing blob {required!r}")
    expected_shapes = {"inputs": (n, d_in), "clip": (n, d_clip),
                       "labels": (n, 1), "eval_labels": (n, 1)}
    for name, entry in blobs.items():
        if name not in expected_shapes:
            raise FormatError(f"dataset manifest has unexpected blob {name!r}")
        rows, cols = expected_shapes[name]
        if (int(entry.get("rows", -1)), int(entry.get("cols", -1))) != (rows, cols):
            raise FormatError(f"blob {name!r}: expected {rows}x{cols}, "
                              f"manifest says {entry.get('rows')}x{entry.get('cols')}")
        _check_blob_entry(name, entry, root)
    labels = _read_blob(blobs["labels"], root)[:, 0] if "labels" in blobs else None
    eval_labels = _read_blob(blobs["eval_labels"], root)[:, 0] if "eval_labels" in blobs else None
    return EmbeddingDataset(
        domain_name=manifest["domain"],
        class_names=tuple(manifest["class_names"]),
        inputs=_read_blob(blobs["inputs"], root),
        clip_embs=_read_blob(blobs["clip"], root),
        labels=labels,
        eval_labels=eval_labels,
    )


# --------------------------------------------------------------------------
# prompt banks
# --------------------------------------------------------------------------

def write_prompts(bank: PromptBank, path: str | Path,
                  source_domain: str | None = None,
                  target_domain: str | None = None) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    blobs = {
        "source": _write_blob(root / "source.f32", bank.source_text, "f32"),
        "target": _write_blob(root / "target.f32", bank.target_text, "f32"),
        "agnostic": _write_blob(root / "agnostic.f32", bank.agnostic_text, "f32"),
    }
    manifest = {
        "version": FORMAT_VERSION,
        "kind": "prompts",
        "class_names": list(bank.class_names),
        "dim_clip": bank.dim_clip,
        "blobs": blobs,
    }
    if source_domain is not None:
        manifest["source_domain"] = source_domain
    if target_domain is not None:
        manifest["target_domain"] = target_domain
    _write_manifest(root, manifest)


def read_prompts(path: str | Path) -> PromptBank:
    root = Path(path)
    manifest = _load_manifest(root, "prompts")
    for key in ("class_names", "dim_clip", "blobs"):
        if key not in manifest:
            raise FormatError(f"prompts manifest missing {key!r}")
    k = len(manifest["class_names"])
    d_clip = int(manifest["dim_clip"])
    if k < 1 or d_clip < 1:
        raise FormatError(f"prompts manifest has invalid dims (K={k}, dim_clip={d_clip})")
    blobs = manifest["blobs"]
    for name in ("source", "target", "agnostic"):
        if name not in blobs:
            raise FormatError(f"prompts manifest missing blob {name!r}")
        entry = blobs[name]
        if (int(entry.get("rows", -1)), int(entry.get("cols", -1))) != (k, d_clip):
            raise FormatError(f"blob {name!r}: expected {k}x{d_clip}, "
                              f"manifest says {entry.get('rows')}x{entry.get('cols')}")
        _check_blob_entry(name, entry, root)
    return PromptBank(
        class_names=tuple(manifest["class_names"]),
        source_text=_read_blob(blobs["source"], root),
        target_text=_read_blob(blobs["target"], root),
        agnostic_text=_read_blob(blobs["agnostic"], root),
    )


def check_pairing(dataset: EmbeddingDataset, bank: PromptBank) -> None:
    """Reject a dataset/prompt-bank pair that disagrees on classes or embedding width."""
    if dataset.class_names != bank.class_names:
        raise ConfigurationError(
            f"class list mismatch between dataset {dataset.domain_name!r} and prompt bank: "
            f"{list(dataset.class_names)} vs {list(bank.class_names)}")
    if dataset.dim_clip != bank.dim_clip:
        raise ConfigurationError(
            f"embedding width mismatch: dataset {dataset.dim_clip} vs bank {bank.dim_clip}")


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

def save_checkpoint(model: UdaModel, path: str | Path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    flat = model.to_flat()
    _write_manifest(root, {
        "version": FORMAT_VERSION,
        "kind": "checkpoint",
        "layer_dims": list(model.layer_dims),
        "num_classes": model.num_classes,
        "activation": model.activation,
        "blobs": {"params": _write_blob(root / "params.f64", flat, "f64")},
    })


def load_checkpoint(path: str | Path) -> UdaModel:
    root = Path(path)
    manifest = _load_manifest(root, "checkpoint")
    for key in ("layer_dims", "num_classes", "blobs"):
        if key not in manifest:
            raise FormatError(f"checkpoint manifest missing {key!r}")
    if "params" not in manifest["blobs"]:
        raise FormatError("checkpoint manifest missing blob 'params'")
    entry = manifest["blobs"]["params"]
    _check_blob_entry("params", entry, root)
    model = model_init(manifest["layer_dims"], int(manifest["num_classes"]), seed=0)
    flat = _read_blob(entry, root).ravel()
    model.load_flat(flat)
    return model


# --------------------------------------------------------------------------
# synthetic benchmark
# --------------------------------------------------------------------------

def _orthonormal_rows(rng: np.random.Generator, k: int, dim: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((dim, k)))
    return q.T.copy()


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _quantize_f32(arr: np.ndarray) -> np.ndarray:
    """Round-trip through float32 so in-memory values equal the on-disk ones."""
    return arr.astype(np.float32).astype(np.float64)


def synth_generate(cfg: SynthConfig) -> tuple[EmbeddingDataset, EmbeddingDataset, PromptBank]:
    """Generate a labeled source domain, a shifted target domain, and a prompt bank.

    Inputs are Gaussian blobs around orthonormal-ish class means; the target
    domain is the same mixture offset by `domain_gap` along one fixed random
    direction. Synthetic image embeddings are unit vectors that point at the
    true class text row with strength `clip_fidelity`, corrupted by noise and
    a small per-domain component. Target ground truth is stored as
    evaluation-only labels. Deterministic per seed.
    """
    cfg.validate()
    rng = make_rng(cfg.seed)
    k, d_in, d_clip, n = cfg.k, cfg.d_in, cfg.d_clip, cfg.n_per_domain

    class_directions = _orthonormal_rows(rng, k, d_in) if k <= d_in else \
        normalize_rows(rng.standard_normal((k, d_in)))
    class_means = CLASS_SCALE * class_directions
    # The shift direction lives in the span of the class means, so the offset
    # moves target clusters across source decision boundaries instead of
    # along a harmless orthogonal axis. It stays orthogonal to the confusable
    # pair's own axis: the shift scrambles classes globally but does not
    # invert the one distinction the embedding channel cannot see.
    weights_mix = rng.standard_normal(k)
    domain_dir = class_directions.T @ weights_mix
    if k >= 3:
        pair_in = class_directions[k - 2] - class_directions[k - 1]
        pair_in = pair_in / np.linalg.norm(pair_in)
        domain_dir = domain_dir - (domain_dir @ pair_in) * pair_in
    domain_dir = domain_dir / np.linalg.norm(domain_dir)

    text_true = _orthonormal_rows(rng, k, d_clip)

    def _complement_unit() -> np.ndarray:
        """Random unit vector orthogonal to every class text row."""
        w = rng.standard_normal(d_clip)
        w -= text_true.T @ (text_true @ w)
        return w / np.linalg.norm(w)

    # The pair identity of the two confusable classes (below) travels along a
    # hidden axis the agnostic rows cannot see; per-domain offsets are also
    # orthogonal to the class rows, so domain identity carries no class info.
    hidden_axis = _complement_unit() if k >= 3 and d_clip > k else None
    clip_domain = {"source": CLIP_DOMAIN_SCALE * _complement_unit(),
                   "target": CLIP_DOMAIN_SCALE * _complement_unit()}

    source_text = normalize_rows(text_true + TEXT_JITTER * normalize_rows(rng.standard_normal((k, d_clip))))
    target_text = text_true + TEXT_JITTER * normalize_rows(rng.standard_normal((k, d_clip)))
    agnostic_text = text_true

    # Below full fidelity the last two classes become confusable under the
    # agnostic prompts: their class signal collapses toward the pair midpoint
    # and the noise loses its component along the pair axis, so the agnostic
    # zero-shot distribution splits the pair instead of resolving it. The
    # pair identity survives on the hidden axis, which only the
    # target-specific rows probe: domain-specific prompts can tell the two
    # classes apart while the generic prompt cannot.
    pair = (k - 2, k - 1) if hidden_axis is not None else None
    mix = min(1.0, PAIR_MIX_FACTOR * (1.0 - cfg.clip_fidelity)) if pair else 0.0
    signal_dirs = text_true.copy()
    if pair and mix > 0.0:
        pair_axis = text_true[pair[0]] - text_true[pair[1]]
        pair_axis = pair_axis / np.linalg.norm(pair_axis)
        for own, other, sign in (pair + (1.0,), pair[::-1] + (-1.0,)):
            blended = ((1.0 - mix / 2.0) * text_true[own] + (mix / 2.0) * text_true[other]
                       + mix * sign * PAIR_HIDDEN * hidden_axis)
            signal_dirs[own] = blended / np.linalg.norm(blended)
    else:
        pair_axis = None
    if pair:
        target_text[pair[0]] += PAIR_HIDDEN * hidden_axis
        target_text[pair[1]] -= PAIR_HIDDEN * hidden_axis
    target_text = normalize_rows(target_text)

    def build_domain(tag: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        labels = rng.integers(0, k, size=n)
        inputs = class_means[labels] + cfg.noise_scale * rng.standard_normal((n, d_in))
        if tag == "target":
            inputs = inputs + cfg.domain_gap * domain_dir
        noise = rng.standard_normal((n, d_clip))
        if pair_axis is not None:
            in_pair = np.isin(labels, pair)
            noise[in_pair] -= mix * np.outer(noise[in_pair] @ pair_axis, pair_axis)
        embs = (cfg.clip_fidelity * signal_dirs[labels]
                + (1.0 - cfg.clip_fidelity) * CLIP_NOISE_FACTOR * cfg.noise_scale * noise
                + clip_domain[tag])
        return labels, inputs, normalize_rows(embs)

    class_names = tuple(f"class_{i:02d}" for i in range(k))
    src_labels, src_inputs, src_embs = build_domain("source")
    tgt_labels, tgt_inputs, tgt_embs = build_domain("target")

    source = EmbeddingDataset(
        domain_name="synth_source",
        class_names=class_names,
        inputs=_quantize_f32(src_inputs),
        clip_embs=_quantize_f32(src_embs),
        labels=src_labels,
    )
    target = EmbeddingDataset(
        domain_name="synth_target",
        class_names=class_names,
        inputs=_quantize_f32(tgt_inputs),
        clip_embs=_quantize_f32(tgt_embs),
        eval_labels=tgt_labels,
    )
    bank = PromptBank(
        class_names=class_names,
        source_text=_quantize_f32(source_text),
        target_text=_quantize_f32(target_text),
        agnostic_text=_quantize_f32(agnostic_text),
    )
    return source, target, bank
