"""Command-line surface: synth, zeroshot, train, eval, pseudo-label, sweep.

Machine-readable results go to stdout (JSON) or to files (JSON-lines metrics,
CSV sweeps); diagnostics go to stderr. Every command leaves its input
directories untouched. `CLIPDIV_THREADS` caps sweep parallelism.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dataio, guidance, pseudo_label, trainer
from . import model as uda_model
from .errors import (ConfigurationError, DegenerateInputError, DimensionError,
                     FormatError, InvalidParameterError)
from .losses import LossWeights
from .prompts import PROMPT_SETS

SWEEP_PARAMS = ("lambda_abs", "lambda_rel", "lambda_pl", "batch_size")

_CONFIG_KEYS = ("lambda_abs", "lambda_rel", "lambda_pl", "epochs", "batch_size",
                "lr_extractor", "lr_classifier", "momentum", "eta0", "alpha",
                "beta", "tau", "seed", "kl_direction", "hidden_dims")


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2))


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    unknown = set(config) - set(_CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return config


def _parse_hidden_dims(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(d) for d in text)
    return tuple(int(part) for part in str(text).split(",") if part.strip())


def _build_training_config(args) -> trainer.TrainingConfig:
    """Defaults < config file < explicit flags."""
    merged = dict(_load_config_file(getattr(args, "config", None)))
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    weights = LossWeights(
        lambda_abs=float(merged.pop("lambda_abs", 10.0)),
        lambda_rel=float(merged.pop("lambda_rel", 1.0)),
        lambda_pl=float(merged.pop("lambda_pl", 0.1)),
    )
    if "hidden_dims" in merged:
        merged["hidden_dims"] = _parse_hidden_dims(merged["hidden_dims"])
    config = trainer.TrainingConfig(weights=weights, **merged)
    config.validate()
    return config


def _add_training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file supplying any training option; flags override")
    p.add_argument("--lambda-abs", dest="lambda_abs", type=float)
    p.add_argument("--lambda-rel", dest="lambda_rel", type=float)
    p.add_argument("--lambda-pl", dest="lambda_pl", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr-extractor", dest="lr_extractor", type=float)
    p.add_argument("--lr-classifier", dest="lr_classifier", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--eta0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--kl-direction", dest="kl_direction", choices=["guidance_first", "model_first"])
    p.add_argument("--hidden-dims", dest="hidden_dims", help="comma-separated layer widths, e.g. 256,256")


def _labels_for_eval(dataset: dataio.EmbeddingDataset) -> np.ndarray:
    labels = dataset.labels if dataset.labels is not None else dataset.eval_labels
    if labels is None:
        raise ConfigurationError(f"dataset {dataset.domain_name!r} carries no labels")
    return labels


def _zero_shot_accuracy(dataset: dataio.EmbeddingDataset, bank, prompt_set: str, tau: float) -> float:
    labels = _labels_for_eval(dataset)
    dist = guidance.zero_shot_probs(dataset.clip_embs, bank.text_for(prompt_set), tau, prompt_set)
    return float(np.mean(np.argmax(dist.probs, axis=1) == labels))


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = dataio.SynthConfig(
        k=args.k, d_in=args.d_in, d_clip=args.d_clip, n_per_domain=args.n_per_domain,
        domain_gap=args.gap, clip_fidelity=args.fidelity, noise_scale=args.noise,
        seed=args.seed,
    )
    source, target, bank = dataio.synth_generate(cfg)
    out = Path(args.out)
    dataio.write_dataset(source, out / "source")
    dataio.write_dataset(target, out / "target")
    dataio.write_prompts(bank, out / "prompts",
                         source_domain=source.domain_name, target_domain=target.domain_name)
    _emit({
        "source": str(out / "source"),
        "target": str(out / "target"),
        "prompts": str(out / "prompts"),
        "k": cfg.k, "d_in": cfg.d_in, "d_clip": cfg.d_clip,
        "n_per_domain": cfg.n_per_domain, "seed": cfg.seed,
        "zero_shot_accuracy": {
            "source_agnostic": _zero_shot_accuracy(source, bank, "agnostic", args.tau or 0.01),
            "target_agnostic": _zero_shot_accuracy(target, bank, "agnostic", args.tau or 0.01),
            "target_specific": _zero_shot_accuracy(target, bank, "target_specific", args.tau or 0.01),
        },
    })
    return 0


def cmd_zeroshot(args) -> int:
    dataset = dataio.read_dataset(args.dataset)
    bank = dataio.read_prompts(args.prompts)
    dataio.check_pairing(dataset, bank)
    sets = [s.strip() for s in args.prompt_set.split(",") if s.strip()]
    for name in sets:
        if name not in PROMPT_SETS:
            raise InvalidParameterError(f"unknown prompt set {name!r}; choose from {PROMPT_SETS}")
    _emit({
        "dataset": str(args.dataset),
        "num_samples": dataset.num_samples,
        "tau": args.tau,
        "accuracies": {name: _zero_shot_accuracy(dataset, bank, name, args.tau) for name in sets},
    })
    return 0


def cmd_train(args) -> int:
    source = dataio.read_dataset(args.source)
    target = dataio.read_dataset(args.target)
    bank = dataio.read_prompts(args.prompts)
    config = _build_training_config(args)
    model, metrics = trainer.train(source, target, bank, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.save_checkpoint(model, out / "checkpoint")
    metrics.write_jsonl(out / "metrics.jsonl")
    last = metrics.epochs[-1]
    _emit({
        "checkpoint": str(out / "checkpoint"),
        "metrics": str(out / "metrics.jsonl"),
        "epochs": config.epochs,
        "final_source_accuracy": last["source_accuracy"],
        "final_target_accuracy": last["target_accuracy"],
        "final_total_loss": last["total"],
        "guidance_frozen": metrics.guidance_digest_start == metrics.guidance_digest_end,
    })
    return 0


def cmd_eval(args) -> int:
    dataset = dataio.read_dataset(args.dataset)
    model = dataio.load_checkpoint(args.checkpoint)
    accuracy = trainer.evaluate(model, dataset)
    _emit({"dataset": str(args.dataset), "num_samples": dataset.num_samples,
           "accuracy": accuracy})
    return 0


def cmd_pseudo_label(args) -> int:
    dataset = dataio.read_dataset(args.dataset)
    bank = dataio.read_prompts(args.prompts)
    dataio.check_pairing(dataset, bank)
    model = dataio.load_checkpoint(args.checkpoint)
    record = uda_model.forward(model, dataset.inputs)
    clip_probs = guidance.zero_shot_probs(
        dataset.clip_embs, bank.text_for("target_specific"), args.tau, "target_specific")
    state = pseudo_label.run(record.features, record.probs, clip_probs.probs)
    payload = {
        "dataset": str(args.dataset),
        "num_samples": dataset.num_samples,
        "labels": state.labels.tolist(),
        "centroids": state.centroids.tolist(),
        "refined_centroids": state.refined_centroids.tolist(),
        "weights": state.weights.tolist(),
    }
    reference = dataset.labels if dataset.labels is not None else dataset.eval_labels
    if reference is not None:
        payload["accuracy_vs_labels"] = float(np.mean(state.labels == reference))
    if args.out:
        Path(args.out).write_text(json.dumps(payload) + "\n", encoding="utf-8")
        _emit({"written": str(args.out), "num_samples": dataset.num_samples})
    else:
        _emit(payload)
    return 0


def _sweep_cell(source_path: str, target_path: str, prompts_path: str,
                base_config: dict, param: str, value: float, seed: int) -> dict:
    """One training run of the sweep cross-product (runs in a worker process)."""
    source = dataio.read_dataset(source_path)
    target = dataio.read_dataset(target_path)
    bank = dataio.read_prompts(prompts_path)
    merged = dict(base_config)
    merged[param] = int(value) if param == "batch_size" else float(value)
    merged["seed"] = int(seed)
    weights = LossWeights(
        lambda_abs=float(merged.pop("lambda_abs", 10.0)),
        lambda_rel=float(merged.pop("lambda_rel", 1.0)),
        lambda_pl=float(merged.pop("lambda_pl", 0.1)),
    )
    if "hidden_dims" in merged:
        merged["hidden_dims"] = _parse_hidden_dims(merged["hidden_dims"])
    config = trainer.TrainingConfig(weights=weights, **merged)
    _, metrics = trainer.train(source, target, bank, config)
    last = metrics.epochs[-1]
    return {
        "param": param, "value": value, "seed": seed,
        "target_accuracy": last["target_accuracy"],
        "source_accuracy": last["source_accuracy"],
        "final_total_loss": last["total"],
    }


_CSV_FIELDS = ("param", "value", "seed", "target_accuracy", "source_accuracy", "final_total_loss")


def _write_sweep_csv(path: Path, rows: list[dict], values: list[float]) -> None:
    """Rows in canonical (value, seed) order, one mean row after each value group."""
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for value in values:
            group = [r for r in rows if r["value"] == value]
            group.sort(key=lambda r: r["seed"])
            writer.writerows(group)
            if group:
                writer.writerow({
                    "param": group[0]["param"], "value": value, "seed": "mean",
                    "target_accuracy": float(np.mean([r["target_accuracy"] for r in group])),
                    "source_accuracy": float(np.mean([r["source_accuracy"] for r in group])),
                    "final_total_loss": float(np.mean([r["final_total_loss"] for r in group])),
                })
            handle.flush()


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise InvalidParameterError(f"sweep parameter must be one of {SWEEP_PARAMS}")
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise InvalidParameterError("sweep needs at least one value")
    seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
    if not seeds:
        raise InvalidParameterError("sweep needs at least one seed")

    base = dict(_load_config_file(getattr(args, "config", None)))
    for key in _CONFIG_KEYS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            base[key] = flag_value
    # validate the base config once up front so bad settings fail before any run
    probe = dict(base)
    probe[args.param] = int(values[0]) if args.param == "batch_size" else values[0]
    weights_probe = LossWeights(
        lambda_abs=float(probe.pop("lambda_abs", 10.0)),
        lambda_rel=float(probe.pop("lambda_rel", 1.0)),
        lambda_pl=float(probe.pop("lambda_pl", 0.1)),
    )
    if "hidden_dims" in probe:
        probe["hidden_dims"] = _parse_hidden_dims(probe["hidden_dims"])
    trainer.TrainingConfig(weights=weights_probe, **{**probe, "seed": seeds[0]}).validate()

    cells = [(value, seed) for value in values for seed in seeds]
    workers = max(1, int(os.environ.get("CLIPDIV_THREADS", "1")))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)

    rows: list[dict] = []
    if workers == 1:
        for value, seed in cells:
            rows.append(_sweep_cell(args.source, args.target, args.prompts,
                                    base, args.param, value, seed))
            _write_sweep_csv(out, rows, values)  # flush partial results per run
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_sweep_cell, args.source, args.target, args.prompts,
                            base, args.param, value, seed): (value, seed)
                for value, seed in cells
            }
            for future in futures:
                pass  # submission order preserved; results gathered below
            for future, _cell in futures.items():
                rows.append(future.result())
                _write_sweep_csv(out, rows, values)
    _write_sweep_csv(out, rows, values)

    means = {value: float(np.mean([r["target_accuracy"] for r in rows if r["value"] == value]))
             for value in values}
    _emit({
        "csv": str(out), "param": args.param, "values": values, "seeds": seeds,
        "mean_target_accuracy": means,
        "best_value": max(means, key=means.get),
    })
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clipdiv",
        description="Language-guided domain adaptation on precomputed frozen embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic two-domain benchmark")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--d-in", dest="d_in", type=int, default=16)
    p.add_argument("--d-clip", dest="d_clip", type=int, default=32)
    p.add_argument("--n-per-domain", dest="n_per_domain", type=int, default=500)
    p.add_argument("--gap", type=float, default=3.0)
    p.add_argument("--fidelity", type=float, default=0.9)
    p.add_argument("--noise", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--tau", type=float, default=0.01)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("zeroshot", help="zero-shot accuracy of the frozen embeddings")
    p.add_argument("--dataset", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--prompt-set", dest="prompt_set", default="agnostic",
                   help=f"comma-separated subset of {PROMPT_SETS}")
    p.add_argument("--tau", type=float, default=0.01)
    p.set_defaults(func=cmd_zeroshot)

    p = sub.add_parser("train", help="train the adaptation model")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True)
    _add_training_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pseudo-label", help="dump the pseudo-label state for inspection")
    p.add_argument("--dataset", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--tau", type=float, default=0.01)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("sweep", help="hyperparameter sweep over one axis")
    p.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seeds", default="1,2,3,4,5", help="comma-separated seeds")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--out", required=True, help="CSV output path")
    _add_training_flags(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FormatError, InvalidParameterError,
            DimensionError, DegenerateInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
