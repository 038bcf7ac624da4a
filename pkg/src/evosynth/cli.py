"""Command-line front end.

Subcommands: evolve, quantize, metrics, report, inspect. Exit codes are
0 success, 1 usage or configuration error, 2 data error, 3 numeric
failure; diagnostics go to the error stream, data to files or standard
output. Every command is deterministic given its inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from .dataio import (
    Dataset,
    load_csv_dataset,
    load_idx,
    load_lineage_report,
    load_model,
    load_model_meta,
    save_model,
    synth_gaussians,
)
from .errors import (
    BadMagic,
    ConfigError,
    CountMismatch,
    DatasetTooSmall,
    DeadLayer,
    EmptyDataset,
    FormatVersionUnsupported,
    IntegrityError,
    InvalidLabel,
    InvalidParam,
    InvalidSpec,
    IoError,
    NonFiniteFeature,
    NumericFailure,
    ParseError,
    ShapeMismatch,
    TruncatedFile,
)
from .evolution import EvolutionConfig, evolve
from .halfprec import HALF_OVERFLOW_MODES, PrecisionPolicy, SATURATE, TO_INFINITY, quantize_network
from .netcore import (
    ACTIVATIONS,
    LayerSpec,
    TrainConfig,
    count_active_synapses,
    evaluate_classifier,
    inference_cost,
    validation_split,
)
from .rng import substream

_DATA_ERRORS = (
    ParseError,
    EmptyDataset,
    NonFiniteFeature,
    BadMagic,
    CountMismatch,
    TruncatedFile,
    IoError,
    FormatVersionUnsupported,
    IntegrityError,
    ShapeMismatch,
    InvalidLabel,
    DatasetTooSmall,
    DeadLayer,
)


# configuration parsing (strict: unknown keys are errors)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return _is_int(v) or isinstance(v, float)


def _check_keys(obj: dict, allowed: tuple, where: str) -> None:
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s): {', '.join(unknown)}")


def _field(obj: dict, key: str, where: str, check, kind: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigError(f"{where}: missing required key {key!r}")
        return default
    value = obj[key]
    if not check(value):
        raise ConfigError(f"{where}: {key} must be {kind}")
    return value


def _parse_layers(doc, where: str) -> list[LayerSpec]:
    if not isinstance(doc, list) or not doc:
        raise ConfigError(f"{where}: layers must be a non-empty list")
    specs = []
    for i, entry in enumerate(doc):
        sub = f"{where}: layers[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{sub}: must be an object")
        _check_keys(entry, ("in_dim", "out_dim", "activation"), sub)
        in_dim = _field(entry, "in_dim", sub, _is_int, "an integer", required=True)
        out_dim = _field(entry, "out_dim", sub, _is_int, "an integer", required=True)
        activation = _field(entry, "activation", sub, lambda v: isinstance(v, str),
                            "a string", default="relu")
        if in_dim < 1 or out_dim < 1:
            raise ConfigError(f"{sub}: dimensions must be >= 1")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"{sub}: activation must be one of {', '.join(ACTIVATIONS)}")
        specs.append(LayerSpec(in_dim=in_dim, out_dim=out_dim, activation=activation))
    for i in range(len(specs) - 1):
        if specs[i].out_dim != specs[i + 1].in_dim:
            raise ConfigError(
                f"{where}: layers[{i}].out_dim {specs[i].out_dim} "
                f"!= layers[{i + 1}].in_dim {specs[i + 1].in_dim}"
            )
    return specs


def _parse_dataset_source(doc, where: str) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: dataset must be an object")
    kind = _field(doc, "type", where, lambda v: isinstance(v, str), "a string", required=True)
    if kind == "synthetic":
        _check_keys(doc, ("type", "n_per_class", "n_features", "separation", "seed"), where)
        return {
            "type": kind,
            "n_per_class": _field(doc, "n_per_class", where, _is_int, "an integer", required=True),
            "n_features": _field(doc, "n_features", where, _is_int, "an integer", required=True),
            "separation": _field(doc, "separation", where, _is_real, "a number", required=True),
            "seed": _field(doc, "seed", where, _is_int, "an integer", default=0),
        }
    if kind == "csv":
        _check_keys(doc, ("type", "path"), where)
        return {"type": kind,
                "path": _field(doc, "path", where, lambda v: isinstance(v, str), "a string",
                               required=True)}
    if kind == "idx":
        _check_keys(doc, ("type", "images", "labels", "limit"), where)
        return {
            "type": kind,
            "images": _field(doc, "images", where, lambda v: isinstance(v, str), "a string",
                             required=True),
            "labels": _field(doc, "labels", where, lambda v: isinstance(v, str), "a string",
                             required=True),
            "limit": _field(doc, "limit", where, _is_int, "an integer", default=None),
        }
    raise ConfigError(f"{where}: dataset type must be synthetic, csv or idx, got {kind!r}")


def _parse_train(doc, where: str) -> TrainConfig:
    _check_keys(doc, ("learning_rate", "momentum", "batch_size", "max_epochs",
                      "patience", "validation_fraction"), where)
    defaults = TrainConfig()
    try:
        return TrainConfig(
            learning_rate=_field(doc, "learning_rate", where, _is_real, "a number",
                                 default=defaults.learning_rate),
            momentum=_field(doc, "momentum", where, _is_real, "a number",
                            default=defaults.momentum),
            batch_size=_field(doc, "batch_size", where, _is_int, "an integer",
                              default=defaults.batch_size),
            max_epochs=_field(doc, "max_epochs", where, _is_int, "an integer",
                              default=defaults.max_epochs),
            patience=_field(doc, "patience", where, _is_int, "an integer",
                            default=defaults.patience),
            validation_fraction=_field(doc, "validation_fraction", where, _is_real, "a number",
                                       default=defaults.validation_fraction),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _parse_evolution(doc, where: str) -> EvolutionConfig:
    _check_keys(doc, ("generations", "retention_per_generation", "inherit_weights",
                      "stop_on_metric_drop", "master_seed", "precision", "train"), where)
    defaults = EvolutionConfig()
    precision = PrecisionPolicy()
    if "precision" in doc:
        sub = doc["precision"]
        pwhere = f"{where}: precision"
        if not isinstance(sub, dict):
            raise ConfigError(f"{pwhere}: must be an object")
        _check_keys(sub, ("overflow",), pwhere)
        overflow = _field(sub, "overflow", pwhere, lambda v: isinstance(v, str), "a string",
                          default=SATURATE)
        if overflow not in HALF_OVERFLOW_MODES:
            raise ConfigError(f"{pwhere}: overflow must be one of {', '.join(HALF_OVERFLOW_MODES)}")
        precision = PrecisionPolicy(overflow=overflow)
    train_cfg = TrainConfig()
    if "train" in doc:
        sub = doc["train"]
        if not isinstance(sub, dict):
            raise ConfigError(f"{where}: train must be an object")
        train_cfg = _parse_train(sub, f"{where}: train")
    drop = defaults.stop_on_metric_drop
    if "stop_on_metric_drop" in doc:
        value = doc["stop_on_metric_drop"]
        if value is not None and not _is_real(value):
            raise ConfigError(f"{where}: stop_on_metric_drop must be a number or null")
        drop = value
    try:
        return EvolutionConfig(
            generations=_field(doc, "generations", where, _is_int, "an integer",
                               default=defaults.generations),
            retention_per_generation=_field(doc, "retention_per_generation", where, _is_real,
                                            "a number", default=defaults.retention_per_generation),
            train=train_cfg,
            precision=precision,
            inherit_weights=_field(doc, "inherit_weights", where,
                                   lambda v: isinstance(v, bool), "a boolean",
                                   default=defaults.inherit_weights),
            stop_on_metric_drop=drop,
            master_seed=_field(doc, "master_seed", where, _is_int, "an integer",
                               default=defaults.master_seed),
        )
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class RunConfig:
    layer_specs: list[LayerSpec]
    dataset_source: dict
    evolution: EvolutionConfig
    out_dir: str | None


def _load_json(path: str, where: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {where} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where} {path} is not valid JSON: {exc}") from exc


def load_run_config(path: str) -> RunConfig:
    doc = _load_json(path, "config")
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path}: top level must be an object")
    where = f"config {path}"
    _check_keys(doc, ("layers", "dataset", "evolution", "out_dir"), where)
    if "layers" not in doc or "dataset" not in doc:
        raise ConfigError(f"{where}: keys layers and dataset are required")
    evolution = EvolutionConfig()
    if "evolution" in doc:
        if not isinstance(doc["evolution"], dict):
            raise ConfigError(f"{where}: evolution must be an object")
        evolution = _parse_evolution(doc["evolution"], f"{where}: evolution")
    out_dir = _field(doc, "out_dir", where, lambda v: isinstance(v, str), "a string")
    return RunConfig(
        layer_specs=_parse_layers(doc["layers"], where),
        dataset_source=_parse_dataset_source(doc["dataset"], f"{where}: dataset"),
        evolution=evolution,
        out_dir=out_dir,
    )


def build_dataset(source: dict) -> Dataset:
    if source["type"] == "synthetic":
        return synth_gaussians(source["n_per_class"], source["n_features"],
                               float(source["separation"]), source["seed"])
    if source["type"] == "csv":
        return load_csv_dataset(source["path"])
    return load_idx(source["images"], source["labels"], source["limit"])


def _load_data_arg(arg: str) -> Dataset:
    """--data accepts a CSV path or a JSON dataset-source document."""
    if arg.endswith(".csv"):
        return load_csv_dataset(arg)
    doc = _load_json(arg, "data source")
    return build_dataset(_parse_dataset_source(doc, f"data source {arg}"))


# deterministic SVG line charts


_SVG_W, _SVG_H = 800, 500
_PLOT = (70.0, 40.0, float(_SVG_W - 20), float(_SVG_H - 55))  # left, top, right, bottom
_COLORS = ("#1f77b4", "#d62728")


def _coord(v: float) -> str:
    return f"{v:.2f}"


def _tick(v: float) -> str:
    return f"{v:.6g}"


def _project(value: float, lo: float, hi: float, a: float, b: float) -> float:
    t = 0.5 if hi == lo else (value - lo) / (hi - lo)
    return a + t * (b - a)


def write_line_chart(path: str, title: str, x_label: str, y_label: str,
                     series: list[tuple[str, list[float], list[float]]]) -> None:
    """Self-contained 800x500 SVG with min/max axis ticks; byte-deterministic."""
    left, top, right, bottom = _PLOT
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SVG_W}" height="{_SVG_H}" '
        f'viewBox="0 0 {_SVG_W} {_SVG_H}">',
        f'<rect width="{_SVG_W}" height="{_SVG_H}" fill="#ffffff"/>',
        f'<text x="{_SVG_W // 2}" y="24" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">{title}</text>',
        f'<line x1="{_coord(left)}" y1="{_coord(bottom)}" x2="{_coord(right)}" '
        f'y2="{_coord(bottom)}" stroke="#000000"/>',
        f'<line x1="{_coord(left)}" y1="{_coord(top)}" x2="{_coord(left)}" '
        f'y2="{_coord(bottom)}" stroke="#000000"/>',
        f'<text x="{_coord(left)}" y="{_coord(bottom + 18)}" font-family="sans-serif" '
        f'font-size="11" text-anchor="middle">{_tick(x_lo)}</text>',
        f'<text x="{_coord(right)}" y="{_coord(bottom + 18)}" font-family="sans-serif" '
        f'font-size="11" text-anchor="middle">{_tick(x_hi)}</text>',
        f'<text x="{_coord(left - 6)}" y="{_coord(bottom + 4)}" font-family="sans-serif" '
        f'font-size="11" text-anchor="end">{_tick(y_lo)}</text>',
        f'<text x="{_coord(left - 6)}" y="{_coord(top + 4)}" font-family="sans-serif" '
        f'font-size="11" text-anchor="end">{_tick(y_hi)}</text>',
        f'<text x="{_coord((left + right) / 2)}" y="{_SVG_H - 12}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle">{x_label}</text>',
        f'<text x="16" y="{_coord((top + bottom) / 2)}" font-family="sans-serif" '
        f'font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {_coord((top + bottom) / 2)})">{y_label}</text>',
    ]
    for idx, (name, sx, sy) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        points = []
        for x, y in zip(sx, sy):
            px = _project(x, x_lo, x_hi, left, right)
            py = _project(y, y_lo, y_hi, bottom, top)
            points.append((px, py))
        if len(points) > 1:
            joined = " ".join(f"{_coord(px)},{_coord(py)}" for px, py in points)
            parts.append(f'<polyline points="{joined}" fill="none" stroke="{color}" '
                         f'stroke-width="2"/>')
        for px, py in points:
            parts.append(f'<circle cx="{_coord(px)}" cy="{_coord(py)}" r="3" fill="{color}"/>')
        parts.append(f'<text x="{_coord(right - 8)}" y="{_coord(top + 16 + 16 * idx)}" '
                     f'font-family="sans-serif" font-size="12" text-anchor="end" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


# subcommands


def _make_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create directory {path}: {exc}") from exc


def cmd_evolve(args) -> int:
    run_cfg = load_run_config(args.config)
    cfg = run_cfg.evolution
    if args.seed is not None:
        try:
            cfg = replace(cfg, master_seed=args.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    out_dir = args.out or run_cfg.out_dir
    if out_dir is None:
        raise ConfigError("no output directory: set out_dir in the config or pass --out")
    dataset = build_dataset(run_cfg.dataset_source)
    _make_dir(out_dir)
    lineage = evolve(run_cfg.layer_specs, dataset, cfg, out_dir=out_dir)
    first, last = lineage.records[0], lineage.records[-1]
    summary = {
        "stop_reason": lineage.stop_reason,
        "generations_requested": cfg.generations,
        "generations_run": len(lineage.records),
        "master_seed": cfg.master_seed,
        "active_synapses_first": first.active_synapses,
        "active_synapses_last": last.active_synapses,
        "synapse_reduction_ratio": first.active_synapses / last.active_synapses,
        "macs_first": first.macs,
        "macs_last": last.macs,
        "macs_speedup_proxy": first.macs / last.macs,
        "precision_first": first.precision_metric,
        "precision_last": last.precision_metric,
        "recall_first": first.recall_metric,
        "recall_last": last.recall_metric,
        "f1_first": first.f1,
        "f1_last": last.f1,
    }
    path = os.path.join(out_dir, "run_summary.json")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=1, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
    print(f"{len(lineage.records)} generation(s) written to {out_dir} ({lineage.stop_reason})")
    return 0


def cmd_quantize(args) -> int:
    meta = load_model_meta(args.model)
    if meta.precision != "binary32":
        raise IntegrityError(f"{args.model}: expected a binary32 model, found {meta.precision}")
    net = load_model(args.model)
    policy = PrecisionPolicy(overflow=TO_INFINITY if args.overflow == "inf" else SATURATE)
    quantized = quantize_network(net, policy)
    max_abs = 0.0
    max_rel = 0.0
    for before, after in zip(net.layers, quantized.layers):
        active = before.mask != 0
        if not active.any():
            continue
        orig = before.weights[active].astype(np.float64)
        quant = after.weights[active].astype(np.float64)
        err = np.abs(quant - orig)
        max_abs = max(max_abs, float(err.max()))
        nonzero = orig != 0
        if nonzero.any():
            max_rel = max(max_rel, float((err[nonzero] / np.abs(orig[nonzero])).max()))
    save_model(quantized, args.out, seed=meta.seed, alpha_history=meta.alpha_history)
    print(json.dumps({"max_abs_error": max_abs, "max_rel_error": max_rel}))
    return 0


def cmd_metrics(args) -> int:
    if not 0.0 < args.validation_fraction < 1.0:
        raise ConfigError("--validation-fraction must be in (0, 1)")
    net = load_model(args.model)
    meta = load_model_meta(args.model)
    dataset = _load_data_arg(args.data)
    if args.split == "val":
        # same derivation evolve uses: generation seed -> training substream
        train_seed = substream(meta.seed, 1)
        _, val_idx = validation_split(len(dataset), args.validation_fraction, train_seed)
        features, labels = dataset.features[val_idx], dataset.labels[val_idx]
    else:
        features, labels = dataset.features, dataset.labels
    result = evaluate_classifier(net, features, labels)
    result["active_synapses"] = count_active_synapses(net)
    result["macs"] = inference_cost(net)
    print(json.dumps(result, indent=1))
    return 0


def cmd_report(args) -> int:
    rows = load_lineage_report(args.lineage)
    _make_dir(args.svg_out)
    gens = [float(r["generation"]) for r in rows]
    write_line_chart(
        os.path.join(args.svg_out, "synapses_macs.svg"),
        "Active synapses and MACs by generation", "generation", "count",
        [("active_synapses", gens, [float(r["active_synapses"]) for r in rows]),
         ("macs", gens, [float(r["macs"]) for r in rows])],
    )
    write_line_chart(
        os.path.join(args.svg_out, "precision_recall.svg"),
        "Precision and recall by generation", "generation", "metric",
        [("precision", gens, [r["precision"] for r in rows]),
         ("recall", gens, [r["recall"] for r in rows])],
    )
    first, last = rows[0], rows[-1]
    print(json.dumps({
        "synapse_reduction_ratio": first["active_synapses"] / last["active_synapses"],
        "macs_speedup_proxy": first["macs"] / last["macs"],
    }))
    return 0


def cmd_inspect(args) -> int:
    net = load_model(args.model)
    meta = load_model_meta(args.model)
    print(json.dumps({
        "generation": net.generation,
        "precision": meta.precision,
        "layers": [{"in_dim": l.weights.shape[1], "out_dim": l.weights.shape[0],
                    "activation": l.activation} for l in net.layers],
        "active_synapses": count_active_synapses(net),
        "total_synapses": sum(l.weights.size for l in net.layers),
        "macs": inference_cost(net),
        "seed": meta.seed,
        "alpha_history": meta.alpha_history,
    }, indent=1))
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; the contract is 1."""

    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="evosynth",
                     description="Evolutionary synthesis of sparse half-precision networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evolve", help="run an evolution from a JSON config")
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="output directory (overrides config out_dir)")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("quantize", help="convert a binary32 model file to binary16")
    p.add_argument("--model", required=True, help="input model (binary32 variant)")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--overflow", choices=("saturate", "inf"), default="saturate",
                   help="finite values beyond binary16 range: clamp or overflow to infinity")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("metrics", help="evaluate a stored model on a dataset")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--data", required=True,
                   help="CSV dataset path or JSON dataset-source document")
    p.add_argument("--split", choices=("val", "full"), default="val",
                   help="evaluate on the model's validation split (default) or the full dataset")
    p.add_argument("--validation-fraction", type=float, default=0.2,
                   help="fraction used when deriving the validation split")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("report", help="render lineage charts and summary ratios")
    p.add_argument("--lineage", required=True, help="lineage.csv path")
    p.add_argument("--svg-out", required=True, help="directory for the SVG charts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("inspect", help="print a model's shape and bookkeeping")
    p.add_argument("--model", required=True, help="model file")
    p.set_defaults(func=cmd_inspect)

    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (ConfigError, InvalidParam, InvalidSpec, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(run())
