"""Generational loop: synthesize, inherit, train, quantize, record.

Generation 1 is a trained, quantized ancestor. Every later generation
samples its topology from the parent's DNA under a calibrated
environmental factor, inherits surviving weights (or re-initializes),
trains at full precision and is then constrained to binary16. Because
DNA assigns probability 0 to absent synapses, active counts never grow.

All randomness flows from one master seed. Generation g draws its seed
via ``derive_seed``; substream 0 of that seed drives synthesis,
substream 1 the training run and substream 2 fresh initialization.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

import numpy as np

from .dataio import Dataset, save_lineage_report, save_model
from .errors import DeadLayer
from .genetics import calibrate_alpha, encode_dna, synthesize_offspring
from .halfprec import PrecisionPolicy, quantize_network
from .netcore import (
    FULL,
    DenseLayer,
    LayerSpec,
    Network,
    TrainConfig,
    count_active_synapses,
    evaluate_classifier,
    inference_cost,
    init_network,
    mean_loss,
    train,
    validation_split,
)
from .rng import substream

COMPLETED = "completed"
STOP_METRIC_DROP = "metric_drop"
STOP_DEAD_LAYER = "dead_layer"


def derive_seed(master_seed: int, g: int) -> int:
    """Seed for generation g: the splitmix64 substream of the master seed.

    Avalanche-quality 64-bit mixing; derive_seed(0, 0) equals the
    splitmix64 finalizer of its golden-ratio increment,
    0xE220A8397B1DCDAF.
    """
    return substream(master_seed, g)


@dataclass(frozen=True)
class EvolutionConfig:
    generations: int = 13
    retention_per_generation: float = 0.84
    train: TrainConfig = field(default_factory=TrainConfig)
    precision: PrecisionPolicy = field(default_factory=PrecisionPolicy)
    inherit_weights: bool = True
    stop_on_metric_drop: float | None = 0.10
    master_seed: int = 0

    def __post_init__(self):
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not 0.0 < self.retention_per_generation <= 1.0:
            raise ValueError("retention_per_generation must be in (0, 1]")
        if self.stop_on_metric_drop is not None and self.stop_on_metric_drop < 0:
            raise ValueError("stop_on_metric_drop must be non-negative or None")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass
class GenerationRecord:
    """One lineage row. Metrics are macro averages over the validation split
    of the stored (quantized) model; train_loss is the pre-quantization
    network's mean loss over its training split."""

    generation: int
    alpha_used: float
    active_synapses: int
    total_synapses: int
    macs: int
    train_loss: float
    precision_metric: float
    recall_metric: float
    f1: float
    seed: int
    model_path: str


@dataclass
class Lineage:
    records: list[GenerationRecord]
    config: EvolutionConfig
    stop_reason: str = COMPLETED


def _spec_of(net: Network) -> list[LayerSpec]:
    return [
        LayerSpec(in_dim=l.weights.shape[1], out_dim=l.weights.shape[0], activation=l.activation)
        for l in net.layers
    ]


def _train_quantize_record(child: Network, dataset: Dataset, cfg: EvolutionConfig,
                           g: int, alpha_used: float, seed_g: int):
    train_cfg = replace(cfg.train, seed=substream(seed_g, 1))
    trained, _ = train(child, dataset, train_cfg)
    quantized = quantize_network(trained, cfg.precision)
    train_idx, val_idx = validation_split(
        len(dataset), train_cfg.validation_fraction, train_cfg.seed
    )
    metrics = evaluate_classifier(quantized, dataset.features[val_idx], dataset.labels[val_idx])
    record = GenerationRecord(
        generation=g,
        alpha_used=alpha_used,
        active_synapses=count_active_synapses(quantized),
        total_synapses=sum(l.weights.size for l in quantized.layers),
        macs=inference_cost(quantized),
        train_loss=mean_loss(trained, dataset.features[train_idx], dataset.labels[train_idx]),
        precision_metric=metrics["macro_precision"],
        recall_metric=metrics["macro_recall"],
        f1=metrics["macro_f1"],
        seed=seed_g,
        model_path=f"gen_{g}.json",
    )
    return quantized, record


def step_generation(parent: Network, dataset: Dataset, cfg: EvolutionConfig,
                    g: int) -> tuple[Network, GenerationRecord]:
    """Produce and evaluate generation g (g >= 2) from its trained parent."""
    if g < 2:
        raise ValueError("step_generation applies to generations >= 2")
    dna = encode_dna(parent)
    cal = calibrate_alpha(dna, cfg.retention_per_generation)
    seed_g = derive_seed(cfg.master_seed, g)
    mask = synthesize_offspring(dna, cal.env, substream(seed_g, 0))
    base = parent if cfg.inherit_weights else init_network(_spec_of(parent), substream(seed_g, 2))
    layers = []
    for i, layer in enumerate(parent.layers):
        m = mask.layers[i]
        # np.where keeps dropped slots at canonical +0.0; w * 0 can yield -0.0
        layers.append(DenseLayer(
            weights=np.where(m != 0, base.layers[i].weights, np.float32(0.0)).astype(np.float32),
            mask=m.copy(),
            bias=base.layers[i].bias.copy(),
            activation=layer.activation,
        ))
    child = Network(layers=layers, generation=g, precision_tag=FULL)
    return _train_quantize_record(child, dataset, cfg, g, cal.env.alpha, seed_g)


def _persist(net: Network, record: GenerationRecord, out_dir: str | None,
             alpha_history: list[float]) -> None:
    if out_dir is not None:
        save_model(net, os.path.join(out_dir, record.model_path),
                   seed=record.seed, alpha_history=alpha_history)


def evolve(spec: list[LayerSpec], dataset: Dataset, cfg: EvolutionConfig,
           out_dir: str | None = None) -> Lineage:
    """Run the full lineage; optionally persist one model file per generation.

    An offspring whose macro f1 falls more than ``stop_on_metric_drop``
    below generation 1, or whose synthesis hits a dead layer, ends the
    run: the lineage keeps only the generations before it and records the
    stop reason. Model files are named ``gen_<g>.json``; the report is
    ``lineage.csv``.
    """
    seed_1 = derive_seed(cfg.master_seed, 1)
    ancestor = init_network(spec, substream(seed_1, 2))
    current, record = _train_quantize_record(ancestor, dataset, cfg, 1, 1.0, seed_1)
    records = [record]
    alpha_history = [record.alpha_used]
    _persist(current, record, out_dir, alpha_history)
    stop_reason = COMPLETED
    for g in range(2, cfg.generations + 1):
        try:
            child, rec = step_generation(current, dataset, cfg, g)
        except DeadLayer:
            stop_reason = STOP_DEAD_LAYER
            break
        if cfg.stop_on_metric_drop is not None and rec.f1 < records[0].f1 - cfg.stop_on_metric_drop:
            stop_reason = STOP_METRIC_DROP
            break
        records.append(rec)
        alpha_history.append(rec.alpha_used)
        _persist(child, rec, out_dir, alpha_history)
        current = child
    lineage = Lineage(records=records, config=cfg, stop_reason=stop_reason)
    if out_dir is not None:
        save_lineage_report(lineage, os.path.join(out_dir, "lineage.csv"))
    return lineage
