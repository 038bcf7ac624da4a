"""Dense feedforward networks with per-synapse masks.

A network is a stack of dense layers, each carrying a binary mask of the
same shape as its weight matrix. Masked-off weights are exactly 0.0 and
stay exactly 0.0 through any amount of training: gradients are zeroed at
masked positions, so SGD never moves them.

Parameters are stored as binary32. Forward passes, losses and gradients
are computed in binary64 over those stored values, which keeps analytic
gradients within finite-difference checking tolerance; updates are written
back to binary32 at the end of training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import (
    DatasetTooSmall,
    InvalidLabel,
    InvalidSpec,
    NumericFailure,
    ShapeMismatch,
)
from .rng import permutation, substream, uniform_block

if TYPE_CHECKING:
    from .dataio import Dataset

ACTIVATIONS = ("relu", "sigmoid")

FULL = "full"
HALF = "half"


@dataclass(frozen=True)
class LayerSpec:
    """Shape and hidden activation of one dense layer.

    The activation applies to hidden layers only; the final layer always
    ends in softmax regardless of what its spec says.
    """

    in_dim: int
    out_dim: int
    activation: str = "relu"


@dataclass
class DenseLayer:
    weights: np.ndarray  # float32, [out_dim, in_dim]
    mask: np.ndarray     # uint8 in {0, 1}, same shape as weights
    bias: np.ndarray     # float32, [out_dim]
    activation: str = "relu"

    def copy(self) -> "DenseLayer":
        return DenseLayer(self.weights.copy(), self.mask.copy(), self.bias.copy(), self.activation)


@dataclass
class SynapseMask:
    """Per-layer binary matrices congruent with a network's weight shapes.

    A valid mask keeps at least one synapse per layer; synthesis repair
    guarantees this for every mask it emits.
    """

    layers: list[np.ndarray]  # uint8 in {0, 1}


@dataclass
class Network:
    """Immutable by convention: operations return new networks."""

    layers: list[DenseLayer]
    generation: int = 1
    precision_tag: str = FULL

    @property
    def in_dim(self) -> int:
        return self.layers[0].weights.shape[1]

    @property
    def n_classes(self) -> int:
        return self.layers[-1].weights.shape[0]

    def copy(self) -> "Network":
        return Network([l.copy() for l in self.layers], self.generation, self.precision_tag)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    validation_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be non-negative")
        if self.patience < 1:
            raise ValueError("patience must be positive")
        if not 0 < self.validation_fraction < 1:
            raise ValueError("validation_fraction must be in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass
class TrainingLog:
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0  # 0 means the pre-training state
    stopped_early: bool = False


@dataclass
class Gradients:
    """Mean cross-entropy gradients, congruent with a network's layers."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float


def _check_spec(spec: Sequence[LayerSpec]) -> None:
    if not spec:
        raise InvalidSpec("layer spec is empty")
    for i, s in enumerate(spec):
        if s.in_dim < 1 or s.out_dim < 1:
            raise InvalidSpec(f"layer {i}: dimensions must be >= 1, got {s.in_dim}x{s.out_dim}")
        if s.activation not in ACTIVATIONS:
            raise InvalidSpec(f"layer {i}: unknown activation {s.activation!r}")
    for i in range(len(spec) - 1):
        if spec[i].out_dim != spec[i + 1].in_dim:
            raise InvalidSpec(
                f"layer {i} out_dim {spec[i].out_dim} != layer {i + 1} in_dim {spec[i + 1].in_dim}"
            )


def init_network(spec: Sequence[LayerSpec], seed: int) -> Network:
    """Generation-1 ancestor: Glorot-uniform weights, zero biases, all-ones mask.

    Weights are drawn uniformly in +-sqrt(6 / (in_dim + out_dim)) from one
    deterministic stream, consumed layer by layer in row-major order.
    """
    _check_spec(spec)
    total = sum(s.in_dim * s.out_dim for s in spec)
    draws = uniform_block(seed, total)
    layers = []
    offset = 0
    for s in spec:
        n = s.in_dim * s.out_dim
        limit = np.sqrt(6.0 / (s.in_dim + s.out_dim))
        w = ((2.0 * draws[offset:offset + n] - 1.0) * limit).astype(np.float32)
        offset += n
        layers.append(
            DenseLayer(
                weights=w.reshape(s.out_dim, s.in_dim),
                mask=np.ones((s.out_dim, s.in_dim), dtype=np.uint8),
                bias=np.zeros(s.out_dim, dtype=np.float32),
                activation=s.activation,
            )
        )
    return Network(layers=layers, generation=1, precision_tag=FULL)


# float64 compute kernels over parameter lists


def _apply_activation(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return 1.0 / (1.0 + np.exp(-z))


def _activation_grad(a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (a > 0.0).astype(np.float64)
    return a * (1.0 - a)


def _forward_core(ws, bs, acts, x):
    """Returns (per-layer post-activations incl. input, logits)."""
    a = x
    activations = [a]
    logits = None
    for i, (w, b) in enumerate(zip(ws, bs)):
        z = a @ w.T + b
        if i == len(ws) - 1:
            logits = z
        else:
            a = _apply_activation(z, acts[i])
            activations.append(a)
    return activations, logits


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=1, keepdims=True))


def _masked(weights: np.ndarray, mask: np.ndarray) -> np.ndarray:
    # np.where, not multiplication: -w * 0 would leave a negative zero,
    # which is not the canonical bit pattern masked slots must hold
    return np.where(mask != 0, weights, weights.dtype.type(0.0))


def _working_params(net: Network):
    ws = [_masked(l.weights, l.mask).astype(np.float64) for l in net.layers]
    bs = [l.bias.astype(np.float64) for l in net.layers]
    acts = [l.activation for l in net.layers]
    return ws, bs, acts


def _check_batch(net: Network, inputs: np.ndarray, labels: np.ndarray):
    if inputs.ndim != 2 or inputs.shape[1] != net.in_dim:
        raise ShapeMismatch(
            f"batch features must be [n, {net.in_dim}], got {inputs.shape}"
        )
    if len(labels) != len(inputs) or len(inputs) == 0:
        raise ShapeMismatch("batch is empty or labels do not match inputs")
    if np.any(labels < 0) or np.any(labels >= net.n_classes):
        raise InvalidLabel(f"labels must be in [0, {net.n_classes})")


def forward(net: Network, input: Sequence[float]) -> np.ndarray:
    """Class probabilities for one input vector (softmax over the last layer)."""
    x = np.asarray(input, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.in_dim:
        raise ShapeMismatch(f"input must have length {net.in_dim}, got shape {x.shape}")
    ws, bs, acts = _working_params(net)
    _, logits = _forward_core(ws, bs, acts, x[None, :])
    probs = np.exp(_log_softmax(logits))[0]
    return probs.astype(np.float32)


def forward_batch(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch, [n, n_classes] float32."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeMismatch(f"batch features must be [n, {net.in_dim}], got {x.shape}")
    ws, bs, acts = _working_params(net)
    _, logits = _forward_core(ws, bs, acts, x)
    return np.exp(_log_softmax(logits)).astype(np.float32)


def mean_loss(net: Network, batch_inputs: np.ndarray, batch_labels: np.ndarray) -> float:
    """Mean cross-entropy of the batch under the network's predictions."""
    x = np.asarray(batch_inputs, dtype=np.float64)
    y = np.asarray(batch_labels, dtype=np.int64)
    _check_batch(net, x, y)
    ws, bs, acts = _working_params(net)
    _, logits = _forward_core(ws, bs, acts, x)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(y)), y].mean())


def _backprop(ws, bs, acts, masks, x, y):
    n = len(y)
    activations, logits = _forward_core(ws, bs, acts, x)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(n), y].mean())
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    w_grads = [None] * len(ws)
    b_grads = [None] * len(ws)
    for i in range(len(ws) - 1, -1, -1):
        w_grads[i] = (dz.T @ activations[i]) * masks[i]
        b_grads[i] = dz.sum(axis=0)
        if i > 0:
            dz = (dz @ ws[i]) * _activation_grad(activations[i], acts[i - 1])
    return w_grads, b_grads, loss


def gradients(net: Network, batch_inputs: np.ndarray, batch_labels: np.ndarray) -> Gradients:
    """Mean cross-entropy gradients for every weight and bias.

    Entries at masked-off positions are exactly 0.0.
    """
    x = np.asarray(batch_inputs, dtype=np.float64)
    y = np.asarray(batch_labels, dtype=np.int64)
    _check_batch(net, x, y)
    ws, bs, acts = _working_params(net)
    masks = [l.mask.astype(np.float64) for l in net.layers]
    w_grads, b_grads, loss = _backprop(ws, bs, acts, masks, x, y)
    return Gradients(weights=w_grads, biases=b_grads, loss=loss)


def validation_split(n_samples: int, fraction: float, seed: int):
    """Deterministic (train_indices, val_indices) split used by ``train``.

    One permutation is drawn from substream 0 of ``seed``; the first
    ``max(1, floor(fraction * n))`` entries are the validation set.
    """
    perm = permutation(n_samples, substream(seed, 0))
    n_val = max(1, int(fraction * n_samples))
    return perm[n_val:], perm[:n_val]


def train(net: Network, dataset: "Dataset", cfg: TrainConfig) -> tuple[Network, TrainingLog]:
    """Mini-batch SGD with momentum on the masked weights.

    Stops early when validation loss has not improved for ``cfg.patience``
    epochs and returns the parameters of the best validation epoch (the
    pre-training state counts as epoch 0). Fully deterministic given
    ``cfg.seed``: the validation split comes from substream 0 and epoch
    ``e``'s shuffle from substream ``e``.
    """
    x = np.asarray(dataset.features, dtype=np.float64)
    y = np.asarray(dataset.labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeMismatch(f"dataset features must be [n, {net.in_dim}], got {x.shape}")
    if np.any(y < 0) or np.any(y >= net.n_classes):
        raise InvalidLabel(f"labels must be in [0, {net.n_classes})")
    if len(np.unique(y)) < 2:
        raise ValueError("dataset must contain at least 2 represented classes")

    train_idx, val_idx = validation_split(len(y), cfg.validation_fraction, cfg.seed)
    if len(train_idx) < cfg.batch_size:
        raise DatasetTooSmall(
            f"{len(train_idx)} training samples after the validation split, "
            f"need at least one batch of {cfg.batch_size}"
        )
    x_val, y_val = x[val_idx], y[val_idx]

    ws, bs, acts = _working_params(net)
    masks = [l.mask.astype(np.float64) for l in net.layers]
    vel_w = [np.zeros_like(w) for w in ws]
    vel_b = [np.zeros_like(b) for b in bs]

    def val_loss_of(cur_ws, cur_bs) -> float:
        _, logits = _forward_core(cur_ws, cur_bs, acts, x_val)
        logp = _log_softmax(logits)
        return float(-logp[np.arange(len(y_val)), y_val].mean())

    log = TrainingLog()
    best_val = val_loss_of(ws, bs)
    best_ws = [w.copy() for w in ws]
    best_bs = [b.copy() for b in bs]
    epochs_since_best = 0

    for epoch in range(1, cfg.max_epochs + 1):
        order = permutation(len(train_idx), substream(cfg.seed, epoch))
        shuffled = train_idx[order]
        loss_sum = 0.0
        for start in range(0, len(shuffled), cfg.batch_size):
            idx = shuffled[start:start + cfg.batch_size]
            w_grads, b_grads, loss = _backprop(ws, bs, acts, masks, x[idx], y[idx])
            if not np.isfinite(loss):
                raise NumericFailure(f"non-finite training loss at epoch {epoch}")
            loss_sum += loss * len(idx)
            for i in range(len(ws)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * w_grads[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * b_grads[i]
                ws[i] += vel_w[i]
                bs[i] += vel_b[i]
        for w in ws:
            if not np.all(np.isfinite(w)):
                raise NumericFailure(f"non-finite weight at epoch {epoch}")
        epoch_val = val_loss_of(ws, bs)
        if not np.isfinite(epoch_val):
            raise NumericFailure(f"non-finite validation loss at epoch {epoch}")
        log.train_losses.append(loss_sum / len(shuffled))
        log.val_losses.append(epoch_val)
        if epoch_val < best_val:
            best_val = epoch_val
            best_ws = [w.copy() for w in ws]
            best_bs = [b.copy() for b in bs]
            log.best_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= cfg.patience:
                log.stopped_early = True
                break

    layers = [
        DenseLayer(
            weights=_masked(best_ws[i], masks[i]).astype(np.float32),
            mask=net.layers[i].mask.copy(),
            bias=best_bs[i].astype(np.float32),
            activation=net.layers[i].activation,
        )
        for i in range(len(net.layers))
    ]
    return Network(layers=layers, generation=net.generation, precision_tag=FULL), log


def count_active_synapses(net: Network) -> int:
    """Sum of mask entries over all layers. Biases are not synapses."""
    return int(sum(int(l.mask.sum()) for l in net.layers))


def inference_cost(net: Network) -> int:
    """Multiply-accumulate count: one MAC per active synapse plus one add per bias."""
    return count_active_synapses(net) + sum(l.bias.shape[0] for l in net.layers)


def evaluate_classifier(net: Network, features: np.ndarray, labels: np.ndarray) -> dict:
    """Accuracy, confusion matrix and per-class plus macro precision/recall/f1.

    Confusion rows are true classes, columns predicted classes. Undefined
    ratios (0/0) are reported as 0. The macro f1 is the harmonic mean of
    macro precision and macro recall.
    """
    probs = forward_batch(net, features)
    y = np.asarray(labels, dtype=np.int64)
    if np.any(y < 0) or np.any(y >= net.n_classes):
        raise InvalidLabel(f"labels must be in [0, {net.n_classes})")
    preds = probs.argmax(axis=1)
    c = net.n_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (y, preds), 1)
    precision, recall, f1 = [], [], []
    for k in range(c):
        tp = confusion[k, k]
        predicted = confusion[:, k].sum()
        actual = confusion[k, :].sum()
        p = float(tp / predicted) if predicted > 0 else 0.0
        r = float(tp / actual) if actual > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(2.0 * p * r / (p + r) if p + r > 0 else 0.0)
    macro_p = float(np.mean(precision))
    macro_r = float(np.mean(recall))
    return {
        "accuracy": float((preds == y).mean()),
        "confusion": confusion.tolist(),
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "macro_precision": macro_p,
        "macro_recall": macro_r,
        "macro_f1": 2.0 * macro_p * macro_r / (macro_p + macro_r) if macro_p + macro_r > 0 else 0.0,
    }
