"""Genetic encoding of trained networks and stochastic offspring synthesis.

The DNA of a network is a per-synapse survival probability derived from
weight magnitudes: within each layer, p = |w| / max|w| over the active
synapses. An environmental factor alpha scales those probabilities down
(never up), and an offspring topology is drawn one Bernoulli trial per
synapse. Synapses absent in the parent have probability 0, so topology
can only sparsify across generations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DeadLayer
from .netcore import Network, SynapseMask
from .rng import uniform_block


@dataclass
class SynapticProbabilityModel:
    """Per-layer survival probabilities, congruent with the source network.

    Entries are in [0, 1]; each layer's maximum-magnitude active synapse
    has probability exactly 1, and masked or zero synapses have exactly 0.
    """

    layers: list[np.ndarray]  # float64 in [0, 1]
    source_generation: int


@dataclass(frozen=True)
class EnvironmentalFactor:
    """Global survival scale in (0, 1], with optional per-layer overrides."""

    alpha: float
    layer_overrides: Mapping[int, float] | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.layer_overrides:
            for idx, a in self.layer_overrides.items():
                if not 0.0 < a <= 1.0:
                    raise ValueError(f"override for layer {idx} must be in (0, 1], got {a}")

    def layer_alpha(self, index: int) -> float:
        if self.layer_overrides and index in self.layer_overrides:
            return self.layer_overrides[index]
        return self.alpha


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of inverting expected density for a target retention.

    ``saturated`` means the target sits above what alpha = 1 can reach, so
    the returned factor is the identity and the realized expectation is
    ``expected`` rather than the target.
    """

    env: EnvironmentalFactor
    expected: float
    saturated: bool
    iterations: int


def encode_dna(net: Network) -> SynapticProbabilityModel:
    """Layer-normalized magnitude probabilities: p = |w| / max_active |w|.

    Raises DeadLayer when a layer has no active synapse with nonzero
    weight, since its probabilities would be undefined (0/0).
    """
    layers = []
    for i, layer in enumerate(net.layers):
        mag = np.abs(layer.weights.astype(np.float64)) * layer.mask
        peak = mag.max()
        if peak == 0.0:
            raise DeadLayer(f"layer {i} has no active nonzero synapse")
        layers.append(mag / peak)
    return SynapticProbabilityModel(layers=layers, source_generation=net.generation)


def synthesis_probability(dna: SynapticProbabilityModel, env: EnvironmentalFactor) -> list[np.ndarray]:
    """Per-synapse sampling probabilities q = min(1, alpha * p)."""
    if env.layer_overrides:
        for idx in env.layer_overrides:
            if not 0 <= idx < len(dna.layers):
                raise ValueError(f"override for layer {idx}, model has {len(dna.layers)} layers")
    return [np.minimum(1.0, env.layer_alpha(i) * p) for i, p in enumerate(dna.layers)]


def synthesize_offspring(dna: SynapticProbabilityModel, env: EnvironmentalFactor, seed: int) -> SynapseMask:
    """One independent Bernoulli(q) draw per synapse, then neuron repair.

    Draws come from a single deterministic stream consumed layer-major and
    row-major within each layer. Repair: an output neuron whose sampled
    row is all zeros gets its highest-q incoming synapse forced on (ties
    resolve to the lowest column index). Rows with no positive q at all
    are left dead so the parent's zero structure is never violated.
    """
    qs = synthesis_probability(dna, env)
    total = sum(q.size for q in qs)
    draws = uniform_block(seed, total)
    masks = []
    offset = 0
    for q in qs:
        u = draws[offset:offset + q.size].reshape(q.shape)
        offset += q.size
        s = (u < q).astype(np.uint8)
        dead = (s.sum(axis=1) == 0) & (q.max(axis=1) > 0.0)
        for row in np.nonzero(dead)[0]:
            s[row, np.argmax(q[row])] = 1
        masks.append(s)
    return SynapseMask(layers=masks)


def expected_density(dna: SynapticProbabilityModel, env: EnvironmentalFactor) -> float:
    """Expected surviving fraction: sum of q over the count of p > 0.

    The repair rule is ignored, biasing the estimate low by at most
    (output neurons / active synapses); negligible at working densities.
    """
    qs = synthesis_probability(dna, env)
    active = 0
    q_sum = 0.0
    for i, (p, q) in enumerate(zip(dna.layers, qs)):
        n = int(np.count_nonzero(p))
        if n == 0:
            raise DeadLayer(f"layer {i} has no synapse with positive probability")
        active += n
        q_sum += float(q.sum())
    return q_sum / active


def calibrate_alpha(dna: SynapticProbabilityModel, target_retention: float) -> CalibrationResult:
    """Find the global alpha whose expected density matches the target.

    Expected density is non-decreasing and 1-Lipschitz in alpha, so 64
    bisection steps on (0, 1] pin it well below the 1e-4 tolerance. When
    even alpha = 1 cannot reach the target the identity factor is
    returned with the saturated flag set.
    """
    if not 0.0 < target_retention <= 1.0:
        raise ValueError(f"target retention must be in (0, 1], got {target_retention}")
    env_one = EnvironmentalFactor(1.0)
    e_one = expected_density(dna, env_one)
    if e_one <= target_retention:
        return CalibrationResult(
            env=env_one,
            expected=e_one,
            saturated=e_one < target_retention,
            iterations=0,
        )
    lo, hi = 0.0, 1.0
    mid, e_mid = 1.0, e_one
    for _ in range(64):
        mid = 0.5 * (lo + hi)
        e_mid = expected_density(dna, EnvironmentalFactor(mid))
        if e_mid < target_retention:
            lo = mid
        else:
            hi = mid
    return CalibrationResult(
        env=EnvironmentalFactor(mid),
        expected=e_mid,
        saturated=False,
        iterations=64,
    )
