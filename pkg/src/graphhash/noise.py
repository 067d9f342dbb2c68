"""Noise distributions for the contrastive objective.

The discriminator compares model scores against an explicit noise density
over the node universe, so the distribution object exposes both sampling
and probability lookups. Uniform noise is the default; the unigram variant
weights nodes by degree raised to a configurable power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graph import Graph


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "uniform"  # "uniform" | "unigram_power"
    power: float = 1.0
    negatives_per_edge: int = 1

    def __post_init__(self):
        if self.kind not in ("uniform", "unigram_power"):
            raise DataError(f"unknown noise kind {self.kind!r}")
        if self.kind == "unigram_power" and self.power < 0:
            raise DataError("unigram power must be >= 0")
        if self.negatives_per_edge < 1:
            raise DataError("negatives_per_edge must be >= 1")


class NoiseDistribution:
    """Concrete probabilities p_K(.) over N nodes, with a seeded sampler."""

    def __init__(self, probs: np.ndarray):
        probs = np.asarray(probs, dtype=np.float64)
        total = probs.sum()
        if probs.ndim != 1 or probs.size < 2 or total <= 0 or (probs < 0).any():
            raise DataError("noise probabilities must be a nonnegative vector over >=2 nodes")
        self.probs = probs / total
        self.probs.setflags(write=False)
        self.num_nodes = probs.size
        self._uniform = bool(np.all(self.probs == self.probs[0]))
        self._cum = np.cumsum(self.probs)
        self._cum[-1] = 1.0

    @classmethod
    def uniform(cls, num_nodes: int) -> "NoiseDistribution":
        return cls(np.full(num_nodes, 1.0 / num_nodes))

    @classmethod
    def from_spec(cls, spec: NoiseSpec, graph: Graph) -> "NoiseDistribution":
        if spec.kind == "uniform":
            return cls.uniform(graph.num_nodes)
        weights = graph.degrees().astype(np.float64) ** spec.power
        if weights.sum() <= 0:
            raise DataError("unigram noise undefined: all degrees are zero")
        return cls(weights)

    def prob(self, node) -> np.ndarray | float:
        return self.probs[node]

    def sample(self, rng: np.random.Generator, size: int | None = None):
        """Draw node ids; collisions with any particular node are permitted."""
        if self._uniform:
            return rng.integers(0, self.num_nodes, size=size)
        draws = np.searchsorted(self._cum, rng.random(size=size), side="right")
        return np.minimum(draws, self.num_nodes - 1)


def sample_negative(noise: NoiseDistribution, i: int, rng: np.random.Generator) -> int:
    """One negative for source node i. The density does not condition on i,
    so i (or the true target) may come back; rejection would bias p_K."""
    return int(noise.sample(rng))
