"""Stochastic training of the embedding models with diagonal AdaGrad.

One step processes a single positive edge and its sampled negatives.
Accumulators grow by the squared gradient and each parameter moves by
lr * g / (sqrt(accum) + eps). Runs are deterministic given the seed; the
per-epoch trace records the mean step loss and a held-out loss computed
on the test edges with fresh negatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, NumericError
from .graph import SplitGraph
from .model import (
    OBJECTIVE_BERNOULLI,
    OBJECTIVE_DISTEMB,
    BernoulliModel,
    DistEmbModel,
    TrainConfig,
    example_loss_and_grads,
)
from .noise import NoiseDistribution

_INIT_RANGE = 0.1
_INIT_SCALE = -1.0  # smaller distance should mean higher link probability
_INIT_BIAS = 0.0


@dataclass
class TrainResult:
    model: object
    trace: list[tuple[float, float]]  # (train_loss, heldout_loss) per epoch
    best_epoch: int

    @property
    def epochs(self) -> int:
        return len(self.trace)


def _new_model(config: TrainConfig, num_nodes: int, rng: np.random.Generator):
    matrix = rng.uniform(-_INIT_RANGE, _INIT_RANGE, size=(num_nodes, config.dim))
    if config.objective == OBJECTIVE_DISTEMB:
        return DistEmbModel(matrix, _INIT_SCALE, _INIT_BIAS)
    return BernoulliModel(matrix, _INIT_SCALE, _INIT_BIAS)


def _model_matrix(model) -> np.ndarray:
    return model.logits if isinstance(model, BernoulliModel) else model.vectors


def _heldout_loss(model, split: SplitGraph, noise, quadrature, k: int, rng) -> float:
    if split.test_edges.shape[0] == 0:
        return float("nan")
    total = 0.0
    for i, j in split.test_edges:
        negs = noise.sample(rng, size=k)
        value, _, _, _ = example_loss_and_grads(
            model, (i, j), negs, noise, quadrature, want_grads=False
        )
        total += value
    return total / split.test_edges.shape[0]


def train(split: SplitGraph, config: TrainConfig) -> TrainResult:
    """Fit the configured objective on the training edges.

    The model with the best held-out loss across epochs is the one
    returned; with no test edges the final model is returned.
    """
    graph = split.train
    edges = graph.edges
    if edges.shape[0] < 1:
        raise DataError("training graph has no edges")

    rng = np.random.default_rng(config.seed)
    model = _new_model(config, graph.num_nodes, rng)
    noise = NoiseDistribution.from_spec(config.noise, graph)
    quadrature = config.quadrature if config.approximation == "clt" else None
    k = config.noise.negatives_per_edge
    lr = config.learning_rate
    eps = config.adagrad_epsilon

    matrix = _model_matrix(model)
    accum_rows = np.zeros_like(matrix)
    accum_scale = 0.0
    accum_bias = 0.0

    trace: list[tuple[float, float]] = []
    best_epoch = -1
    best_heldout = np.inf
    best_state: Optional[tuple[np.ndarray, float, float]] = None

    for epoch in range(config.epochs):
        order = rng.permutation(edges.shape[0])
        epoch_loss = 0.0
        for step, idx in enumerate(order):
            i, j = edges[idx]
            negs = noise.sample(rng, size=k)
            value, rows, d_a, d_b = example_loss_and_grads(
                model, (i, j), negs, noise, quadrature
            )
            if not np.isfinite(value):
                raise NumericError(
                    f"training diverged at epoch {epoch} step {step} on edge ({i}, {j})"
                )
            epoch_loss += value
            for node, grad in rows.items():
                accum_rows[node] += grad * grad
                matrix[node] -= lr * grad / (np.sqrt(accum_rows[node]) + eps)
            accum_scale += d_a * d_a
            model.scale -= lr * d_a / (np.sqrt(accum_scale) + eps)
            accum_bias += d_b * d_b
            model.bias -= lr * d_b / (np.sqrt(accum_bias) + eps)

        eval_rng = np.random.default_rng([config.seed, epoch, 0x48454C44])
        heldout = _heldout_loss(model, split, noise, quadrature, k, eval_rng)
        trace.append((epoch_loss / edges.shape[0], heldout))
        if np.isfinite(heldout) and heldout < best_heldout:
            best_heldout = heldout
            best_epoch = epoch
            best_state = (matrix.copy(), model.scale, model.bias)

    if best_state is not None:
        matrix[:] = best_state[0]
        model.scale, model.bias = best_state[1], best_state[2]
    else:
        best_epoch = config.epochs - 1
    return TrainResult(model=model, trace=trace, best_epoch=best_epoch)


def train_distemb(split: SplitGraph, config: TrainConfig) -> TrainResult:
    """Real-valued baseline: same contrastive scaffold, L2 distance score."""
    if config.objective != OBJECTIVE_DISTEMB:
        raise DataError(f"train_distemb requires objective={OBJECTIVE_DISTEMB!r}")
    return train(split, config)
