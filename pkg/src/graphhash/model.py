"""Probabilistic bit embeddings and their contrastive training objective.

Each node i carries d independent Bernoulli success probabilities
p_i = logistic(theta_i). The Hamming distance between two sampled bit
rows is a sum of d independent indicator variables with means
m_k = p_ik (1 - p_jk) + (1 - p_ik) p_jk, so it has mean mu = sum m_k and
variance sigma^2 = sum m_k (1 - m_k).

The training loss is a noise-contrastive discrimination between observed
edges and sampled negatives, scored by s = a * distance + b. Two smooth
surrogates for the expectation over the random bits are provided:

* mean: plug mu straight into the score (accurate for large d);
* clt:  treat the distance as Gaussian(mu, sigma^2) and integrate each
  NCE term by midpoint quadrature on the Gaussian CDF, with abscissae
  z_n = Phi^-1((2n - 1) / (2Q)) and weight 1/Q.

The clt form reduces exactly to the mean form when Q = 1 (z = 0) or when
sigma = 0. A real-valued baseline with an L2 distance in place of the
expected Hamming distance reuses the same scaffold.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit, ndtri

from .errors import DataError, NumericError
from .fileio import atomic_open
from .noise import NoiseDistribution, NoiseSpec

OBJECTIVE_BERNOULLI = "bernoulli_hamming"
OBJECTIVE_DISTEMB = "distemb_l2"

_CHECKPOINT_MAGIC = b"BGEP"
_CHECKPOINT_VERSION = 1
_OBJECTIVE_TAGS = {OBJECTIVE_BERNOULLI: 0, OBJECTIVE_DISTEMB: 1}
_TAG_OBJECTIVES = {v: k for k, v in _OBJECTIVE_TAGS.items()}


@dataclass(frozen=True)
class QuadratureSpec:
    """Gaussian-CDF midpoint rule with Q points.

    Abscissae are built from the lower half and mirrored so that
    z_n = -z_{Q+1-n} holds exactly; Q = 1 yields the single abscissa 0.
    """

    points: int = 5
    abscissae: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        q = self.points
        if q < 1:
            raise DataError("quadrature needs at least one point")
        lower = ndtri((2.0 * np.arange(1, q // 2 + 1) - 1.0) / (2.0 * q))
        center = np.zeros(1) if q % 2 else np.zeros(0)
        z = np.concatenate([lower, center, -lower[::-1]])
        z.setflags(write=False)
        object.__setattr__(self, "abscissae", z)


@dataclass
class TrainConfig:
    dim: int
    epochs: int = 60
    learning_rate: float = 0.5
    adagrad_epsilon: float = 1e-8
    seed: int = 0
    approximation: str = "clt"  # "mean" | "clt"
    objective: str = OBJECTIVE_BERNOULLI
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)

    def __post_init__(self):
        if self.dim < 1:
            raise DataError("embedding dimension must be >= 1")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise DataError("learning rate must be positive")
        if self.approximation not in ("mean", "clt"):
            raise DataError(f"unknown approximation {self.approximation!r}")
        if self.objective not in (OBJECTIVE_BERNOULLI, OBJECTIVE_DISTEMB):
            raise DataError(f"unknown objective {self.objective!r}")


class BernoulliModel:
    """Logits theta (N x d) with p = logistic(theta), plus scale a and bias b."""

    def __init__(self, logits: np.ndarray, scale: float, bias: float):
        logits = np.asarray(logits, dtype=np.float64)
        if logits.ndim != 2:
            raise DataError("logits must be an N x d matrix")
        self.logits = logits
        self.scale = float(scale)
        self.bias = float(bias)

    @property
    def num_nodes(self) -> int:
        return self.logits.shape[0]

    @property
    def dim(self) -> int:
        return self.logits.shape[1]

    @property
    def probabilities(self) -> np.ndarray:
        return expit(self.logits)

    def prob_row(self, i: int) -> np.ndarray:
        return expit(self.logits[i])

    objective = OBJECTIVE_BERNOULLI


class DistEmbModel:
    """Unconstrained real vectors scored by a * ||e_i - e_j||_2 + b."""

    def __init__(self, vectors: np.ndarray, scale: float, bias: float):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DataError("vectors must be an N x d matrix")
        self.vectors = vectors
        self.scale = float(scale)
        self.bias = float(bias)

    @property
    def num_nodes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    objective = OBJECTIVE_DISTEMB


def _check_pair(p_i, p_j) -> tuple[np.ndarray, np.ndarray]:
    p_i = np.asarray(p_i, dtype=np.float64)
    p_j = np.asarray(p_j, dtype=np.float64)
    if p_i.shape != p_j.shape or p_i.ndim != 1:
        raise DataError(f"probability vectors disagree in shape: {p_i.shape} vs {p_j.shape}")
    return p_i, p_j


def bit_disagreement_means(p_i, p_j) -> np.ndarray:
    """Per-coordinate probability that sampled bits disagree."""
    p_i, p_j = _check_pair(p_i, p_j)
    return p_i + p_j - 2.0 * p_i * p_j


def expected_hamming(p_i, p_j) -> float:
    """Mean Hamming distance between bit rows sampled from p_i and p_j."""
    return float(bit_disagreement_means(p_i, p_j).sum())


def hamming_variance(p_i, p_j) -> float:
    """Variance of the same random Hamming distance; 0 iff all p are 0/1."""
    m = bit_disagreement_means(p_i, p_j)
    return float((m * (1.0 - m)).sum())


def nce_positive_term(score, noise_prob):
    """-log of the probability the discriminator assigns to 'data'."""
    return np.logaddexp(score, np.log(noise_prob)) - score


def nce_negative_term(score, noise_prob):
    """-log of the probability the discriminator assigns to 'noise'."""
    return np.logaddexp(score, np.log(noise_prob)) - np.log(noise_prob)


def nce_pair_loss(score_pos: float, score_neg: float, noise_pos: float, noise_neg: float) -> float:
    """Contrastive loss for one positive and one negative score."""
    for q in (noise_pos, noise_neg):
        if not 0.0 < q <= 1.0:
            raise DataError(f"noise probability {q} outside (0, 1]")
    if not (np.isfinite(score_pos) and np.isfinite(score_neg)):
        raise NumericError(f"non-finite scores ({score_pos}, {score_neg})")
    return float(nce_positive_term(score_pos, noise_pos) + nce_negative_term(score_neg, noise_neg))


# One NCE log-term integrated over the Gaussian surrogate of the distance.
# Returns the term value and its partials with respect to mu, sigma, a, b.
def _gaussian_term(mu, sigma, a, b, log_q, abscissae, positive):
    if abscissae is None or sigma == 0.0:
        x = np.array([mu])
        z = np.zeros(1)
    else:
        x = mu + sigma * abscissae
        z = abscissae
    s = a * x + b
    shifted = s - log_q
    if positive:
        values = np.logaddexp(s, log_q) - s
        slope = expit(shifted) - 1.0
    else:
        values = np.logaddexp(s, log_q) - log_q
        slope = expit(shifted)
    g_mean = slope.mean()
    return (
        float(values.mean()),
        a * g_mean,                  # d/d mu
        a * float((slope * z).mean()),  # d/d sigma
        float((slope * x).mean()),   # d/d a
        float(g_mean),               # d/d b
    )


def _hamming_term(p_x, p_y, a, b, log_q, abscissae, positive):
    """Term value plus gradients w.r.t. the two probability rows, a, and b."""
    m = p_x + p_y - 2.0 * p_x * p_y
    mu = float(m.sum())
    if abscissae is None:
        sigma = 0.0
    else:
        sigma = float(np.sqrt(max((m * (1.0 - m)).sum(), 0.0)))
    value, d_mu, d_sigma, d_a, d_b = _gaussian_term(mu, sigma, a, b, log_q, abscissae, positive)
    d_m = np.full_like(m, d_mu)
    if sigma > 0.0:
        d_m = d_m + d_sigma * (1.0 - 2.0 * m) / (2.0 * sigma)
    return value, d_m * (1.0 - 2.0 * p_y), d_m * (1.0 - 2.0 * p_x), d_a, d_b


def _resolve_noise(model, noise) -> NoiseDistribution:
    if noise is None:
        return NoiseDistribution.uniform(model.num_nodes)
    return noise


def _as_negatives(negative) -> np.ndarray:
    negs = np.atleast_1d(np.asarray(negative, dtype=np.int64))
    if negs.size < 1:
        raise DataError("at least one negative sample is required")
    return negs


def _bernoulli_example(model, i, j, negatives, noise, abscissae, want_grads):
    """Loss and sparse gradients for one edge plus its negatives.

    With k negatives the noise density is scaled by k inside both terms,
    the standard correction for multi-negative contrastive estimation.
    """
    negs = _as_negatives(negatives)
    k = negs.size
    p_i = model.prob_row(i)
    p_j = model.prob_row(j)
    a, b = model.scale, model.bias

    log_q_pos = float(np.log(k * noise.prob(j)))
    value, d_pi, d_pj, d_a, d_b = _hamming_term(p_i, p_j, a, b, log_q_pos, abscissae, True)
    rows = {}
    if want_grads:
        rows[int(i)] = d_pi
        _accumulate(rows, int(j), d_pj)
    for kk in negs:
        log_q_neg = float(np.log(k * noise.prob(kk)))
        p_k = model.prob_row(kk)
        t_val, d_pi_n, d_pk, t_a, t_b = _hamming_term(p_i, p_k, a, b, log_q_neg, abscissae, False)
        value += t_val
        d_a += t_a
        d_b += t_b
        if want_grads:
            _accumulate(rows, int(i), d_pi_n)
            _accumulate(rows, int(kk), d_pk)
    if want_grads:
        # Chain from probabilities to logits: dp/dtheta = p (1 - p).
        for node, grad in rows.items():
            p = model.prob_row(node)
            rows[node] = grad * p * (1.0 - p)
    return value, rows, d_a, d_b


def _l2_term(e_x, e_y, a, b, log_q, positive):
    diff = e_x - e_y
    dist = float(np.sqrt((diff * diff).sum()))
    s = a * dist + b
    shifted = s - log_q
    if positive:
        value = float(np.logaddexp(s, log_q) - s)
        slope = float(expit(shifted) - 1.0)
    else:
        value = float(np.logaddexp(s, log_q) - log_q)
        slope = float(expit(shifted))
    # Subgradient 0 at coincident points keeps the update finite.
    unit = diff / dist if dist > 0.0 else np.zeros_like(diff)
    d_e = slope * a * unit
    return value, d_e, -d_e, slope * dist, slope


def _distemb_example(model, i, j, negatives, noise, want_grads):
    negs = _as_negatives(negatives)
    k = negs.size
    e = model.vectors
    a, b = model.scale, model.bias

    value, d_ei, d_ej, d_a, d_b = _l2_term(e[i], e[j], a, b, float(np.log(k * noise.prob(j))), True)
    rows = {}
    if want_grads:
        rows[int(i)] = d_ei
        _accumulate(rows, int(j), d_ej)
    for kk in negs:
        t_val, d_ei_n, d_ek, t_a, t_b = _l2_term(
            e[i], e[kk], a, b, float(np.log(k * noise.prob(kk))), False
        )
        value += t_val
        d_a += t_a
        d_b += t_b
        if want_grads:
            _accumulate(rows, int(i), d_ei_n)
            _accumulate(rows, int(kk), d_ek)
    return value, rows, d_a, d_b


def _accumulate(rows: dict, node: int, grad: np.ndarray) -> None:
    if node in rows:
        rows[node] = rows[node] + grad
    else:
        rows[node] = grad


def example_loss_and_grads(model, edge, negatives, noise=None, quadrature=None, want_grads=True):
    """Dispatch on model type; ``quadrature=None`` selects the mean surrogate."""
    noise = _resolve_noise(model, noise)
    i, j = int(edge[0]), int(edge[1])
    abscissae = quadrature.abscissae if quadrature is not None else None
    if isinstance(model, DistEmbModel):
        return _distemb_example(model, i, j, negatives, noise, want_grads)
    return _bernoulli_example(model, i, j, negatives, noise, abscissae, want_grads)


def loss_mean(model, edge, negative, noise=None) -> float:
    """NCE loss with the expected distance plugged into the scores."""
    value, _, _, _ = example_loss_and_grads(model, edge, negative, noise, None, want_grads=False)
    return value


def loss_clt(model, edge, negative, noise=None, quadrature: Optional[QuadratureSpec] = None) -> float:
    """NCE loss with each term integrated over its Gaussian distance surrogate."""
    quadrature = quadrature or QuadratureSpec()
    value, _, _, _ = example_loss_and_grads(model, edge, negative, noise, quadrature, want_grads=False)
    return value


@dataclass
class Gradients:
    """Sparse gradient set: rows absent from ``rows`` have zero gradient."""

    rows: dict[int, np.ndarray]
    scale: float
    bias: float
    loss: float

    def dense_rows(self, num_nodes: int, dim: int) -> np.ndarray:
        out = np.zeros((num_nodes, dim))
        for node, grad in self.rows.items():
            out[node] = grad
        return out


def gradients(model, batch, config: TrainConfig, noise: Optional[NoiseDistribution] = None) -> Gradients:
    """Exact analytic gradients of the configured loss over a batch.

    ``batch`` is a sequence of ``(edge, negatives)`` pairs; contributions
    from repeated pairs add up. Raises on non-finite values, naming the
    offending pair.
    """
    if len(batch) == 0:
        raise DataError("gradient batch is empty")
    noise = _resolve_noise(model, noise)
    quadrature = config.quadrature if config.approximation == "clt" else None
    total = Gradients(rows={}, scale=0.0, bias=0.0, loss=0.0)
    for edge, negatives in batch:
        value, rows, d_a, d_b = example_loss_and_grads(model, edge, negatives, noise, quadrature)
        bad = not np.isfinite(value) or not np.isfinite(d_a) or not np.isfinite(d_b)
        if not bad:
            bad = any(not np.all(np.isfinite(g)) for g in rows.values())
        if bad:
            raise NumericError(f"non-finite gradient for edge {tuple(edge)}")
        total.loss += value
        total.scale += d_a
        total.bias += d_b
        for node, grad in rows.items():
            _accumulate(total.rows, node, grad)
    return total


def save_model(model, path: str | Path) -> None:
    """Binary checkpoint: magic, version, N, d, objective tag, float32 rows, a, b."""
    matrix = model.logits if isinstance(model, BernoulliModel) else model.vectors
    tag = _OBJECTIVE_TAGS[model.objective]
    header = struct.pack("<4sIQIB", _CHECKPOINT_MAGIC, _CHECKPOINT_VERSION,
                         model.num_nodes, model.dim, tag)
    with atomic_open(path, "wb") as out:
        out.write(header)
        out.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
        out.write(struct.pack("<dd", model.scale, model.bias))


def load_model(path: str | Path):
    raw = Path(path).read_bytes()
    head = struct.calcsize("<4sIQIB")
    if len(raw) < head:
        raise DataError(f"{path}: truncated checkpoint")
    magic, version, n, d, tag = struct.unpack_from("<4sIQIB", raw)
    if magic != _CHECKPOINT_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    if version != _CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    if tag not in _TAG_OBJECTIVES:
        raise DataError(f"{path}: unknown objective tag {tag}")
    need = head + 4 * n * d + 16
    if len(raw) != need:
        raise DataError(f"{path}: expected {need} bytes, found {len(raw)}")
    matrix = np.frombuffer(raw, dtype="<f4", count=n * d, offset=head).reshape(n, d)
    a, b = struct.unpack_from("<dd", raw, head + 4 * n * d)
    if _TAG_OBJECTIVES[tag] == OBJECTIVE_BERNOULLI:
        return BernoulliModel(matrix.astype(np.float64), a, b)
    return DistEmbModel(matrix.astype(np.float64), a, b)
