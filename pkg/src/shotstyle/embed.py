"""Exact t-SNE for corpus-sized point sets (a few hundred films at most).

Pairwise affinities and gradients are computed densely, O(n^2) per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteInput, PerplexityInfeasible

PERPLEXITY_TOL = 1e-5
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class EmbedConfig:
    target_dims: int = 2
    perplexity: float = 15.0
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: tuple[float, int] = (4.0, 100)
    seed: int = 0
    init_scale: float = 1e-4
    momentum: tuple[float, float, int] = (0.5, 0.8, 250)  # initial, final, switch iteration
    kl_every: int = 50

    def __post_init__(self):
        if self.target_dims not in (2, 3):
            raise ValueError("target_dims must be 2 or 3")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class TsneResult:
    embedding: np.ndarray
    conditional: np.ndarray  # row-stochastic P_{j|i}
    joint: np.ndarray  # symmetrized P, sums to 1
    betas: np.ndarray  # per-point precisions 1 / (2 sigma^2)
    kl_history: list[tuple[int, float]] = field(default_factory=list)


def squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x**2).sum(axis=1)
    d = sq[:, None] + sq[None, :] - 2.0 * x @ x.T
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _row_entropy(dist: np.ndarray, beta: float) -> tuple[float, np.ndarray]:
    """Entropy (nats) and probabilities of exp(-beta * dist), dist shifted to min 0."""
    w = np.exp(-beta * dist)
    total = w.sum()
    p = w / total
    h = math.log(total) + beta * float((dist * p).sum())
    return h, p


def perplexity_of(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(np.exp(-(nz * np.log(nz)).sum()))


def conditional_probabilities(
    sq_dist: np.ndarray, perplexity: float, tol: float = PERPLEXITY_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Row-stochastic P_{j|i} whose rows each have the requested perplexity.

    Each row's Gaussian precision is found by bisection. Returns ``(P, betas)``.
    """
    n = sq_dist.shape[0]
    if not 1.0 < perplexity <= n - 1:
        raise PerplexityInfeasible(f"perplexity must lie in (1, {n - 1}] for {n} points, got {perplexity}")
    P = np.zeros((n, n))
    betas = np.zeros(n)
    for i in range(n):
        dist = np.delete(sq_dist[i], i)
        dist = dist - dist.min()
        scale = dist.mean()
        beta, lo, hi = (1.0 / scale if scale > 0 else 1.0), 0.0, math.inf
        for _ in range(MAX_BISECTIONS):
            h, p = _row_entropy(dist, beta)
            perp = math.exp(h)
            if abs(perp - perplexity) <= tol:
                break
            if perp > perplexity:
                lo = beta
                beta = beta * 2.0 if math.isinf(hi) else (beta + hi) / 2.0
            else:
                hi = beta
                beta = (beta + lo) / 2.0
        else:
            h, p = _row_entropy(dist, 0.0)
            if abs(math.exp(h) - perplexity) <= tol:
                beta = 0.0
            else:
                raise PerplexityInfeasible(f"point {i}: cannot reach perplexity {perplexity} (last {perp:.6g})")
        P[i, np.arange(n) != i] = p
        betas[i] = beta
    return P, betas


def joint_probabilities(conditional: np.ndarray) -> np.ndarray:
    n = conditional.shape[0]
    return (conditional + conditional.T) / (2.0 * n)


def _student_t(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    num = 1.0 / (1.0 + squared_distances(y))
    np.fill_diagonal(num, 0.0)
    return num, num / num.sum()


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    return float((P[mask] * np.log(P[mask] / np.maximum(Q[mask], 1e-300))).sum())


def run_tsne(points, config: EmbedConfig | None = None) -> TsneResult:
    config = config or EmbedConfig()
    x = np.asarray(points, dtype=float)
    if x.ndim != 2 or x.shape[0] < 4:
        raise ValueError("need an n x d matrix with n >= 4")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("points contain NaN or infinite values")
    n = x.shape[0]
    cond, betas = conditional_probabilities(squared_distances(x), config.perplexity)
    P = np.maximum(joint_probabilities(cond), 1e-300)
    rng = np.random.default_rng(config.seed)
    y = rng.normal(0.0, config.init_scale, size=(n, config.target_dims))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    exag, exag_iters = config.early_exaggeration
    m0, m1, switch = config.momentum
    history = []
    for it in range(config.iterations):
        Pe = P * exag if it < exag_iters else P
        num, Q = _student_t(y)
        W = (Pe - Q) * num
        grad = 4.0 * (np.diag(W.sum(axis=1)) - W) @ y
        same = np.sign(grad) == np.sign(update)
        gains = np.where(same, gains * 0.8, gains + 0.2)
        np.maximum(gains, 0.01, out=gains)
        momentum = m0 if it < switch else m1
        update = momentum * update - config.learning_rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)
        if (it + 1) % config.kl_every == 0 or it + 1 == config.iterations:
            _, Q = _student_t(y)
            history.append((it + 1, kl_divergence(P, Q)))
    return TsneResult(y, cond, P, betas, history)


def tsne(points, config: EmbedConfig | None = None) -> np.ndarray:
    return run_tsne(points, config).embedding


def knn_purity(embedding: np.ndarray, labels, k: int = 5) -> float:
    """Mean fraction of each point's k nearest neighbours sharing its label."""
    labels = np.asarray(labels)
    d = squared_distances(np.asarray(embedding, dtype=float))
    np.fill_diagonal(d, np.inf)
    nn = np.argsort(d, axis=1, kind="stable")[:, :k]
    return float((labels[nn] == labels[:, None]).mean())
