"""Cost-function zoo: local smooth objectives plus seeded stochastic oracles.

A :class:`Problem` bundles the n local costs f_i, their exact gradients, a
certified smoothness constant, and the standard deviation of the gradient
oracle. The global objective is always f(x) = (1/n) sum_i f_i(x).

The oracle adds isotropic truncated Gaussian noise with total variance
sigma^2 (per-coordinate standard deviation sigma/sqrt(p), clipped at six of
those), so the bounded-variance contract E||g_hat - grad||^2 <= sigma^2 is
checkable with finite samples. Mini-batches of size B average B independent
draws, cutting the variance to sigma^2/B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .seeding import init_rng, oracle_rng, u64

# Clip additive noise at this many per-coordinate standard deviations.
NOISE_CLIP_SIGMAS = 6.0


class OptimumHint(NamedTuple):
    """Known minimizer and/or optimal value, when available in closed form."""

    xstar: Optional[np.ndarray]
    fstar: Optional[float]


@dataclass(frozen=True)
class Problem:
    """A collection of n local smooth costs with a stochastic gradient oracle.

    ``local_value(i, x)`` and ``local_grad(i, x)`` evaluate agent i's exact
    cost and gradient at a length-p point. ``smoothness_bound`` is a valid
    Lipschitz constant for every local gradient on the problem's reference
    domain, and ``noise_sigma`` bounds the oracle's standard deviation.
    """

    n: int
    p: int
    local_value: Callable
    local_grad: Callable
    smoothness_bound: float
    noise_sigma: float
    optimum_hint: Optional[OptimumHint] = None
    name: str = ""


@dataclass(frozen=True)
class OracleSample:
    grad_estimate: np.ndarray
    agent: int
    iteration: int
    batch_size: int


class Dataset(NamedTuple):
    features: np.ndarray  # (samples, d)
    labels: np.ndarray  # (samples,) integers


def objective_value(prob: Problem, x: np.ndarray) -> float:
    """Global objective f(x) = (1/n) sum_i f_i(x)."""
    return sum(prob.local_value(i, x) for i in range(prob.n)) / prob.n


def global_grad(prob: Problem, x: np.ndarray) -> np.ndarray:
    """Exact global gradient (1/n) sum_i grad f_i(x)."""
    g = np.zeros(prob.p)
    for i in range(prob.n):
        g += prob.local_grad(i, x)
    return g / prob.n


def _noise_block(prob: Problem, upto_agent: int, k: int, B: int, seed: int):
    """Noise rows for agents 0..upto_agent at round k; returns the full block."""
    scale = prob.noise_sigma / np.sqrt(prob.p)
    block = oracle_rng(seed, k).standard_normal((upto_agent + 1, B, prob.p))
    np.clip(block, -NOISE_CLIP_SIGMAS, NOISE_CLIP_SIGMAS, out=block)
    return block * scale


def stochastic_grad(
    prob: Problem, i: int, x: np.ndarray, k: int, B: int, seed: int
) -> OracleSample:
    """Mini-batch gradient estimate for agent i at round k.

    Averages B independent unbiased draws. The noise is a pure function of
    (seed, i, k, draw index): repeated calls with identical arguments return
    bit-identical samples, and distinct (i, k) pairs use independent noise.
    """
    if B < 1:
        raise ValueError(f"batch size must be >= 1, got {B}")
    g = np.asarray(prob.local_grad(i, x), dtype=float)
    if prob.noise_sigma == 0.0:
        return OracleSample(g, i, k, B)
    noise = _noise_block(prob, i, k, B, seed)[i]
    return OracleSample(g + noise.mean(axis=0), i, k, B)


def stacked_stochastic_grads(
    prob: Problem, X: np.ndarray, k: int, B: int, seed: int
) -> np.ndarray:
    """All agents' estimates at round k, row i evaluated at X[i].

    Bitwise identical to stacking :func:`stochastic_grad` over agents, but
    the round's noise is drawn in one shot.
    """
    if B < 1:
        raise ValueError(f"batch size must be >= 1, got {B}")
    G = np.empty((prob.n, prob.p))
    for i in range(prob.n):
        G[i] = prob.local_grad(i, X[i])
    if prob.noise_sigma == 0.0:
        return G
    noise = _noise_block(prob, prob.n - 1, k, B, seed)
    return G + noise.mean(axis=1)


def default_initial_state(prob: Problem, seed: int) -> np.ndarray:
    """Seeded standard-normal initial iterates, one row per agent."""
    return init_rng(seed).standard_normal((prob.n, prob.p))


# ---------------------------------------------------------------------------
# Built-in problems
# ---------------------------------------------------------------------------


def quadratic_problem(
    n: int,
    p: int,
    condition_number: float = 1.0,
    heterogeneity: float = 0.0,
    sigma: float = 0.0,
    seed: int = 0,
) -> Problem:
    """Strongly convex quadratics f_i(x) = 0.5 (x - c_i)^T A_i (x - c_i).

    Each A_i shares the spectrum geomspace(1, condition_number) in a random
    orthogonal basis, so the declared smoothness constant is exactly
    ``condition_number``. Centers are c_i = c + heterogeneity * d_i with
    seeded standard-normal c and d_i; heterogeneity = 0 gives identical
    local optima. The global minimizer (sum A_i)^{-1} sum A_i c_i and its
    value are stored in ``optimum_hint``.
    """
    if condition_number < 1.0:
        raise ValueError(f"condition number must be >= 1, got {condition_number}")
    if heterogeneity < 0.0 or sigma < 0.0:
        raise ValueError("heterogeneity and sigma must be nonnegative")
    rng = np.random.default_rng(u64(seed))
    spectrum = (
        np.geomspace(1.0, condition_number, p)
        if p > 1
        else np.array([condition_number])
    )
    mats = []
    for _ in range(n):
        q, _ = np.linalg.qr(rng.standard_normal((p, p)))
        a = (q * spectrum) @ q.T
        mats.append(0.5 * (a + a.T))
    base = rng.standard_normal(p)
    centers = [base + heterogeneity * rng.standard_normal(p) for _ in range(n)]
    mats = np.array(mats)
    centers = np.array(centers)

    xstar = np.linalg.solve(mats.sum(axis=0), np.einsum("ijk,ik->j", mats, centers))

    def local_value(i, x):
        r = np.asarray(x, dtype=float) - centers[i]
        return 0.5 * float(r @ (mats[i] @ r))

    def local_grad(i, x):
        return mats[i] @ (np.asarray(x, dtype=float) - centers[i])

    fstar = sum(local_value(i, xstar) for i in range(n)) / n
    return Problem(
        n=n,
        p=p,
        local_value=local_value,
        local_grad=local_grad,
        smoothness_bound=float(condition_number),
        noise_sigma=float(sigma),
        optimum_hint=OptimumHint(xstar=xstar, fstar=fstar),
        name="quadratic",
    )


def nonconvex_problem(
    n: int,
    p: int,
    sigma: float = 0.0,
    seed: int = 0,
    lam: float = 0.1,
    b_scale: float = 1.0,
) -> Problem:
    """Least squares plus a smooth bounded nonconvex regularizer.

    f_i(x) = 0.5 ||M_i x - b_i||^2 + lam * sum_l x_l^2 / (1 + x_l^2), with
    seeded Gaussian M_i (p x p) and b_i scaled by ``b_scale``. Every term is
    nonnegative, so f is bounded below by 0. The regularizer's second
    derivative is bounded by 2, giving the certified smoothness constant
    max_i rho(M_i^T M_i) + 2 lam. ``lam=0`` reduces to plain least squares.
    """
    if sigma < 0.0 or lam < 0.0:
        raise ValueError("sigma and lam must be nonnegative")
    rng = np.random.default_rng(u64(seed))
    mats = np.array([rng.standard_normal((p, p)) for _ in range(n)])
    rhs = np.array([b_scale * rng.standard_normal(p) for _ in range(n)])
    gram_radius = max(
        float(np.linalg.eigvalsh(m.T @ m)[-1]) for m in mats
    )

    def local_value(i, x):
        x = np.asarray(x, dtype=float)
        r = mats[i] @ x - rhs[i]
        return 0.5 * float(r @ r) + lam * float(np.sum(x * x / (1.0 + x * x)))

    def local_grad(i, x):
        x = np.asarray(x, dtype=float)
        reg = 2.0 * x / (1.0 + x * x) ** 2
        return mats[i].T @ (mats[i] @ x - rhs[i]) + lam * reg

    return Problem(
        n=n,
        p=p,
        local_value=local_value,
        local_grad=local_grad,
        smoothness_bound=gram_radius + 2.0 * lam,
        noise_sigma=float(sigma),
        optimum_hint=None,
        name="nonconvex",
    )


def _sigmoid(s: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function, branched on the sign of s."""
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


def two_layer_sigmoid_problem(
    dataset: Dataset,
    n: int,
    hidden: int = 50,
    classes: int = 10,
    sigma: float = 0.0,
    shuffle_seed: int = 0,
    domain_radius: float = 10.0,
) -> Problem:
    """Per-shard empirical risk of a two-layer sigmoid classifier.

    The decision variable stacks z1 (hidden x (d+1), bias last) and z2
    (classes x (hidden+1), bias last). A sample x maps to class scores
    y = Sig(z2 [Sig(z1 [x;1]); 1]) and contributes the summed binary
    cross-entropy -sum_k [t_k ln y_k + (1-t_k) ln(1-y_k)] against its
    one-hot target. Rows are sharded contiguously across the n agents after
    one seeded shuffle; each local cost is its shard's mean risk, so the
    global objective matches the pooled empirical risk.

    Gradients are exact via backpropagation. The declared smoothness
    constant is certified on the ball ||z|| <= ``domain_radius`` from norm
    bounds on the two sigmoid layers.
    """
    feats = np.asarray(dataset.features, dtype=float)
    labels = np.asarray(dataset.labels)
    if feats.ndim != 2 or feats.shape[0] != labels.shape[0]:
        raise ValueError("features must be 2-D with one label per row")
    if labels.size and (
        np.any(labels != np.floor(labels)) or labels.min() < 0 or labels.max() >= classes
    ):
        raise ValueError(f"labels must be integers in [0, {classes})")
    if feats.shape[0] < n:
        raise ValueError(f"{feats.shape[0]} samples cannot fill {n} shards")

    order = np.random.default_rng(u64(shuffle_seed)).permutation(feats.shape[0])
    d = feats.shape[1]
    shard_x = []
    shard_t = []
    for idx in np.array_split(order, n):
        xa = np.hstack([feats[idx], np.ones((idx.size, 1))])
        onehot = np.zeros((idx.size, classes))
        onehot[np.arange(idx.size), labels[idx].astype(int)] = 1.0
        shard_x.append(xa)
        shard_t.append(onehot)

    p = hidden * (d + 1) + classes * (hidden + 1)
    split = hidden * (d + 1)

    def unpack(z):
        z = np.asarray(z, dtype=float)
        return z[:split].reshape(hidden, d + 1), z[split:].reshape(classes, hidden + 1)

    def forward(i, z):
        z1, z2 = unpack(z)
        xa = shard_x[i]
        a = _sigmoid(xa @ z1.T)
        ha = np.hstack([a, np.ones((a.shape[0], 1))])
        y = _sigmoid(ha @ z2.T)
        return xa, a, ha, y

    def local_value(i, z):
        _, _, _, y = forward(i, z)
        y = np.clip(y, 1e-12, 1.0 - 1e-12)
        t = shard_t[i]
        per_sample = -(t * np.log(y) + (1.0 - t) * np.log(1.0 - y)).sum(axis=1)
        return float(per_sample.mean())

    def local_grad(i, z):
        z1, z2 = unpack(z)
        xa, a, ha, y = forward(i, z)
        m = xa.shape[0]
        d2 = (y - shard_t[i]) / m  # dRisk/d(pre-activation of layer 2)
        gz2 = d2.T @ ha
        ds1 = (d2 @ z2[:, :hidden]) * a * (1.0 - a)
        gz1 = ds1.T @ xa
        return np.concatenate([gz1.ravel(), gz2.ravel()])

    # Hessian norm bound on ||z|| <= R: per class, a rank-one part
    # y'(grad s2)(grad s2)^T with y' <= 1/4 plus |y - t| <= 1 times the
    # curvature of the composed pre-activation (|Sig'| <= 1/4, |Sig''| <= 0.1).
    x_max = max(float(np.linalg.norm(xa, axis=1).max()) for xa in shard_x)
    hn2 = float(hidden + 1)
    r = float(domain_radius)
    lf = classes * (
        0.25 * (hn2 + (r * x_max / 4.0) ** 2)
        + x_max / 2.0
        + 0.1 * r * x_max**2
    )

    return Problem(
        n=n,
        p=p,
        local_value=local_value,
        local_grad=local_grad,
        smoothness_bound=lf,
        noise_sigma=float(sigma),
        optimum_hint=None,
        name="two_layer_sigmoid",
    )


def gaussian_blobs(
    samples: int, d: int, classes: int, seed: int = 0, spread: float = 2.0
) -> Dataset:
    """Balanced synthetic classification data from Gaussian class blobs."""
    if samples < classes:
        raise ValueError("need at least one sample per class")
    rng = np.random.default_rng(u64(seed))
    centers = spread * rng.standard_normal((classes, d))
    labels = rng.permutation(np.arange(samples) % classes)
    feats = centers[labels] + rng.standard_normal((samples, d))
    return Dataset(features=feats, labels=labels)


def load_dataset_csv(path) -> Dataset:
    """Read header-free rows ``label,f1,...,fd`` with decimal floats.

    Validates the rectangular shape and that labels are nonnegative
    integers; the class-range check happens when a problem is built.
    """
    try:
        raw = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed CSV ({exc})") from exc
    if raw.shape[1] < 2:
        raise ValueError(f"{path}: rows need a label plus at least one feature")
    labels = raw[:, 0]
    if np.any(labels != np.floor(labels)) or labels.min() < 0:
        raise ValueError(f"{path}: labels must be nonnegative integers")
    return Dataset(features=raw[:, 1:].copy(), labels=labels.astype(int))
