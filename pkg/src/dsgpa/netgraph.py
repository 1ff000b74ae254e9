"""Communication topology: weighted undirected graphs and their Laplacian spectra.

Every algorithm in this package talks to the network only through the
:class:`Network` value built here, which caches the Laplacian together with
the spectral quantities (spectral radius, algebraic connectivity, full
eigendecomposition) that the step-size schedule and the energy-function
diagnostics need.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

# Eigenvalues with magnitude below this fraction of rho(L) are treated as
# zero when locating the smallest positive eigenvalue; symmetric eigensolvers
# never return exact zeros for the kernel.
ZERO_EIG_REL = 1e-10

ER_ATTEMPT_BUDGET = 1000


@dataclass(frozen=True)
class Network:
    """Immutable undirected weighted graph with cached spectral data.

    Attributes
    ----------
    n : int
        Number of agents (vertices).
    weights : ndarray, shape (n, n)
        Symmetric nonnegative adjacency with zero diagonal.
    laplacian : ndarray, shape (n, n)
        Degree matrix minus adjacency; rows sum to zero.
    eigenvalues : ndarray, shape (n,)
        Laplacian eigenvalues in ascending order.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal eigenvectors, column j pairing with ``eigenvalues[j]``.
    rho_L : float
        Spectral radius of the Laplacian.
    rho2_L : float
        Smallest positive eigenvalue (algebraic connectivity when the graph
        is connected); 0.0 when no positive eigenvalue exists.
    neighbors : tuple of tuple of int
        Sorted positive-weight neighbor indices per agent.
    """

    n: int
    weights: np.ndarray
    laplacian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rho_L: float
    rho2_L: float
    neighbors: tuple


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _from_weights(weights: np.ndarray) -> Network:
    """Finish construction from a validated symmetric weight matrix."""
    n = weights.shape[0]
    lap = np.diag(weights.sum(axis=1)) - weights
    evals, evecs = np.linalg.eigh(lap)
    rho = float(max(evals[-1], 0.0)) if n > 0 else 0.0
    tol = ZERO_EIG_REL * rho
    positive = evals[evals > tol]
    rho2 = float(positive[0]) if positive.size else 0.0
    neighbors = tuple(
        tuple(int(j) for j in np.nonzero(weights[i] > 0.0)[0]) for i in range(n)
    )
    return Network(
        n=n,
        weights=_freeze(weights),
        laplacian=_freeze(lap),
        eigenvalues=_freeze(evals),
        eigenvectors=_freeze(evecs),
        rho_L=rho,
        rho2_L=rho2,
        neighbors=neighbors,
    )


def build_network(edges, n: int) -> Network:
    """Build a network from an undirected weighted edge list.

    Parameters
    ----------
    edges : iterable of (i, j, w)
        Vertex indices in ``[0, n)`` and a positive weight. Each undirected
        pair may appear once; self-loops are rejected.
    n : int
        Number of agents.
    """
    if n < 1:
        raise ValueError(f"agent count must be positive, got {n}")
    weights = np.zeros((n, n))
    seen = set()
    for i, j, w in edges:
        i, j, w = int(i), int(j), float(w)
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i},{j}) out of range for n={n}")
        if i == j:
            raise ValueError(f"self-loop at vertex {i} is not allowed")
        if w <= 0.0:
            raise ValueError(f"edge ({i},{j}) has nonpositive weight {w}")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValueError(f"duplicate undirected edge ({i},{j})")
        seen.add(key)
        weights[i, j] = w
        weights[j, i] = w
    return _from_weights(weights)


def erdos_renyi(n: int, prob: float, seed: int) -> Network:
    """Sample a connected Erdos-Renyi graph with unit edge weights.

    Each unordered pair is included independently with probability ``prob``.
    Disconnected samples are resampled deterministically (the attempt counter
    is folded into the seed) up to :data:`ER_ATTEMPT_BUDGET` attempts.
    """
    if n < 2:
        raise ValueError(f"erdos_renyi needs n >= 2, got {n}")
    if not (0.0 < prob <= 1.0):
        raise ValueError(f"edge probability must be in (0, 1], got {prob}")
    iu = np.triu_indices(n, k=1)
    for attempt in range(ER_ATTEMPT_BUDGET):
        rng = np.random.default_rng((seed & (2**64 - 1), attempt))
        mask = rng.random(iu[0].size) < prob
        weights = np.zeros((n, n))
        weights[iu[0][mask], iu[1][mask]] = 1.0
        weights += weights.T
        if _reachable_count(weights) == n:
            return _from_weights(weights)
    raise RuntimeError(
        f"no connected sample for n={n}, prob={prob} "
        f"within {ER_ATTEMPT_BUDGET} attempts"
    )


def _reachable_count(weights: np.ndarray) -> int:
    """Number of vertices reachable from vertex 0 over positive weights."""
    n = weights.shape[0]
    if n == 0:
        return 0
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.nonzero(weights[i] > 0.0)[0]:
            if not seen[j]:
                seen[j] = True
                queue.append(int(j))
    return int(seen.sum())


def is_connected(net: Network) -> bool:
    """True iff every agent is reachable from agent 0 via positive weights."""
    return _reachable_count(net.weights) == net.n


def laplacian_apply(net: Network, X) -> np.ndarray:
    """Multiply the Laplacian into a stacked state, row i = sum_j L_ij x_j.

    ``X`` holds one row per agent; rows of the result sum to the zero vector
    because the Laplacian's columns sum to zero.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim not in (1, 2) or X.shape[0] != net.n:
        raise ValueError(
            f"state has leading dimension {X.shape[0] if X.ndim else 0}, "
            f"expected {net.n}"
        )
    return net.laplacian @ X


def disagreement_pinv(net: Network) -> np.ndarray:
    """Pseudo-inverse of the Laplacian restricted to the disagreement subspace.

    Built from the cached eigendecomposition as R diag(1/lambda) R^T over the
    positive eigenvalues. Used by the energy-function diagnostics.
    """
    tol = ZERO_EIG_REL * net.rho_L
    keep = net.eigenvalues > tol
    if not keep.any():
        raise ValueError("network has no positive Laplacian eigenvalue")
    R = net.eigenvectors[:, keep]
    return (R / net.eigenvalues[keep]) @ R.T


def save_graph(net: Network, path) -> None:
    """Write the graph file format: ``n m`` then one ``i j w`` line per edge.

    Weights are written with ``repr`` so a write/read round trip is
    bit-exact.
    """
    lines = []
    for i in range(net.n):
        for j in range(i + 1, net.n):
            w = net.weights[i, j]
            if w > 0.0:
                lines.append(f"{i} {j} {repr(float(w))}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{net.n} {len(lines)}\n")
        for line in lines:
            fh.write(line + "\n")


def load_graph(path) -> Network:
    """Read the graph file format written by :func:`save_graph`."""
    with open(path, "r", encoding="ascii") as fh:
        tokens = fh.readline().split()
        if len(tokens) != 2:
            raise ValueError(f"{path}: header must be 'n m'")
        n, m = int(tokens[0]), int(tokens[1])
        edges = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j w'")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if len(edges) != m:
        raise ValueError(f"{path}: header promises {m} edges, found {len(edges)}")
    return build_network(edges, n)
