"""Per-iteration convergence metrics and the four-term energy monitor.

The trace metrics follow the quantities the convergence analysis controls:
mean squared disagreement from the average iterate, squared gradient norms
at the average iterate (both Euclidean and the (1+gamma)-norm used with the
powerball map), and the objective value. The optional energy function

    W = W1 + W2 + W3 + W4
      = 0.5||x||_K^2 + 0.5||v + g0/beta||^2_{Q + kappa1 K}
        + x^T K (v + g0/beta) + n (f(xbar) - fstar)

with K the blockwise centering projector, Q the disagreement pseudo-inverse
of the Laplacian, and g0 the stacked local gradients at xbar, is the
descent certificate monitored at runtime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .netgraph import Network, disagreement_pinv
from .powerball import pnorm
from .problems import Problem


class LyapunovTerms(NamedTuple):
    w1: float
    w2: float
    w3: float
    w4: float
    w: float


@dataclass(frozen=True)
class TraceRecord:
    """Metrics of one recorded iteration.

    ``wall_ns`` is elapsed wall time since the run started; it is kept
    in memory only and never written to trace files, which must be
    byte-reproducible.
    """

    k: int
    consensus_err: float
    grad_norm_2: float
    grad_norm_pg: float
    fbar: float
    lyapunov: Optional[LyapunovTerms] = None
    wall_ns: int = 0


def consensus_error(x) -> float:
    """Mean squared deviation from the average row, (1/n) sum_i ||x_i - xbar||^2."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=0)
    return float((centered * centered).sum() / x.shape[0])


def compute_record(
    prob: Problem,
    x: np.ndarray,
    gamma: float,
    k: int,
    lyapunov_terms: Optional[LyapunovTerms] = None,
    wall_ns: int = 0,
) -> TraceRecord:
    """Assemble the trace metrics for the stacked state ``x`` at iteration k."""
    xbar = x.mean(axis=0)
    grad = np.zeros(prob.p)
    fbar = 0.0
    for i in range(prob.n):
        grad += prob.local_grad(i, xbar)
        fbar += prob.local_value(i, xbar)
    grad /= prob.n
    fbar /= prob.n
    return TraceRecord(
        k=k,
        consensus_err=consensus_error(x),
        grad_norm_2=pnorm(grad, 2.0) ** 2,
        grad_norm_pg=pnorm(grad, 1.0 + gamma) ** 2,
        fbar=fbar,
        lyapunov=lyapunov_terms,
        wall_ns=wall_ns,
    )


def lyapunov(state, net: Network, prob: Problem, hp, fstar: float) -> LyapunovTerms:
    """Evaluate the four energy terms at the given algorithm state.

    ``hp`` must carry ``beta`` (nonzero) and ``kappa1``; ``fstar`` is a
    finite optimal value or lower bound on f.
    """
    if hp.beta == 0.0:
        raise ValueError("energy terms are undefined for beta = 0")
    if hp.kappa1 is None:
        raise ValueError("energy terms need kappa1")
    if not np.isfinite(fstar):
        raise ValueError(f"fstar must be finite, got {fstar}")
    x = np.asarray(state.x, dtype=float)
    v = np.asarray(state.v, dtype=float)
    xbar = x.mean(axis=0)
    g0 = np.empty_like(x)
    for i in range(prob.n):
        g0[i] = prob.local_grad(i, xbar)
    u = v + g0 / hp.beta

    xc = x - xbar
    uc = u - u.mean(axis=0)
    q = disagreement_pinv(net)
    w1 = 0.5 * float((xc * xc).sum())
    w2 = 0.5 * (float((u * (q @ u)).sum()) + hp.kappa1 * float((uc * uc).sum()))
    w3 = float((xc * u).sum())
    fbar = sum(prob.local_value(i, xbar) for i in range(prob.n)) / prob.n
    w4 = prob.n * (fbar - fstar)
    return LyapunovTerms(w1, w2, w3, w4, w1 + w2 + w3 + w4)


RATE_MODELS = ("inv_T", "inv_sqrt_nT")


def rate_fit(trace_points, model: str = "inv_T") -> tuple[float, float]:
    """Log-log slope of metric against horizon T, with the fit's R^2.

    ``trace_points`` is a sequence of (T, metric) pairs with positive
    metrics; at least three are required. ``model`` names the decay law the
    caller is probing (reference exponent -1 for ``inv_T``, -1/2 for
    ``inv_sqrt_nT``); the fit itself is the same unweighted least squares
    either way.
    """
    if model not in RATE_MODELS:
        raise ValueError(f"unknown rate model {model!r}, expected one of {RATE_MODELS}")
    pts = [(float(t), float(m)) for t, m in trace_points]
    if len(pts) < 3:
        raise ValueError(f"rate fit needs >= 3 points, got {len(pts)}")
    if any(m <= 0.0 for _, m in pts):
        raise ValueError("rate fit requires positive metrics")
    if any(t <= 0.0 for t, _ in pts):
        raise ValueError("rate fit requires positive horizons")
    logt = np.log([t for t, _ in pts])
    logm = np.log([m for _, m in pts])
    slope, intercept = np.polyfit(logt, logm, 1)
    residual = logm - (slope * logt + intercept)
    total = logm - logm.mean()
    ss_tot = float(total @ total)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(residual @ residual) / ss_tot
    return float(slope), r2
