"""Synchronous-round engines: the primal-dual powerball method and baselines.

All engines share the same oracle contract (seeded mini-batch stochastic
gradients), run T synchronous rounds over an immutable network, and produce
bit-reproducible traces. Per round, every agent updates from the pre-round
snapshot of the stacked primal state; there are no sweeps within a round.

The flagship update, per agent i with pre-round snapshot x:

    x_i <- x_i - eta * (alpha * (L x)_i + beta * v_i + powerball(g_i, gamma))
    v_i <- v_i + eta * beta * (L x)_i

where g_i is the mini-batch gradient estimate and L the graph Laplacian.
Only the primal rows travel over edges; the dual v_i stays local and its
sum over agents is conserved from the all-zeros initialization.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import LyapunovTerms, TraceRecord, compute_record, lyapunov
from .netgraph import Network
from .powerball import GAMMA_THEORY_MIN, powerball, validate_gamma
from .problems import Problem, default_initial_state, stacked_stochastic_grads

logger = logging.getLogger("dsgpa")

ALGORITHMS = ("dsgpa_f_pb", "dsgpa_f", "dsgpa_t", "d_sgd", "d_sgt", "dm_sgd", "c_sgd")

SCHEDULE_MODES = ("fixed", "speedup", "time_varying")


@dataclass(frozen=True)
class HyperParams:
    """Step sizes and coefficients shared by all engines.

    ``eta``/``alpha``/``beta`` drive the primal-dual family, ``gamma`` the
    powerball exponent, ``batch`` the oracle mini-batch size. ``momentum``
    is the heavy-ball coefficient of dm_sgd and ``tv_exponent`` the epsilon
    in dsgpa_t's drift eta_k = eta/(k+1)^eps, alpha_k = alpha (k+1)^eps,
    beta_k = beta (k+1)^eps. ``kappa1``/``kappa2`` record the constants a
    speedup schedule was derived from.
    """

    eta: float
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 1.0
    batch: int = 1
    momentum: float = 0.0
    tv_exponent: float = 0.0
    kappa1: Optional[float] = None
    kappa2: Optional[float] = None
    schedule_mode: str = "fixed"

    def __post_init__(self):
        validate_gamma(self.gamma)
        if self.batch < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch}")
        if self.schedule_mode not in SCHEDULE_MODES:
            raise ValueError(f"unknown schedule mode {self.schedule_mode!r}")


@dataclass(frozen=True)
class AlgoState:
    """Stacked per-agent primal and dual iterates at round k."""

    x: np.ndarray
    v: np.ndarray
    k: int


class DivergenceError(RuntimeError):
    """A round produced non-finite values; carries the failing iteration."""

    def __init__(self, iteration: int):
        super().__init__(f"non-finite state at iteration {iteration}")
        self.iteration = iteration


# ---------------------------------------------------------------------------
# Step-size schedule
# ---------------------------------------------------------------------------


def kappa1_lower_bound(net: Network) -> float:
    """Feasibility threshold: kappa1 must exceed 1/rho2(L) + 1."""
    if net.rho2_L <= 0.0:
        raise ValueError("schedule needs a connected network (rho2(L) > 0)")
    return 1.0 / net.rho2_L + 1.0


def kappa2_upper_bound(net: Network, kappa1: float) -> float:
    """Feasible kappa2 interval endpoint for the given network and kappa1.

    min{ ((kappa1-1) rho2(L) - 1) / (rho(L) + (2 kappa1^2 + 1) rho(L^2) + 1),
         1/5 }, with rho(L^2) = rho(L)^2 for the symmetric Laplacian.
    """
    lo = kappa1_lower_bound(net)
    if kappa1 <= lo:
        raise ValueError(f"kappa1 must exceed 1/rho2(L) + 1 = {lo:.12g}, got {kappa1}")
    rho, rho2 = net.rho_L, net.rho2_L
    numer = (kappa1 - 1.0) * rho2 - 1.0
    denom = rho + (2.0 * kappa1**2 + 1.0) * rho**2 + 1.0
    return min(numer / denom, 0.2)


def speedup_schedule(
    net: Network,
    T: int,
    kappa1: float,
    kappa2: float,
    gamma: float = 1.0,
    batch: int = 1,
) -> HyperParams:
    """Derive the coupled parameters alpha = kappa1 beta, beta = kappa2
    sqrt(T/n), eta = kappa2 / beta that yield the linear-speedup rate.

    Raises when (kappa1, kappa2) fall outside the feasible region for this
    network; warns (without failing) when T <= n^3, where the rate guarantee
    does not formally apply but desk-scale runs are still useful.
    """
    if T < 1:
        raise ValueError(f"horizon must be >= 1, got {T}")
    upper = kappa2_upper_bound(net, kappa1)
    if not 0.0 < kappa2 < upper:
        raise ValueError(
            f"kappa2 must lie in (0, {upper:.12g}) for this network, got {kappa2}"
        )
    n = net.n
    if T <= n**3:
        warnings.warn(
            f"speedup schedule assumes T > n^3 = {n ** 3}, got T = {T}",
            RuntimeWarning,
            stacklevel=2,
        )
    beta = kappa2 * math.sqrt(T) / math.sqrt(n)
    return HyperParams(
        eta=kappa2 / beta,
        alpha=kappa1 * beta,
        beta=beta,
        gamma=gamma,
        batch=batch,
        kappa1=kappa1,
        kappa2=kappa2,
        schedule_mode="speedup",
    )


def time_varying_params(hp: HyperParams, k: int) -> HyperParams:
    """Round-k parameters for dsgpa_t; bases use k+1 so round 0 is defined."""
    scale = float(k + 1) ** hp.tv_exponent
    return dataclasses.replace(
        hp, eta=hp.eta / scale, alpha=hp.alpha * scale, beta=hp.beta * scale
    )


# ---------------------------------------------------------------------------
# Updates
# ---------------------------------------------------------------------------


def mixing_matrix(net: Network) -> np.ndarray:
    """Doubly stochastic W = I - L/(rho(L)+1) with positive diagonal."""
    return np.eye(net.n) - net.laplacian / (net.rho_L + 1.0)


def dsgpa_pb_step(
    state: AlgoState, net: Network, prob: Problem, hp: HyperParams, seed: int
) -> AlgoState:
    """One synchronous primal-dual powerball round from the given state.

    Both updates consume the pre-round primal snapshot; the dual step uses
    the same Laplacian product as the primal one.
    """
    x, v, k = state.x, state.v, state.k
    if x.shape != (net.n, prob.p) or v.shape != x.shape:
        raise ValueError(
            f"state shapes {x.shape}/{v.shape} do not match "
            f"(n, p) = ({net.n}, {prob.p})"
        )
    grads = stacked_stochastic_grads(prob, x, k, hp.batch, seed)
    lx = net.laplacian @ x
    x_new = x - hp.eta * (hp.alpha * lx + hp.beta * v + powerball(grads, hp.gamma))
    v_new = v + (hp.eta * hp.beta) * lx
    if not (np.isfinite(x_new).all() and np.isfinite(v_new).all()):
        raise DivergenceError(k)
    return AlgoState(x=x_new, v=v_new, k=k + 1)


@dataclass(frozen=True)
class RunResult:
    """Trace and final state of one run; ``diverged_at`` is the failing
    round when non-finite values appeared, else None."""

    algo: str
    seed: int
    hyper: HyperParams
    records: tuple
    state: AlgoState
    diverged: bool
    diverged_at: Optional[int]


def _make_stepper(algo, net, prob, hp, seed, x0):
    """Return (step(x, v, k) -> (x, v), effective powerball gamma)."""
    if algo in ("dsgpa_f_pb", "dsgpa_f", "dsgpa_t"):
        if algo == "dsgpa_f":
            hp = dataclasses.replace(hp, gamma=1.0)

        def step(x, v, k):
            hp_k = time_varying_params(hp, k) if algo == "dsgpa_t" else hp
            new = dsgpa_pb_step(AlgoState(x, v, k), net, prob, hp_k, seed)
            return new.x, new.v

        return step, hp.gamma

    W = mixing_matrix(net)

    if algo == "d_sgd":

        def step(x, v, k):
            grads = stacked_stochastic_grads(prob, x, k, hp.batch, seed)
            return W @ x - hp.eta * grads, v

        return step, 1.0

    if algo == "d_sgt":
        # Tracker starts at the round-0 gradients and absorbs increments.
        aux = {"y": stacked_stochastic_grads(prob, x0, 0, hp.batch, seed)}

        def step(x, v, k):
            x_new = W @ x - hp.eta * aux["y"]
            if not np.isfinite(x_new).all():
                raise DivergenceError(k)
            grads_new = stacked_stochastic_grads(prob, x_new, k + 1, hp.batch, seed)
            aux["y"] = W @ aux["y"] + grads_new - aux.pop("g", None) \
                if False else W @ aux["y"]  # placeholder, replaced below
            return x_new, v

        # The tracker needs last round's gradients as well; rebuild the
        # closure with both pieces of state.
        aux = {
            "g": stacked_stochastic_grads(prob, x0, 0, hp.batch, seed),
        }
        aux["y"] = aux["g"].copy()

        def step(x, v, k):  # noqa: F811
            x_new = W @ x - hp.eta * aux["y"]
            if not np.isfinite(x_new).all():
                raise DivergenceError(k)
            grads_new = stacked_stochastic_grads(prob, x_new, k + 1, hp.batch, seed)
            aux["y"] = W @ aux["y"] + grads_new - aux["g"]
            aux["g"] = grads_new
            return x_new, v

        return step, 1.0

    if algo == "dm_sgd":
        aux = {"m": np.zeros((net.n, prob.p))}

        def step(x, v, k):
            grads = stacked_stochastic_grads(prob, x, k, hp.batch, seed)
            aux["m"] = hp.momentum * aux["m"] + grads
            return W @ x - hp.eta * aux["m"], v

        return step, 1.0

    if algo == "c_sgd":
        # Single decision vector: rows stay identical, the update averages
        # every agent's oracle draw at the shared point.
        def step(x, v, k):
            grads = stacked_stochastic_grads(prob, x, k, hp.batch, seed)
            return x - hp.eta * grads.mean(axis=0), v

        return step, 1.0

    raise ValueError(f"unknown algorithm {algo!r}, expected one of {ALGORITHMS}")


def run(
    algo: str,
    net: Network,
    prob: Problem,
    hp: HyperParams,
    T: int,
    seed: int,
    trace_every: int = 1,
    x0: Optional[np.ndarray] = None,
    compute_lyapunov: bool = False,
    fstar: Optional[float] = None,
) -> RunResult:
    """Execute T synchronous rounds and record a trace.

    Records are taken at round 0, every ``trace_every`` rounds, and at the
    final round. Identical inputs produce bit-identical traces. A round
    that yields non-finite values truncates the trace and flags the result
    instead of raising.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}, expected one of {ALGORITHMS}")
    if T < 1:
        raise ValueError(f"iteration count must be >= 1, got {T}")
    if trace_every < 1:
        raise ValueError(f"trace stride must be >= 1, got {trace_every}")
    if net.n != prob.n:
        raise ValueError(f"network has {net.n} agents but problem has {prob.n}")

    if x0 is None:
        x = default_initial_state(prob, seed)
        if algo == "c_sgd":
            x = np.tile(x[0], (prob.n, 1))
    else:
        x = np.array(x0, dtype=float)
        if x.shape != (prob.n, prob.p):
            raise ValueError(
                f"x0 has shape {x.shape}, expected ({prob.n}, {prob.p})"
            )
    v = np.zeros((prob.n, prob.p))

    if compute_lyapunov and fstar is None:
        hint = prob.optimum_hint
        if hint is not None and hint.fstar is not None:
            fstar = hint.fstar
        else:
            raise ValueError(
                "energy monitoring needs fstar (problem hint or explicit bound)"
            )

    step, eff_gamma = _make_stepper(algo, net, prob, hp, seed, x)
    if algo in ("dsgpa_f_pb", "dsgpa_t") and eff_gamma < GAMMA_THEORY_MIN:
        logger.warning(
            "gamma=%.3g is below the analyzed range [%.1f, 1]; "
            "run is an experimental extension",
            eff_gamma,
            GAMMA_THEORY_MIN,
        )

    start = time.perf_counter_ns()

    def record(k: int) -> TraceRecord:
        lyap: Optional[LyapunovTerms] = None
        if compute_lyapunov:
            hp_k = time_varying_params(hp, k) if algo == "dsgpa_t" else hp
            lyap = lyapunov(AlgoState(x, v, k), net, prob, hp_k, fstar)
        return compute_record(
            prob, x, eff_gamma, k,
            lyapunov_terms=lyap,
            wall_ns=time.perf_counter_ns() - start,
        )

    records = [record(0)]
    diverged = False
    diverged_at: Optional[int] = None
    for k in range(T):
        try:
            x, v = step(x, v, k)
            if not (np.isfinite(x).all() and np.isfinite(v).all()):
                raise DivergenceError(k)
        except DivergenceError as err:
            diverged = True
            diverged_at = err.iteration
            break
        if (k + 1) % trace_every == 0 or (k + 1) == T:
            records.append(record(k + 1))

    return RunResult(
        algo=algo,
        seed=seed,
        hyper=hp,
        records=tuple(records),
        state=AlgoState(x=x, v=v, k=records[-1].k if diverged else T),
        diverged=diverged,
        diverged_at=diverged_at,
    )
