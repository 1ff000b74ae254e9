"""The elementwise powerball map sgn(x)|x|^gamma and the p-norms around it.

The exponent gamma is accepted anywhere in [0, 1]: the convergence theory
covers [1/2, 1], while values below 1/2 (down to the pure sign map at
gamma = 0) are an experimental extension that the runner flags with a
warning.
"""

from __future__ import annotations

import numpy as np

# Range covered by the convergence analysis; smaller gamma is experimental.
GAMMA_THEORY_MIN = 0.5


def validate_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    return gamma


def in_theory_range(gamma: float) -> bool:
    """True when gamma is inside the analyzed range [1/2, 1]."""
    return GAMMA_THEORY_MIN <= gamma <= 1.0


def powerball(v, gamma: float) -> np.ndarray:
    """Apply sgn(v_l)|v_l|^gamma per coordinate; zero maps to zero.

    gamma = 1 returns the input values exactly, gamma = 0 is the sign map.
    Raising |v| (never the signed value) keeps negative entries away from
    fractional powers of negative bases.
    """
    gamma = validate_gamma(gamma)
    v = np.asarray(v, dtype=float)
    if gamma == 1.0:
        return v.copy()
    return np.sign(v) * np.abs(v) ** gamma


def pnorm(v, p: float) -> float:
    """The p-norm (sum_l |v_l|^p)^(1/p) for p >= 1."""
    p = float(p)
    if p < 1.0:
        raise ValueError(f"p-norm requires p >= 1, got {p}")
    v = np.asarray(v, dtype=float)
    return float(np.linalg.norm(v, ord=p)) if v.size else 0.0


def powerball_bound_gap(v, gamma: float) -> float:
    """Slack of the norm bound ||powerball(v, gamma)||^2 <= ||v||^2_{1+gamma}.

    Returns ||v||^2_{1+gamma} - ||powerball(v, gamma)||^2, which the bound
    asserts is nonnegative for gamma in [1/2, 1). Only that range is
    accepted here; the bound does not hold in general outside it.
    """
    gamma = float(gamma)
    if not GAMMA_THEORY_MIN <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0.5, 1), got {gamma}")
    s = powerball(v, gamma)
    return pnorm(v, 1.0 + gamma) ** 2 - float(np.dot(s, s))
