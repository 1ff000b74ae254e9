"""Counter-based random stream derivation.

Every random quantity in a run is drawn from a Philox generator whose key
and counter are pure functions of (seed, purpose, round), so

* reruns with the same seed are bit-identical,
* streams for different rounds or purposes never overlap,
* adding seeds to an experiment never perturbs existing runs.

The per-round oracle stream hands out noise in agent order; because leading
draws of a stream do not depend on how much is requested afterwards, agent
i's block is itself a pure function of (seed, i, round, draw index).
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Second key word separating the independent stream families.
ORACLE_TAG = 0x6F7261636C        # gradient-noise draws
INIT_TAG = 0x696E6974            # initial iterates
GRAPH_TAG = 0x6772617068         # reserved for graph-level sampling


def u64(x: int) -> int:
    return int(x) & _MASK64


def oracle_rng(seed: int, k: int) -> np.random.Generator:
    """Noise stream for round ``k``; agents consume it in index order."""
    return np.random.Generator(
        np.random.Philox(key=[u64(seed), ORACLE_TAG], counter=[0, 0, 0, u64(k)])
    )


def init_rng(seed: int) -> np.random.Generator:
    """Stream for the initial iterates of one run."""
    return np.random.Generator(
        np.random.Philox(key=[u64(seed), INIT_TAG], counter=[0, 0, 0, 0])
    )
