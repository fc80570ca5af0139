"""Accelerated gossip consensus engine.

One step maps per-node payloads x^k to

    x^{k+1}(u) = (1 + theta) * sum_v W(u,v) x^k(v) - theta * x^{k-1}(u),

initialized with x^0 = x^{-1} = the input payloads. The engine is payload-
dimension generic: the same recurrence serves vector payloads (gradient
accumulators) and scalar ones (missing-observation counts, as column vectors
of width 1). Each step preserves the network mean exactly up to float error
and contracts the deviation from the mean geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .topology import CommMatrix

__all__ = ["GossipState", "gossip_init", "gossip_step", "gossip_run"]


@dataclass(frozen=True)
class GossipState:
    """Current and one-step-lagged payloads, one row per node."""

    current: np.ndarray
    previous: np.ndarray
    step: int


def gossip_init(payloads: np.ndarray) -> GossipState:
    """Start a gossip run: current = previous = payloads, step 0."""
    arr = np.asarray(payloads, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"payloads must be (nodes, dim), got shape {arr.shape}")
    return GossipState(current=arr.copy(), previous=arr.copy(), step=0)


def gossip_step(state: GossipState, cm: CommMatrix) -> GossipState:
    """One accelerated gossip step under the given mixing matrix."""
    if state.current.shape[0] != cm.node_count:
        raise ValueError(
            f"payload rows {state.current.shape[0]} != nodes {cm.node_count}"
        )
    nxt = (1.0 + cm.theta) * (cm.matrix @ state.current) - cm.theta * state.previous
    return GossipState(current=nxt, previous=state.current, step=state.step + 1)


def gossip_run(payloads: np.ndarray, cm: CommMatrix, steps: int) -> np.ndarray:
    """Apply ``steps`` gossip steps and return the resulting payloads."""
    if steps < 0:
        raise ValueError("steps must be >= 0")
    state = gossip_init(payloads)
    for _ in range(steps):
        state = gossip_step(state, cm)
    out = state.current
    if np.asarray(payloads).ndim == 1:
        return out[:, 0]
    return out
