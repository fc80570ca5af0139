"""Feedback-delay schedules and their bookkeeping.

A schedule assigns each (round t, agent u) a non-negative integer delay
d_t(u): the gradient of agent u's round-t play becomes visible to u at the
end of round t + d_t(u). Schedules are truncated so that t + d_t(u) <= T
(feedback past the horizon would never be used). Rounds and agents are
1-based in every public interface; arrays are indexed [t-1, u-1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import rng

__all__ = [
    "DelaySchedule",
    "DelayStats",
    "generate_schedule",
    "missing_counts",
    "delay_stats",
    "feedback_arrivals",
    "arrival_table",
    "save_schedule_csv",
    "load_schedule_csv",
    "stats_json",
]

SCHEDULE_KINDS = ("uniform", "geometric", "constant", "custom")


@dataclass(frozen=True)
class DelaySchedule:
    """T x N delay table plus the generating recipe."""

    delays: np.ndarray
    kind: str
    seed: int | None = None
    params: tuple = ()

    @property
    def horizon(self) -> int:
        return self.delays.shape[0]

    @property
    def agents(self) -> int:
        return self.delays.shape[1]

    def __post_init__(self):
        d = np.asarray(self.delays)
        if d.ndim != 2:
            raise ValueError("delays must be a (T, N) array")
        if np.any(d < 0):
            raise ValueError("delays must be non-negative")
        t_idx = np.arange(1, d.shape[0] + 1)[:, None]
        if np.any(t_idx + d > d.shape[0]):
            raise ValueError("schedule violates t + d_t(u) <= T")
        object.__setattr__(self, "delays", d.astype(np.int64))


@dataclass(frozen=True)
class DelayStats:
    """Summary statistics of a schedule on a given block grid.

    delta_max: max over rounds of the per-round missing count averaged over
    agents. total_delay: sum of all delays averaged over agents.
    block_missing[s-1, u-1] is the number of agent u's gradients still
    missing at the block-s boundary; block_missing_avg is its agent average.
    """

    delta_max: float
    total_delay: float
    block_missing: np.ndarray
    block_missing_avg: np.ndarray
    block_len: int


def _truncate(raw: np.ndarray, horizon: int) -> np.ndarray:
    t_idx = np.arange(1, horizon + 1)[:, None]
    return np.minimum(raw, horizon - t_idx)


def generate_schedule(kind: str, params: dict, agents: int, horizon: int, seed: int,
                      trial: int = 0) -> DelaySchedule:
    """Draw an i.i.d. delay table of the requested kind, then truncate.

    uniform: integer delays from {0..max}; geometric: success probability p
    with support {0,1,...} (or {1,2,...} when support="one_based");
    constant: fixed value. Fully determined by (seed, trial).
    """
    if horizon < 1 or agents < 1:
        raise ValueError("need horizon >= 1 and agents >= 1")
    gen = rng.stream(seed, trial, rng.STREAM_DELAYS)
    if kind == "uniform":
        dmax = int(params["max"])
        if dmax < 0:
            raise ValueError("uniform max must be >= 0")
        raw = gen.integers(0, dmax + 1, size=(horizon, agents))
        ptup = (("max", dmax),)
    elif kind == "geometric":
        p = float(params["p"])
        if not (0.0 < p <= 1.0):
            raise ValueError(f"geometric p must be in (0, 1], got {p}")
        support = params.get("support", "zero_based")
        raw = gen.geometric(p, size=(horizon, agents))
        if support == "zero_based":
            raw = raw - 1
        elif support != "one_based":
            raise ValueError(f"unknown geometric support {support!r}")
        ptup = (("p", p), ("support", support))
    elif kind == "constant":
        d = int(params["value"])
        if d < 0:
            raise ValueError("constant delay must be >= 0")
        raw = np.full((horizon, agents), d, dtype=np.int64)
        ptup = (("value", d),)
    elif kind == "custom":
        raw = np.asarray(params["delays"], dtype=np.int64)
        if raw.shape != (horizon, agents):
            raise ValueError(f"custom delays shape {raw.shape} != {(horizon, agents)}")
        ptup = ()
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    return DelaySchedule(_truncate(raw, horizon), kind, seed, ptup)


def missing_counts(sched: DelaySchedule) -> np.ndarray:
    """|m_t(u)|: rounds tau < t whose feedback has not arrived before t.

    Feedback of round tau arrives at the end of round tau + d_tau(u), so it
    is missing at the start of round t exactly when tau + d_tau(u) >= t.
    Returned as a (T, N) array indexed [t-1, u-1].
    """
    horizon, agents = sched.delays.shape
    arrivals = sched.delays + np.arange(1, horizon + 1)[:, None]
    out = np.empty((horizon, agents), dtype=np.int64)
    for u in range(agents):
        # arrived_by[r] = #{tau : tau + d_tau <= r}; tau <= r holds automatically
        counts = np.bincount(arrivals[:, u], minlength=horizon + 1)
        arrived_by = np.cumsum(counts)
        t_idx = np.arange(1, horizon + 1)
        out[:, u] = (t_idx - 1) - arrived_by[t_idx - 1]
    return out


def delay_stats(sched: DelaySchedule, block_len: int) -> DelayStats:
    """Delay statistics on the block grid of length ``block_len``.

    Block-boundary missing counts are evaluated at rounds s*B + 1; the final
    (possibly partial) block is evaluated at T + 1, where nothing can be
    missing because of the horizon truncation.
    """
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    horizon, agents = sched.delays.shape
    miss = missing_counts(sched)
    delta_max = float(miss.mean(axis=1).max()) if horizon else 0.0
    total = float(sched.delays.sum() / agents)

    n_blocks = -(-horizon // block_len)
    q = np.zeros((n_blocks, agents), dtype=np.int64)
    arrivals = sched.delays + np.arange(1, horizon + 1)[:, None]
    for s in range(1, n_blocks + 1):
        boundary = s * block_len + 1
        if boundary <= horizon:
            q[s - 1] = miss[boundary - 1]
        else:
            # boundary T+1: count feedback still outstanding after round T
            q[s - 1] = (arrivals > horizon).sum(axis=0)
    return DelayStats(
        delta_max=delta_max,
        total_delay=total,
        block_missing=q,
        block_missing_avg=q.mean(axis=1),
        block_len=block_len,
    )


def feedback_arrivals(sched: DelaySchedule, t: int) -> list:
    """All (agent, origin round) pairs whose feedback lands at end of round t."""
    if not (1 <= t <= sched.horizon):
        raise ValueError(f"round {t} outside 1..{sched.horizon}")
    arrivals = sched.delays + np.arange(1, sched.horizon + 1)[:, None]
    taus, agents = np.nonzero(arrivals == t)
    return [(int(u + 1), int(tau + 1)) for tau, u in zip(taus, agents)]


def arrival_table(sched: DelaySchedule) -> list:
    """Per-round arrival index arrays for the simulator's delivery loop.

    Entry t-1 holds (origin_rounds, agent_indices) as 0-based arrays of all
    feedback items arriving at the end of round t.
    """
    horizon, _ = sched.delays.shape
    arrivals = sched.delays + np.arange(1, horizon + 1)[:, None]
    taus, agents = np.nonzero(arrivals >= 1)  # all items, in (tau, u) order
    arrive_at = arrivals[taus, agents]
    order = np.argsort(arrive_at, kind="stable")
    taus, agents, arrive_at = taus[order], agents[order], arrive_at[order]
    bounds = np.searchsorted(arrive_at, np.arange(1, horizon + 2))
    return [
        (taus[bounds[i]:bounds[i + 1]], agents[bounds[i]:bounds[i + 1]])
        for i in range(horizon)
    ]


def save_schedule_csv(sched: DelaySchedule, path):
    with open(path, "w") as fh:
        fh.write("t,agent,delay\n")
        for t in range(1, sched.horizon + 1):
            for u in range(1, sched.agents + 1):
                fh.write(f"{t},{u},{sched.delays[t - 1, u - 1]}\n")


def load_schedule_csv(path) -> DelaySchedule:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "t,agent,delay":
            raise ValueError(f"unexpected schedule header {header!r}")
        for ln in fh:
            if ln.strip():
                t, u, d = ln.strip().split(",")
                rows.append((int(t), int(u), int(d)))
    horizon = max(r[0] for r in rows)
    agents = max(r[1] for r in rows)
    table = np.zeros((horizon, agents), dtype=np.int64)
    seen = np.zeros((horizon, agents), dtype=bool)
    for t, u, d in rows:
        table[t - 1, u - 1] = d
        seen[t - 1, u - 1] = True
    if not seen.all():
        raise ValueError("schedule CSV does not cover every (t, agent) pair")
    return DelaySchedule(table, "custom", None, ())


def stats_json(stats: DelayStats) -> str:
    return json.dumps(
        {
            "delta_max": stats.delta_max,
            "total_delay": stats.total_delay,
            "block_len": stats.block_len,
            "block_missing_avg": [float(x) for x in stats.block_missing_avg],
        },
        indent=2,
    )
