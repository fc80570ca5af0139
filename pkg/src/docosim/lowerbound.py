"""Adversarial instances that witness the delay/topology regret floor.

The construction places the agents on a cycle of N = 2(M+1) nodes. Agents
1..M+1 have identically zero losses; agents M+2..N share a piecewise-constant
linear loss eps_k * L * <w, x> on round windows of length M + d, where the
signs eps_k are i.i.d. Rademacher draws (or all +1 in worst mode) and w is a
unit direction realized by the antipodal pair +-(D/2) e_1. All agents suffer
the same constant feedback delay d. Sign-averaged regret of any algorithm on
such instances grows like sqrt((M + d) T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import delays as delay_mod
from . import losses as loss_mod
from . import rng
from .simulator import SimConfig, TrialEnv, run_trial
from .topology import Graph, build_graph, comm_matrix, laplacian

__all__ = ["LowerBoundInstance", "lower_bound_instance", "lower_bound_eval"]


@dataclass(frozen=True)
class LowerBoundInstance:
    m_half: int  # M; the zero-loss side has M+1 agents
    delay: int
    lipschitz: float
    diameter: float
    horizon: int
    signs: np.ndarray  # one per window
    direction: np.ndarray  # unit vector w
    graph: Graph
    schedule: delay_mod.DelaySchedule
    stream: loss_mod.LossStream
    domain: loss_mod.Domain

    @property
    def agents(self) -> int:
        return 2 * (self.m_half + 1)

    @property
    def window(self) -> int:
        return self.m_half + self.delay

    @property
    def probe_agent(self) -> int:
        """The zero-loss agent farthest from the loss-bearing arc."""
        return self.m_half // 2 + 1


def lower_bound_instance(m_half: int, delay: int, lipschitz: float,
                         diameter: float, horizon: int, seed: int,
                         dim: int = 2, mode: str = "random") -> LowerBoundInstance:
    """Build the cycle instance; sign sequence is determined by the seed."""
    if m_half < 2 or m_half % 2 != 0:
        raise ValueError("m_half must be an even integer >= 2")
    if delay < 0:
        raise ValueError("delay must be >= 0")
    if horizon < m_half + delay:
        raise ValueError("horizon must cover at least one window")
    n = 2 * (m_half + 1)
    window = m_half + delay
    n_windows = -(-horizon // window)
    if mode == "random":
        gen = rng.stream(seed, 0, rng.STREAM_SIGNS)
        signs = gen.integers(0, 2, size=n_windows) * 2 - 1
    elif mode == "worst":
        signs = np.ones(n_windows, dtype=np.int64)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    direction = np.zeros(dim)
    direction[0] = 1.0
    feats = np.zeros((horizon, n, dim))
    for t in range(1, horizon + 1):
        k = (t - 1) // window
        feats[t - 1, m_half + 1:, :] = signs[k] * lipschitz * direction
    stream = loss_mod.LossStream(
        features=feats,
        labels=np.zeros((horizon, n)),
        regularized=False,
        family="linear",
        lipschitz=lipschitz,
        alpha=0.0,
    )
    schedule = delay_mod.generate_schedule(
        "constant", {"value": delay}, n, horizon, seed,
    )
    dom = loss_mod.Domain(dim, "ball", diameter / 2.0)
    return LowerBoundInstance(
        m_half=m_half,
        delay=delay,
        lipschitz=lipschitz,
        diameter=diameter,
        horizon=horizon,
        signs=signs,
        direction=direction,
        graph=build_graph("cycle", n),
        schedule=schedule,
        stream=stream,
        domain=dom,
    )


def lower_bound_eval(instance: LowerBoundInstance, algorithm: str = "adftrl_fixed",
                     mixing_c="laplacian") -> dict:
    """Run an algorithm on the instance and measure its regret.

    ``mixing_c="laplacian"`` uses c = 1/sigma1(Lap) (the matrix the bound is
    stated for); any explicit c in (0, 1/sigma1] is also accepted. Returns
    the probe agent's final regret, the max over agents, and the report.
    """
    if mixing_c == "laplacian":
        lap = laplacian(instance.graph)
        mixing_c = 1.0 / float(np.linalg.eigvalsh(lap)[-1])
    cm = comm_matrix(instance.graph, mixing_c)
    env = TrialEnv(
        comm=cm,
        dom=instance.domain,
        schedule=instance.schedule,
        stream=instance.stream,
        arrivals=delay_mod.arrival_table(instance.schedule),
        total_delay=float(instance.schedule.delays.sum() / instance.agents),
        x_star=loss_mod.offline_optimum(instance.stream, instance.domain),
    )
    cfg = SimConfig(
        topology="cycle",
        agents=instance.agents,
        algorithm=algorithm,
        loss_regime="convex",
        delay_kind="constant",
        delay_params=(("value", instance.delay),),
        horizon=instance.horizon,
        trials=1,
        seed=0,
        mixing_c=mixing_c,
        dim=instance.domain.dim,
        lipschitz=instance.lipschitz,
        radius=instance.domain.radius,
    )
    report = run_trial(cfg, 0, env)
    return {
        "reg_probe": float(report.curves[-1, instance.probe_agent - 1]),
        "reg_max": report.reg_final,
        "report": report,
    }


def regret_growth_slope(horizons, regrets) -> float:
    """Least-squares slope of log(regret) against log(horizon)."""
    lx = np.log(np.asarray(horizons, dtype=float))
    ly = np.log(np.asarray(regrets, dtype=float))
    lx = lx - lx.mean()
    return float((lx @ (ly - ly.mean())) / (lx @ lx))
