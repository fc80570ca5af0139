"""Block-synchronous learners: gossip-coupled FTRL variants and a baseline.

All learners share the same round protocol, driven by the simulator:

* within a block every agent plays its current decision and one accelerated
  gossip step runs per round;
* feedback is delivered anonymously as (gradient sum, count) per agent; the
  learner never sees origin timestamps;
* at a block boundary the learner solves its regularized-leader problem for
  the next block and folds the block's received gradients into the gossip
  state.

State is held in dense per-network arrays (one row per agent); agents still
interact only through the mixing matrix, whose zero pattern enforces the
communication graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gossip import GossipState, gossip_init, gossip_step
from .losses import Domain, project
from .topology import CommMatrix

__all__ = [
    "AgentState",
    "BlockUpdate",
    "ftrl_argmin",
    "fixed_rate",
    "FixedRateFtrl",
    "AdaptiveFtrl",
    "StronglyConvexFtrl",
    "GossipGradientBaseline",
    "LEARNERS",
    "make_learner",
]


def ftrl_argmin(z: np.ndarray, eta, dom: Domain) -> np.ndarray:
    """argmin over the domain of <z, x> + (1/eta) ||x||^2.

    The objective equals (1/eta) * ||x + eta*z/2||^2 up to a constant, so the
    minimizer is the projection of -eta*z/2. ``eta`` may be a scalar or a
    per-row vector when z holds one row per agent.
    """
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr <= 0):
        raise ValueError("eta must be positive")
    z = np.asarray(z, dtype=float)
    if z.ndim == 2 and eta_arr.ndim == 1:
        target = -(eta_arr[:, None] * z) / 2.0
    else:
        target = -(eta_arr * z) / 2.0
    return project(dom, target)


def fixed_rate(total_delay: float, block_len: int, horizon: int,
               diameter: float, lipschitz: float) -> float:
    """Horizon-level learning rate D / (L * sqrt(total_delay + B*T))."""
    if min(block_len, horizon, diameter, lipschitz) <= 0 or total_delay < 0:
        raise ValueError("rate parameters must be positive (total_delay >= 0)")
    return diameter / (lipschitz * math.sqrt(total_delay + block_len * horizon))


@dataclass(frozen=True)
class AgentState:
    """Snapshot of one agent's learner state (for inspection and tests)."""

    agent: int
    block: int
    decision: np.ndarray
    z_current: np.ndarray
    z_previous: np.ndarray
    learning_rate: float
    block_grad_sum: np.ndarray
    block_received: int
    zeta_current: float | None = None
    zeta_previous: float | None = None


@dataclass(frozen=True)
class BlockUpdate:
    """What a block-boundary update produced (consumed by invariant checks)."""

    block: int
    z_end: np.ndarray  # gossip state at block end, before the payload fold-in
    payload: np.ndarray  # per-agent vector folded into the gossip state
    full_block: bool  # whether the block ran its nominal length
    zeta_end: np.ndarray | None = None
    q: np.ndarray | None = None


class _BlockLearnerBase:
    """Common block/gossip/delivery machinery."""

    uses_zeta = False

    def __init__(self, cm: CommMatrix, dom: Domain, horizon: int, lipschitz: float):
        self.cm = cm
        self.dom = dom
        self.horizon = int(horizon)
        self.lipschitz = float(lipschitz)
        self.agents = cm.node_count
        self.dim = dom.dim
        self.block_len = cm.block_len
        self.block = 1
        self.decisions = np.zeros((self.agents, self.dim))
        self.z = gossip_init(np.zeros((self.agents, self.dim)))
        self.y_acc = np.zeros((self.agents, self.dim))
        self.block_received = np.zeros(self.agents, dtype=np.int64)
        self.received_total = np.zeros(self.agents, dtype=np.int64)
        self.gossip_steps_in_block = 0

    # -- round protocol ----------------------------------------------------

    def deliver(self, grad_sum: np.ndarray, counts: np.ndarray):
        """Anonymous feedback: summed gradient vectors and their count."""
        self.y_acc += grad_sum
        self.block_received += counts
        self.received_total += counts

    def gossip_round(self):
        self.z = gossip_step(self.z, self.cm)
        self.gossip_steps_in_block += 1

    def end_block(self, rounds_elapsed: int) -> BlockUpdate:
        """Block-boundary update; rounds_elapsed counts all rounds so far."""
        raise NotImplementedError

    # -- shared pieces -----------------------------------------------------

    def _fold_payload(self, payload: np.ndarray):
        self.z = GossipState(
            current=self.z.current + payload,
            previous=self.z.previous + payload,
            step=0,
        )

    def _finish_block(self, payload: np.ndarray, zeta_end=None, q=None) -> BlockUpdate:
        update = BlockUpdate(
            block=self.block,
            z_end=self.z.current.copy(),
            payload=payload.copy(),
            full_block=self.gossip_steps_in_block == self.block_len,
            zeta_end=None if zeta_end is None else zeta_end.copy(),
            q=None if q is None else q.copy(),
        )
        self._fold_payload(payload)
        self.y_acc = np.zeros((self.agents, self.dim))
        self.block_received[:] = 0
        self.gossip_steps_in_block = 0
        self.block += 1
        return update

    def state(self, agent: int) -> AgentState:
        i = agent - 1
        eta = self._eta_of(i)
        zeta_cur = zeta_prev = None
        if self.uses_zeta:
            zeta_cur = float(self.zeta.current[i, 0])
            zeta_prev = float(self.zeta.previous[i, 0])
        return AgentState(
            agent=agent,
            block=self.block,
            decision=self.decisions[i].copy(),
            z_current=self.z.current[i].copy(),
            z_previous=self.z.previous[i].copy(),
            learning_rate=eta,
            block_grad_sum=self.y_acc[i].copy(),
            block_received=int(self.block_received[i]),
            zeta_current=zeta_cur,
            zeta_previous=zeta_prev,
        )

    def _eta_of(self, i: int) -> float:
        raise NotImplementedError


class FixedRateFtrl(_BlockLearnerBase):
    """Gossip-coupled block FTRL with one horizon-level learning rate.

    Requires the total delay (averaged over agents) up front to set the rate.
    """

    def __init__(self, cm, dom, horizon, lipschitz, total_delay: float):
        super().__init__(cm, dom, horizon, lipschitz)
        self.eta = fixed_rate(total_delay, self.block_len, horizon,
                              dom.diameter, lipschitz)

    def end_block(self, rounds_elapsed: int) -> BlockUpdate:
        self.decisions = ftrl_argmin(self.z.current, self.eta, self.dom)
        return self._finish_block(self.y_acc)

    def _eta_of(self, i):
        return self.eta


class AdaptiveFtrl(_BlockLearnerBase):
    """Gossip-coupled block FTRL with per-agent rates from gossiped counts.

    Alongside the gradient gossip, agents gossip their own cumulative
    missing-observation counts; each agent's learning rate shrinks with its
    local estimate of the network-wide count, so no delay totals are needed
    in advance.
    """

    uses_zeta = True

    def __init__(self, cm, dom, horizon, lipschitz):
        super().__init__(cm, dom, horizon, lipschitz)
        b, t = self.block_len, self.horizon
        self.eta = np.full(
            self.agents,
            dom.diameter / (lipschitz * math.sqrt(b * t + 3.0 * b * b)),
        )
        self.zeta = gossip_init(np.zeros(self.agents))

    def gossip_round(self):
        super().gossip_round()
        self.zeta = gossip_step(self.zeta, self.cm)

    def end_block(self, rounds_elapsed: int) -> BlockUpdate:
        q = (rounds_elapsed - self.received_total).astype(float)
        b, t, s = self.block_len, self.horizon, self.block
        zeta_end = self.zeta.current[:, 0]
        radicand = b * t + b * zeta_end + 3.0 * s * b * b
        if np.any(radicand <= 0):
            raise ArithmeticError("nonpositive learning-rate radicand")
        self.eta = self.dom.diameter / (self.lipschitz * np.sqrt(radicand))
        self.decisions = ftrl_argmin(self.z.current, self.eta, self.dom)
        self.zeta = GossipState(
            current=self.zeta.current + q[:, None],
            previous=self.zeta.previous + q[:, None],
            step=0,
        )
        return self._finish_block(self.y_acc, zeta_end=zeta_end, q=q)

    def _eta_of(self, i):
        return float(self.eta[i])


class StronglyConvexFtrl(_BlockLearnerBase):
    """Block FTRL for strongly convex losses: curvature-corrected payloads.

    Folds -alpha*B*x_s into each block's gradient payload and uses the
    deterministic rate 2/(alpha*s*B), identical across agents.
    """

    def __init__(self, cm, dom, horizon, lipschitz, alpha: float):
        if alpha <= 0:
            raise ValueError("alpha must be positive for the strongly convex learner")
        super().__init__(cm, dom, horizon, lipschitz)
        self.alpha = float(alpha)
        self.eta = 2.0 / (self.alpha * self.block_len)  # rate for block 2

    def end_block(self, rounds_elapsed: int) -> BlockUpdate:
        s, b = self.block, self.block_len
        self.eta = 2.0 / (self.alpha * s * b)
        payload = self.y_acc - self.alpha * b * self.decisions
        self.decisions = ftrl_argmin(self.z.current, self.eta, self.dom)
        return self._finish_block(payload)

    def _eta_of(self, i):
        return self.eta


class GossipGradientBaseline(_BlockLearnerBase):
    """Delayed gossip gradient descent: one averaged projected step per block.

    Not one of the accelerated-FTRL family; serves as a plain comparison
    baseline. x_{s+1}(u) = project(sum_v W(u,v) x_s(v) - eta_s * y_s(u)) with
    eta_s = D / (L * sqrt(s*B)).
    """

    def __init__(self, cm, dom, horizon, lipschitz):
        super().__init__(cm, dom, horizon, lipschitz)
        self.eta = dom.diameter / (lipschitz * math.sqrt(self.block_len))

    def gossip_round(self):
        # no per-round gossip; the averaging happens in the block step
        self.gossip_steps_in_block += 1

    def end_block(self, rounds_elapsed: int) -> BlockUpdate:
        s, b = self.block, self.block_len
        self.eta = self.dom.diameter / (self.lipschitz * math.sqrt(s * b))
        mixed = self.cm.matrix @ self.decisions
        self.decisions = project(self.dom, mixed - self.eta * self.y_acc)
        return self._finish_block(self.y_acc)

    def _eta_of(self, i):
        return self.eta


LEARNERS = {
    "adftrl_fixed": FixedRateFtrl,
    "adftrl_adaptive": AdaptiveFtrl,
    "adftrl_sc": StronglyConvexFtrl,
    "baseline_dogd": GossipGradientBaseline,
}


def make_learner(algorithm: str, cm: CommMatrix, dom: Domain, horizon: int,
                 lipschitz: float, alpha: float = 0.0,
                 total_delay: float | None = None):
    """Instantiate a learner by its config identifier."""
    if algorithm == "adftrl_fixed":
        if total_delay is None:
            raise ValueError("adftrl_fixed needs the total delay (known-delay rate)")
        return FixedRateFtrl(cm, dom, horizon, lipschitz, total_delay)
    if algorithm == "adftrl_adaptive":
        return AdaptiveFtrl(cm, dom, horizon, lipschitz)
    if algorithm == "adftrl_sc":
        return StronglyConvexFtrl(cm, dom, horizon, lipschitz, alpha)
    if algorithm == "baseline_dogd":
        return GossipGradientBaseline(cm, dom, horizon, lipschitz)
    raise ValueError(f"unknown algorithm {algorithm!r}")
