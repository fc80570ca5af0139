"""Lockstep trial orchestration, invariant monitoring, and aggregation.

One trial runs T rounds. Per round: every agent plays its block decision;
the environment records the gradient of each agent's own loss at the played
point; feedback whose delay expires this round is delivered anonymously; one
gossip step executes. At block boundaries the learner's block update runs.
Regret is accounted by the environment at the played points each round, no
matter when the learner sees the feedback.

Trials are independently seeded and may run in parallel processes; within a
trial everything is single-threaded and deterministic in (seed, trial index).
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import delays as delay_mod
from . import losses as loss_mod
from .learners import make_learner
from .losses import Domain, LossStream, RegretReport
from .topology import CommMatrix, Graph, block_params, build_graph, comm_matrix

__all__ = [
    "SimConfig",
    "TrialEnv",
    "ExperimentResult",
    "prepare_trial",
    "run_trial",
    "run_experiment",
    "compare_algorithms",
    "write_regret_csv",
    "write_trials_csv",
    "save_trajectory_csv",
]

ALGORITHMS = ("adftrl_fixed", "adftrl_adaptive", "adftrl_sc", "baseline_dogd")
LOSS_REGIMES = ("convex", "strongly_convex")
ENVIRONMENT_FIELDS = (
    "topology", "agents", "mixing_c", "loss_regime", "dim", "lipschitz",
    "alpha", "delay_kind", "delay_params", "horizon", "trials", "seed",
    "radius", "block_len",
)


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one experiment."""

    topology: str
    agents: int
    algorithm: str
    loss_regime: str
    delay_kind: str
    horizon: int
    trials: int = 1
    seed: int = 0
    mixing_c: object = "auto"
    dim: int = 10
    lipschitz: object = "auto"
    alpha: object = "auto"
    delay_params: tuple = ()
    radius: float = 2.0
    block_len: int | None = None
    known_total_delay: bool = True
    check_invariants: bool = True

    def resolved_lipschitz(self) -> float:
        if self.lipschitz == "auto":
            return loss_mod.default_lipschitz(self.dim, self.radius)
        return float(self.lipschitz)

    def resolved_alpha(self) -> float:
        if self.alpha == "auto":
            return 1.0 if self.loss_regime == "strongly_convex" else 0.0
        return float(self.alpha)

    def delay_params_dict(self) -> dict:
        return dict(self.delay_params)

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        if self.loss_regime not in LOSS_REGIMES:
            raise ValueError(f"unknown loss regime {self.loss_regime!r}")
        if self.horizon < 1 or self.trials < 1 or self.agents < 1 or self.dim < 1:
            raise ValueError("horizon, trials, agents, and dim must be positive")
        if self.agents > 1 and self.agents % 2 != 0:
            raise ValueError("the loss label rule needs an even number of agents")
        if self.algorithm == "adftrl_sc":
            if self.loss_regime != "strongly_convex":
                raise ValueError("adftrl_sc requires the strongly convex regime")
            if self.resolved_alpha() <= 0:
                raise ValueError("adftrl_sc requires alpha > 0")
        if self.algorithm == "adftrl_fixed" and not self.known_total_delay:
            raise ValueError("adftrl_fixed needs known_total_delay")
        if self.block_len is not None and self.block_len < 1:
            raise ValueError("block_len override must be >= 1")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class TrialEnv:
    """The per-trial world shared by all algorithms under paired comparison."""

    comm: CommMatrix
    dom: Domain
    schedule: delay_mod.DelaySchedule
    stream: LossStream
    arrivals: list
    total_delay: float
    x_star: np.ndarray


def build_comm(cfg: SimConfig) -> CommMatrix:
    """Mixing matrix for the config's topology, honoring a block override."""
    if cfg.agents == 1:
        g = Graph.trivial()
    else:
        g = build_graph(cfg.topology, cfg.agents)
    cm = comm_matrix(g, cfg.mixing_c)
    if cfg.block_len is not None and cfg.block_len != cm.block_len:
        cm = replace(cm, block_len=cfg.block_len)
    return cm


def prepare_trial(cfg: SimConfig, trial: int, cm: CommMatrix | None = None) -> TrialEnv:
    """Draw the trial's world: delay schedule, loss stream, offline optimum."""
    cm = cm if cm is not None else build_comm(cfg)
    dom = Domain(cfg.dim, "ball", cfg.radius)
    schedule = delay_mod.generate_schedule(
        cfg.delay_kind, cfg.delay_params_dict(), cfg.agents, cfg.horizon,
        cfg.seed, trial,
    )
    stream = loss_mod.generate_stream(
        cfg.agents, cfg.horizon, cfg.dim, cfg.seed, cfg.loss_regime, trial,
        lipschitz=cfg.resolved_lipschitz(),
    )
    return TrialEnv(
        comm=cm,
        dom=dom,
        schedule=schedule,
        stream=stream,
        arrivals=delay_mod.arrival_table(schedule),
        total_delay=float(schedule.delays.sum() / cfg.agents),
        x_star=loss_mod.offline_optimum(stream, dom),
    )


class InvariantMonitor:
    """Block-level checks of the gossip deviation bounds during a run.

    The count-gossip check (per-agent estimate vs true cumulative average
    missing count, slack 3*s*B) applies at every block boundary. The
    gradient-gossip deviation check applies only to full-length blocks; a
    truncated final block runs fewer gossip steps than the bound assumes.
    """

    REL_TOL = 1e-9

    def __init__(self, cm: CommMatrix, track_zeta: bool):
        self.n = cm.node_count
        self.block_len = cm.block_len
        self.b_pow_b = cm.contraction_base ** cm.block_len
        self.track_zeta = track_zeta
        self.zbar = None
        self.contraction_sum = 0.0
        self.m_sum = 0.0
        self.z_checked = 0
        self.z_violations = 0
        self.z_max_ratio = 0.0
        self.zeta_checked = 0
        self.zeta_violations = 0
        self.zeta_max_ratio = 0.0

    def observe(self, upd):
        s = upd.block
        if self.track_zeta and upd.zeta_end is not None:
            bound = 3.0 * s * self.block_len
            gap = float(np.max(np.abs(upd.zeta_end - self.m_sum)))
            self.zeta_checked += 1
            self.zeta_max_ratio = max(self.zeta_max_ratio, gap / bound)
            if gap > bound * (1.0 + self.REL_TOL) + 1e-9:
                self.zeta_violations += 1
            self.m_sum += float(upd.q.mean())
        if self.zbar is None:
            self.zbar = np.zeros(upd.payload.shape[1])
        if upd.full_block:
            dev = float(np.max(np.linalg.norm(upd.z_end - self.zbar, axis=1)))
            bound = 2.0 / (self.n * math.sqrt(self.n)) * self.contraction_sum
            self.z_checked += 1
            if bound > 0:
                self.z_max_ratio = max(self.z_max_ratio, dev / bound)
            if dev > bound * (1.0 + self.REL_TOL) + 1e-9:
                self.z_violations += 1
        a_s = float(np.sqrt(np.sum(upd.payload * upd.payload)))
        self.contraction_sum = self.contraction_sum * self.b_pow_b + a_s
        self.zbar = self.zbar + upd.payload.mean(axis=0)

    def summary(self) -> dict:
        return {
            "z_checked": self.z_checked,
            "z_violations": self.z_violations,
            "z_max_ratio": self.z_max_ratio,
            "zeta_checked": self.zeta_checked,
            "zeta_violations": self.zeta_violations,
            "zeta_max_ratio": self.zeta_max_ratio,
        }


def run_trial(cfg: SimConfig, trial: int, env: TrialEnv | None = None,
              keep_trajectory: bool = False) -> RegretReport:
    """Run one trial and return its regret report.

    Deterministic in (cfg.seed, trial). A prebuilt environment may be passed
    for paired comparisons or custom instances.
    """
    cfg.validate()
    if env is None:
        env = prepare_trial(cfg, trial)
    cm, stream, dom = env.comm, env.stream, env.dom
    horizon, agents, dim = stream.horizon, stream.agents, stream.dim
    learner = make_learner(
        cfg.algorithm, cm, dom, horizon, cfg.resolved_lipschitz(),
        alpha=cfg.resolved_alpha(), total_delay=env.total_delay,
    )
    monitor = None
    if cfg.check_invariants and cfg.algorithm != "baseline_dogd":
        monitor = InvariantMonitor(cm, track_zeta=cfg.algorithm == "adftrl_adaptive")

    block_len = cm.block_len
    g_log = np.empty((horizon, agents, dim))
    traj = np.empty((horizon, agents, dim))
    for t in range(1, horizon + 1):
        plays = learner.decisions
        traj[t - 1] = plays
        g_log[t - 1] = loss_mod.own_gradients(stream, t, plays)
        taus, who = env.arrivals[t - 1]
        if taus.size:
            sums = np.zeros((agents, dim))
            np.add.at(sums, who, g_log[taus, who])
            counts = np.bincount(who, minlength=agents)
            learner.deliver(sums, counts)
        learner.gossip_round()
        if t % block_len == 0 or t == horizon:
            upd = learner.end_block(t)
            if monitor is not None:
                monitor.observe(upd)

    meta = {
        "trial": trial,
        "seed": cfg.seed,
        "algorithm": cfg.algorithm,
        "topology": cfg.topology,
        "delay_kind": cfg.delay_kind,
        "total_delay": env.total_delay,
        "block_len": block_len,
    }
    if monitor is not None:
        meta["invariants"] = monitor.summary()
    report = loss_mod.regret_curve(traj, stream, env.x_star, metadata=meta)
    if keep_trajectory:
        report.metadata["trajectory"] = traj
    return report


@dataclass
class ExperimentResult:
    """Aggregate of one config over its trials."""

    config: SimConfig
    mean_curve: np.ndarray  # (T,) mean over trials of max-over-agents regret
    std_curve: np.ndarray  # (T,) sample std (ddof=1; zero for one trial)
    trial_curves: np.ndarray  # (trials, T)
    trial_finals: np.ndarray  # (trials, N) per-agent final regret
    invariants: dict = field(default_factory=dict)
    wall_seconds: float = 0.0

    @property
    def mean_final(self) -> float:
        return float(self.mean_curve[-1])


def _reduce_report(report: RegretReport):
    inv = report.metadata.get("invariants")
    return report.max_curve, report.final_per_agent, inv


def _trial_job(cfg: SimConfig, trial: int):
    return _reduce_report(run_trial(cfg, trial))


def _merge_invariants(parts) -> dict:
    total = {
        "z_checked": 0, "z_violations": 0, "z_max_ratio": 0.0,
        "zeta_checked": 0, "zeta_violations": 0, "zeta_max_ratio": 0.0,
    }
    seen = False
    for p in parts:
        if p is None:
            continue
        seen = True
        for k in ("z_checked", "z_violations", "zeta_checked", "zeta_violations"):
            total[k] += p[k]
        for k in ("z_max_ratio", "zeta_max_ratio"):
            total[k] = max(total[k], p[k])
    return total if seen else {}


def _aggregate(cfg: SimConfig, reduced, wall: float) -> ExperimentResult:
    curves = np.stack([r[0] for r in reduced])
    finals = np.stack([r[1] for r in reduced])
    mean = curves.mean(axis=0)
    std = curves.std(axis=0, ddof=1) if len(reduced) > 1 else np.zeros_like(mean)
    return ExperimentResult(
        config=cfg,
        mean_curve=mean,
        std_curve=std,
        trial_curves=curves,
        trial_finals=finals,
        invariants=_merge_invariants([r[2] for r in reduced]),
        wall_seconds=wall,
    )


def run_experiment(cfg: SimConfig, threads: int = 1) -> ExperimentResult:
    """Run all trials of a config; trial t uses seeds derived from (seed, t)."""
    cfg.validate()
    start = time.perf_counter()
    if threads > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reduced = list(pool.map(_trial_job, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        cm = build_comm(cfg)
        reduced = [
            _reduce_report(run_trial(cfg, t, prepare_trial(cfg, t, cm)))
            for t in range(cfg.trials)
        ]
    return _aggregate(cfg, reduced, time.perf_counter() - start)


def _paired_job(cfgs, trial: int):
    env = prepare_trial(cfgs[0], trial)
    return [_reduce_report(run_trial(c, trial, env)) for c in cfgs]


def compare_algorithms(cfgs, threads: int = 1) -> dict:
    """Run several algorithms against identical per-trial worlds.

    All configs must agree on every environment field; only the algorithm
    (and the known-delay flag it implies) may differ. Returns a dict mapping
    algorithm name to its ExperimentResult.
    """
    if not cfgs:
        raise ValueError("need at least one config")
    base = cfgs[0]
    for c in cfgs[1:]:
        for f in ENVIRONMENT_FIELDS:
            if getattr(c, f) != getattr(base, f):
                raise ValueError(f"configs differ in environment field {f!r}")
    for c in cfgs:
        c.validate()
    start = time.perf_counter()
    if threads > 1 and base.trials > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(_paired_job, [cfgs] * base.trials,
                                      range(base.trials)))
    else:
        cm = build_comm(base)
        per_trial = []
        for t in range(base.trials):
            env = prepare_trial(base, t, cm)
            per_trial.append([_reduce_report(run_trial(c, t, env)) for c in cfgs])
    wall = time.perf_counter() - start
    out = {}
    for i, c in enumerate(cfgs):
        out[c.algorithm] = _aggregate(c, [row[i] for row in per_trial], wall)
    return out


def write_regret_csv(entries, path):
    """entries: iterable of (algorithm, topology, ExperimentResult)."""
    with open(path, "w") as fh:
        fh.write("algorithm,topology,t,mean_regret,std_regret\n")
        for algorithm, topology, res in entries:
            mean, std = res.mean_curve, res.std_curve
            for t in range(1, mean.shape[0] + 1):
                fh.write(f"{algorithm},{topology},{t},{mean[t - 1]!r},{std[t - 1]!r}\n")


def write_trials_csv(entries, path):
    """Per-trial, per-agent final regret rows."""
    with open(path, "w") as fh:
        fh.write("algorithm,topology,trial,agent,final_regret\n")
        for algorithm, topology, res in entries:
            finals = res.trial_finals
            for trial in range(finals.shape[0]):
                for agent in range(1, finals.shape[1] + 1):
                    fh.write(
                        f"{algorithm},{topology},{trial},{agent},"
                        f"{finals[trial, agent - 1]!r}\n"
                    )


def save_trajectory_csv(trajectory: np.ndarray, trial: int, path):
    """Rows `trial,t,agent,x_1..x_n` for oracle cross-checks."""
    horizon, agents, dim = trajectory.shape
    header = "trial,t,agent," + ",".join(f"x_{i}" for i in range(1, dim + 1))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for t in range(1, horizon + 1):
            for u in range(1, agents + 1):
                xs = ",".join(repr(v) for v in trajectory[t - 1, u - 1])
                fh.write(f"{trial},{t},{u},{xs}\n")
