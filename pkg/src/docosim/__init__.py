"""Decentralized online convex optimization over gossip networks, simulated.

A deterministic library and CLI for studying multi-agent online learning
when gradient feedback arrives with unknown, time- and agent-varying delays:
graph topologies and mixing matrices, accelerated gossip consensus, block
FTRL learners (fixed-rate, delay-adaptive, strongly convex) plus a gossip
gradient-descent baseline, exact regret accounting against the offline
optimum, and adversarial lower-bound instances.
"""

__version__ = "0.1.0"

from .delays import DelaySchedule, DelayStats, delay_stats, generate_schedule, missing_counts
from .gossip import GossipState, gossip_init, gossip_run, gossip_step
from .learners import AgentState, ftrl_argmin, fixed_rate, make_learner
from .losses import (
    Domain,
    LossStream,
    NonConvergenceError,
    RegretReport,
    default_lipschitz,
    generate_stream,
    grad,
    offline_optimum,
    project,
    regret_curve,
)
from .lowerbound import LowerBoundInstance, lower_bound_eval, lower_bound_instance
from .simulator import (
    ExperimentResult,
    SimConfig,
    TrialEnv,
    compare_algorithms,
    prepare_trial,
    run_experiment,
    run_trial,
)
from .topology import (
    CommMatrix,
    Graph,
    block_params,
    build_graph,
    comm_matrix,
    laplacian,
    spectral_gap_report,
)
