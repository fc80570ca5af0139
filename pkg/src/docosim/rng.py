"""Counter-based random streams for reproducible trials.

Every random quantity in a trial is drawn from a Philox generator keyed by
``(base_seed, trial_index, purpose)``, where ``purpose`` is one of the named
stream constants below. Arrays are always drawn whole, in C order, with shapes
fixed by (horizon, agents[, dim]), so each (round, agent) coordinate owns a
fixed counter position and the result never depends on the order in which the
simulator consumes it.
"""

from __future__ import annotations

import numpy as np

# Stream purposes. Values are part of the on-disk reproducibility contract:
# changing them changes every generated schedule/stream.
STREAM_DELAYS = 1
STREAM_FEATURES = 2
STREAM_NOISE = 3
STREAM_SIGNS = 4
STREAM_MISC = 5


def stream(base_seed: int, trial: int, purpose: int) -> np.random.Generator:
    """Return the named Philox stream for (base_seed, trial, purpose)."""
    seq = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(trial), int(purpose)))
    return np.random.Generator(np.random.Philox(seq))
