"""Named, independent RNG streams for reproducible experiments.

Every source of randomness in a run is drawn from one of a fixed set of
named streams, each keyed by (run seed, stream name).  Streams are
statistically independent SeedSequence children, so changing what one
consumer draws (or reseeding one stream) never perturbs the others.
"""

from __future__ import annotations

import numpy as np

# One stream per randomness consumer:
#   channel  - channel realizations and user positions at env.reset
#   noise    - per-episode labels, intra-class jitter, feature noise
#   task     - class-prototype construction
#   policy   - network weight initialization
#   explore  - exploration draws (action sampling, epsilon-greedy, replay)
#   profile  - Monte Carlo draws of standalone accuracy sweeps
STREAM_NAMES = ("channel", "noise", "task", "policy", "explore", "profile")


def stream_rng(seed: int, stream: str) -> np.random.Generator:
    """Generator for one named stream of a run."""
    if stream not in STREAM_NAMES:
        raise ValueError(f"unknown stream {stream!r}, expected one of {STREAM_NAMES}")
    key = STREAM_NAMES.index(stream)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(key,)))
