"""One run seed, several named substreams (mask, noise, init, split).

Every random choice in a run flows from the single user seed through one of
these named streams, so changing e.g. the noise draw cannot perturb the mask.
"""

from __future__ import annotations

import numpy as np

STREAMS = {"mask": 0, "noise": 1, "init": 2, "split": 3}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise ValueError(f"unknown stream {name!r}, expected one of {sorted(STREAMS)}")
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))


def stream_seed(seed: int, name: str, index: int = 0) -> int:
    """Derive a deterministic integer seed (for net init) from a stream."""
    if name not in STREAMS:
        raise ValueError(f"unknown stream {name!r}, expected one of {sorted(STREAMS)}")
    ss = np.random.SeedSequence(seed, spawn_key=(STREAMS[name], index))
    return int(ss.generate_state(1)[0])
