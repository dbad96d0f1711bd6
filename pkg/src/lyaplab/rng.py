"""Counter-based random streams, one per trajectory.

Every trajectory draws from its own Philox stream keyed by
(seed, trajectory_index), so the noise consumed by trajectory i never
depends on how many other trajectories run, in what order, or on how
the work is chunked.  Replaying a single trajectory in isolation
reproduces it bit for bit.
"""

from __future__ import annotations

import numpy as np


def trajectory_stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trajectory `index` under master `seed`."""
    if index < 0:
        raise ValueError(f"trajectory index must be >= 0, got {index}")
    ss = np.random.SeedSequence(entropy=(int(seed) & (2**64 - 1), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def derived_stream(seed: int, *tags: int) -> np.random.Generator:
    """Deterministic generator for auxiliary draws (probes, nets, presets)."""
    ss = np.random.SeedSequence(entropy=(int(seed) & (2**64 - 1),) + tuple(int(t) for t in tags))
    return np.random.Generator(np.random.Philox(ss))
