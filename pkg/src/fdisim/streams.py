"""Named, independent random sub-streams derived from one scenario seed.

Every stochastic element of a run (plant disturbance, GNSS noise, GNSS
latency, each camera, the tracker, the attack) draws from its own PCG64
generator keyed by (seed, stream name).  Adding or removing one sensor
therefore never perturbs the draws seen by the others, which keeps paired
runs (e.g. attacked vs. nominal on the same seed) comparable.
"""

from __future__ import annotations

import numpy as np

ALGORITHM = "PCG64"

# Core stream names; per-camera streams are derived as ("camera", index).
DYNAMICS = "dynamics"
GNSS_NOISE = "gnss-noise"
GNSS_LATENCY = "gnss-latency"
CAMERA = "camera"
CAMERA_LATENCY = "camera-latency"
TRACKER = "tracker"
ATTACK = "attack"


def _key(name: str) -> int:
    # Stable, platform-independent integer key for a stream name.
    return int.from_bytes(name.encode("utf-8"), "big")


class RngStreams:
    """Factory for the named sub-streams of one simulation run."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[tuple, np.random.Generator] = {}

    def get(self, name: str, index: int | None = None) -> np.random.Generator:
        """Return the generator for `name` (and sub-index, e.g. camera id).

        Repeated calls return the same generator object, so draw order
        within a stream is the order of use during the run.
        """
        key = (name, index)
        if key not in self._cache:
            entropy = [self.seed, _key(name)]
            if index is not None:
                entropy.append(int(index))
            seq = np.random.SeedSequence(entropy)
            self._cache[key] = np.random.Generator(np.random.PCG64(seq))
        return self._cache[key]
