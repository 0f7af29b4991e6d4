"""Stochastic sensor-delivery latency built from per-component statistics.

Each pipeline component (motion capture, simulation processing, network hop)
contributes an independent Gaussian delay truncated at zero; a deterministic
pad can be added to match a target receiver latency.  All values here are in
seconds; milliseconds appear only in the exported report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LatencyComponent:
    name: str
    mean: float  # s
    std: float   # s

    def __post_init__(self):
        if self.mean <= 0:
            raise ValueError(f"component {self.name}: mean must be > 0")
        if self.std < 0:
            raise ValueError(f"component {self.name}: std must be >= 0")


@dataclass(frozen=True)
class LatencyBudget:
    components: tuple[LatencyComponent, ...]
    pad: float = 0.0                 # deterministic added delay, s
    target_end_to_end: float | None = None

    def __post_init__(self):
        if not self.components:
            raise ValueError("latency budget needs at least one component")
        if self.pad < 0:
            raise ValueError("pad must be >= 0")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def nominal_mean(self) -> float:
        return self.pad + sum(c.mean for c in self.components)


# Empirical GNSS-emulation pipeline statistics: motion capture 6.02+/-0.88 ms,
# simulation processing 16.01+/-4.45 ms, network (one-way) 4.62+/-0.98 ms.
# A 73 ms pad brings the nominal path to the 100 ms receiver target.
GNSS_PIPELINE_COMPONENTS = (
    LatencyComponent("mocap", 6.02e-3, 0.88e-3),
    LatencyComponent("sim_processing", 16.01e-3, 4.45e-3),
    LatencyComponent("network", 4.62e-3, 0.98e-3),
)


def default_gnss_budget(pad: float = 73e-3) -> LatencyBudget:
    return LatencyBudget(GNSS_PIPELINE_COMPONENTS, pad=pad, target_end_to_end=0.100)


def sample_latency(budget: LatencyBudget, rng: np.random.Generator) -> float:
    """One end-to-end delay draw: pad + sum of per-component max(0, N(m, s^2))."""
    total = budget.pad
    for c in budget.components:
        d = c.mean if c.std == 0.0 else c.mean + c.std * rng.standard_normal()
        total += max(0.0, d)
    return total


def sample_latency_batch(budget: LatencyBudget, n: int,
                         rng: np.random.Generator) -> np.ndarray:
    """Vectorized batch of `n` draws (same model as sample_latency).

    Draw order matches n successive sample_latency calls componentwise, but
    batching changes generator call granularity, so use one or the other per
    stream within a run.
    """
    total = np.full(n, budget.pad)
    for c in budget.components:
        if c.std == 0.0:
            total += c.mean
        else:
            total += np.maximum(0.0, c.mean + c.std * rng.standard_normal(n))
    return total


@dataclass(frozen=True)
class LatencyStats:
    mean: float
    std: float          # sample std, n-1 denominator
    q1: float
    median: float
    q3: float


def latency_stats(samples: np.ndarray | list[float]) -> LatencyStats:
    """Sample mean, std (n-1), and linearly interpolated quartiles."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("need at least 2 samples")
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return LatencyStats(mean=float(x.mean()), std=float(x.std(ddof=1)),
                        q1=float(q1), median=float(med), q3=float(q3))
