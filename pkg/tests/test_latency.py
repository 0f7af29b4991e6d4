import numpy as np
import pytest

from fdisim.latency import (GNSS_PIPELINE_COMPONENTS, LatencyBudget,
                            LatencyComponent, default_gnss_budget,
                            latency_stats, sample_latency,
                            sample_latency_batch)
from fdisim.reports import latency_report


def _deterministic_budget(pad=0.0):
    comps = tuple(LatencyComponent(c.name, c.mean, 0.0)
                  for c in GNSS_PIPELINE_COMPONENTS)
    return LatencyBudget(comps, pad=pad)


def test_component_means_sum_deterministically():
    # 6.02 + 16.01 + 4.62 ms = 26.65 ms with all stds zero
    budget = _deterministic_budget()
    L = sample_latency(budget, np.random.default_rng(0))
    assert L == pytest.approx(26.65e-3, abs=1e-12)


def test_pad_brings_total_to_receiver_target():
    budget = _deterministic_budget(pad=73e-3)
    L = sample_latency(budget, np.random.default_rng(0))
    assert L == pytest.approx(99.65e-3, abs=1e-12)
    assert default_gnss_budget().target_end_to_end == pytest.approx(0.100)


def test_single_deterministic_component():
    budget = LatencyBudget((LatencyComponent("one", 0.001, 0.0),))
    assert sample_latency(budget, np.random.default_rng(0)) == 0.001


def test_samples_always_at_least_pad():
    budget = LatencyBudget(
        (LatencyComponent("noisy", 0.001, 0.5),), pad=0.25)
    rng = np.random.default_rng(3)
    draws = [sample_latency(budget, rng) for _ in range(2000)]
    assert min(draws) >= 0.25


def test_monte_carlo_mean_matches_budget():
    # Truncation correction is negligible: every mean/std ratio > 3.5.
    budget = default_gnss_budget(pad=0.0)
    draws = sample_latency_batch(budget, 10_000, np.random.default_rng(11))
    se = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - budget.nominal_mean) < 3 * se


def test_out_of_order_delivery_occurs_when_variance_dominates_gap():
    # With a 10 ms sampling gap and 4.45 ms per-component std, consecutive
    # deliveries invert with appreciable probability (a 100 ms gap would
    # make inversions a ~15-sigma event, so the property is tested here at
    # a rate where it genuinely holds).
    budget = LatencyBudget((LatencyComponent("proc", 16.01e-3, 4.45e-3),))
    rng = np.random.default_rng(5)
    gap = 0.010
    stamps = np.arange(10_000) * gap
    deliver = stamps + sample_latency_batch(budget, stamps.size, rng)
    inversions = int(np.sum(np.diff(deliver) < 0))
    assert inversions > 0


def test_latency_stats_constant_and_hand_computed():
    s = latency_stats([1.0, 1.0, 1.0, 1.0])
    assert s.mean == 1.0 and s.std == 0.0
    s = latency_stats([1, 2, 3, 4, 5])
    assert s.mean == pytest.approx(3.0)
    assert s.std == pytest.approx(1.5811388300841898)  # sqrt(2.5)
    assert (s.q1, s.median, s.q3) == (2.0, 3.0, 4.0)


def test_latency_stats_requires_two_samples():
    with pytest.raises(ValueError):
        latency_stats([1.0])


def test_budget_validation():
    with pytest.raises(ValueError):
        LatencyBudget(())
    with pytest.raises(ValueError):
        LatencyBudget((LatencyComponent("x", 0.01, 0.0),), pad=-1.0)
    with pytest.raises(ValueError):
        LatencyComponent("x", 0.0, 0.0)
    with pytest.raises(ValueError):
        LatencyComponent("x", 0.01, -0.1)


def test_latency_report_degenerate_quartiles_equal_mean():
    budget = _deterministic_budget(pad=0.0)
    csv_text = latency_report(budget, 200, seed=0)
    lines = csv_text.strip().split("\n")
    assert lines[0] == "component,mean_ms,std_ms,q1_ms,median_ms,q3_ms"
    end = lines[-1].split(",")
    assert end[0] == "end_to_end"
    mean, std, q1, med, q3 = map(float, end[1:])
    assert mean == pytest.approx(26.65)
    assert std == 0.0
    assert q1 == med == q3 == pytest.approx(26.65)
