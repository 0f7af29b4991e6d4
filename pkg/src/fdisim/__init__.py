"""Deterministic closed-loop simulator for UAV false-data-injection studies.

Emulated GNSS with an empirically parameterized latency budget, a stealthy
meaconing attack, onboard Kalman filtering with a chi-squared monitor, a
camera-network particle-filter tracker, a lifted parity-space offboard
detector for multi-rate asynchronous measurements, and post-detection
measurement reconfiguration.
"""

from .config import ConfigError, ScenarioConfig, default_config, load_config
from .runner import resolve_attack, run_scenario
from .reports import latency_report, monte_carlo
from .traces import RunMetrics, Trace, emit_traces, metrics_from_dir

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "default_config",
    "load_config",
    "resolve_attack",
    "run_scenario",
    "latency_report",
    "monte_carlo",
    "RunMetrics",
    "Trace",
    "emit_traces",
    "metrics_from_dir",
    "__version__",
]
