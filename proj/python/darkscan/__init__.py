"""Darknet scan-event analytics: event reconstruction, aggressive-scanner
detection, impact estimation and characterization."""

from ._core import (
    Config,
    DarkscanError,
    Event,
    Thresholds,
    build_events,
    compute_timeout,
    darknet1_thresholds,
    darknet2_thresholds,
    detect,
    ecdf_threshold,
    fingerprint,
    flow_impact,
    jaccard,
    percentile_rank,
    run_cli,
    synth,
    zipf_curve,
)

__all__ = [
    "Config",
    "DarkscanError",
    "Event",
    "Thresholds",
    "build_events",
    "compute_timeout",
    "darknet1_thresholds",
    "darknet2_thresholds",
    "detect",
    "ecdf_threshold",
    "fingerprint",
    "flow_impact",
    "jaccard",
    "percentile_rank",
    "run_cli",
    "synth",
    "zipf_curve",
]

__version__ = "0.1.0"
