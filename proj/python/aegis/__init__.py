"""Flow-physics anomaly detection: python surface over the C++ core."""

from ._aegis import (
    AegisError,
    Model,
    compute_metrics,
    focal_loss,
    frozen_scan,
    ltc_tau,
    poincare_distance,
    poincare_project,
    position_softmax,
    read_windows,
    shannon_entropy,
    zoh_discretize,
)

__all__ = [
    "AegisError",
    "Model",
    "compute_metrics",
    "focal_loss",
    "frozen_scan",
    "ltc_tau",
    "poincare_distance",
    "poincare_project",
    "position_softmax",
    "read_windows",
    "shannon_entropy",
    "zoh_discretize",
]
