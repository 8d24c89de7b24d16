"""Long-memory forecasting toolkit.

Simulators for ARFIMA, cross-sectional aggregation and error-duration
processes; ARFIMA/ARMA/AR/HAR estimation and forecasting; the Model
Confidence Set; and a reproducible Monte Carlo harness.
"""

__version__ = "0.1.0"

from .dgp import DgpSpec, SimulatedPath, simulate  # noqa: E402
from .forecast import ForecastPath, forecast, loss, rmad, rmse  # noqa: E402
from .mcs import BootstrapConfig, LossPanel, McsResult, mcs  # noqa: E402
from .models import FittedModel, ModelSpec, bic_select, fit, memory_estimate  # noqa: E402
from .series import TimeSeries  # noqa: E402

__all__ = [
    "BootstrapConfig",
    "DgpSpec",
    "FittedModel",
    "ForecastPath",
    "LossPanel",
    "McsResult",
    "ModelSpec",
    "SimulatedPath",
    "TimeSeries",
    "bic_select",
    "fit",
    "forecast",
    "loss",
    "mcs",
    "memory_estimate",
    "rmad",
    "rmse",
    "simulate",
]
