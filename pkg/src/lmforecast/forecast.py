"""Point forecasts for fitted models and the forecast-loss summaries.

Fractional models are forecast with the finite-past best linear predictor
implied by their fitted autocovariances: the one-step AR coefficients of
order ``T, T+1, ...`` (Durbin-Levinson) are iterated over the demeaned
sample padded with earlier forecasts.  This is the AR(infinity) inversion
restricted to the whole available history.  The literal alternative, a
fixed AR(T) filter built from the fractional-difference weights, is kept
as ``method="truncated"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ._kernels import ar_recursion_forecast, arma_kalman, arma_state_forecast, levinson_forecast
from .models import FittedModel, ModelSpec
from .series import as_array
from .specfun import _fracdiff_weights, arfima_acf

__all__ = [
    "ForecastPath",
    "forecast",
    "loss",
    "loss_matrix",
    "mad",
    "rm_summary",
    "rmad",
    "rmse",
]

LOSS_KINDS = ("SQ", "AD")


@dataclass(frozen=True)
class ForecastPath:
    model: ModelSpec
    horizon: int
    values: np.ndarray
    origin_index: int

    def __len__(self) -> int:
        return self.horizon


def _fractional(model: FittedModel, x: np.ndarray, h: int, method: str) -> np.ndarray:
    xc = x - model.sample_mean
    n = xc.size
    if method == "levinson":
        acov = arfima_acf(model.ar_coeffs, model.d_hat, model.ma_coeffs, n + h - 1).values
        return model.sample_mean + levinson_forecast(acov, xc, h)
    if method != "truncated":
        raise ValueError(f"unknown fractional forecast method {method!r}")
    # pi(L) = theta(L)^-1 phi(L) (1-L)^d, truncated at T lags
    w = _fracdiff_weights(model.d_hat, n)
    pi = signal.lfilter(np.r_[1.0, -model.ar_coeffs], np.r_[1.0, model.ma_coeffs], w)
    return model.sample_mean + ar_recursion_forecast(0.0, -pi[1:], xc, h)


def forecast(model: FittedModel, series, h: int, method: str = "levinson") -> ForecastPath:
    """Forecasts for horizons ``1..h`` from the end of ``series``.

    ``series`` must be the sample the model was fitted on.

    Raises
    ------
    ValueError
        If ``h < 1``, the model failed to estimate, or the series length
        does not match the estimation sample.
    """
    if h < 1:
        raise ValueError("forecast horizon must be at least 1")
    if model.failed:
        raise ValueError(f"{model.label} did not estimate successfully")
    x = as_array(series)
    if x.size != model.nobs:
        raise ValueError(f"model was fitted on {model.nobs} observations, series has {x.size}")
    fam = model.spec.family
    if fam == "RW":
        out = np.full(h, x[-1])
    elif fam in ("AR", "HAR"):
        coefs = np.ascontiguousarray(model.implied_ar(), dtype=float)
        out = ar_recursion_forecast(model.intercept, coefs, x, h)
    elif fam == "ARMA":
        xc = x - model.sample_mean
        if model.ar_coeffs.size == 0 and model.ma_coeffs.size == 0:
            out = np.full(h, model.sample_mean)
        else:
            ar = np.ascontiguousarray(model.ar_coeffs, dtype=float)
            ma = np.ascontiguousarray(model.ma_coeffs, dtype=float)
            _, _, a = arma_kalman(xc, ar, ma)
            out = model.sample_mean + arma_state_forecast(a, ar, ma, h)
    else:
        out = _fractional(model, x, h, method)
    out = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"{model.label} produced non-finite forecasts")
    return ForecastPath(model=model.spec, horizon=h, values=out, origin_index=x.size)


def _check_finite(*vals) -> None:
    for v in vals:
        if not np.all(np.isfinite(v)):
            raise ValueError("loss inputs must be finite")


def loss(actual, predicted, kind: str = "AD"):
    """Squared (``SQ``) or absolute (``AD``) forecast error; works elementwise."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    _check_finite(actual, predicted)
    e = actual - predicted
    if kind == "SQ":
        out = e * e
    elif kind == "AD":
        out = np.abs(e)
    else:
        raise ValueError(f"unknown loss kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def rm_summary(actuals, path: ForecastPath | np.ndarray, kind: str = "AD") -> float:
    """Square root of the mean loss over the horizon.

    With ``kind="SQ"`` this is the RMSE.  With ``kind="AD"`` it is the
    square root of the mean absolute deviation (RMAD), which is *not* the
    usual MAD; see :func:`mad` for that.
    """
    pred = path.values if isinstance(path, ForecastPath) else np.asarray(path, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if actuals.shape != pred.shape:
        raise ValueError(f"length mismatch: {actuals.shape} actuals vs {pred.shape} forecasts")
    return math.sqrt(float(np.mean(loss(actuals, pred, kind))))


def rmse(actuals, path) -> float:
    return rm_summary(actuals, path, "SQ")


def rmad(actuals, path) -> float:
    return rm_summary(actuals, path, "AD")


def mad(actuals, path) -> float:
    """Plain mean absolute deviation (no square root)."""
    return rm_summary(actuals, path, "AD") ** 2


def loss_matrix(actuals, paths: list[ForecastPath], kind: str = "AD") -> np.ndarray:
    """``n x m`` per-step losses, one column per forecast path."""
    actuals = np.asarray(actuals, dtype=float)
    return np.column_stack([loss(actuals, p.values[: actuals.size], kind) for p in paths])
