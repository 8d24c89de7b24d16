"""Estimation of the competing forecasting models and semiparametric memory estimators.

Fractional and ARMA families are fitted to the demeaned series (the sample
mean is stored and added back when forecasting); AR and HAR regressions
carry their own intercept.  Stationarity and invertibility of the ARMA
parts are enforced through the partial-autocorrelation parameterisation,
so every returned polynomial has its roots outside the unit circle.

BIC counts the mean/intercept and ``d`` as free parameters and profiles
the innovation variance out, so values are comparable within a family.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, signal

from ._kernels import arma_kalman, levinson_innovations
from .series import as_array
from .specfun import fi_autocovariance

__all__ = [
    "FAMILIES",
    "FittedModel",
    "HAR3",
    "HAR4",
    "ModelSpec",
    "PAPER_MODEL_SET",
    "EstimationError",
    "ar_from_pacf",
    "bic_select",
    "fit",
    "fit_ar",
    "fit_arfima",
    "fit_arma",
    "fit_har",
    "fit_random_walk",
    "gph_estimate",
    "local_whittle_estimate",
    "local_whittle_objective",
    "pacf_from_ar",
    "periodogram",
]

FAMILIES = ("FI", "ARFIMA", "ARMA", "AR", "HAR", "RW")

D_BOUND = 0.49
D_STARTS = (0.1, 0.25, 0.4)
# tanh(7.5) = 1 - 6e-7: keeps roots strictly outside the unit circle
_U_BOUND = 7.5


class EstimationError(RuntimeError):
    """Raised when no specification in a search could be estimated."""


@dataclass(frozen=True)
class ModelSpec:
    """A model family with its orders.

    ``har_lags`` are the HAR averaging windows, e.g. ``(1, 5, 22)``.
    """

    family: str
    p: int = 0
    q: int = 0
    har_lags: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.p < 0 or self.q < 0:
            raise ValueError("orders must be non-negative")
        if self.family == "FI" and (self.p or self.q):
            raise ValueError("FI has no ARMA part; use family ARFIMA")
        if self.family == "HAR":
            lags = tuple(int(w) for w in self.har_lags)
            if not lags or lags[0] != 1 or any(b <= a for a, b in zip(lags, lags[1:])):
                raise ValueError("HAR windows must start at 1 and increase strictly")
            object.__setattr__(self, "har_lags", lags)

    @property
    def fractional(self) -> bool:
        return self.family in ("FI", "ARFIMA")

    @property
    def label(self) -> str:
        f = self.family
        if f == "FI":
            return "FI(d)"
        if f == "ARFIMA":
            return f"ARFIMA({self.p},d,{self.q})"
        if f == "ARMA":
            return f"ARMA({self.p},{self.q})"
        if f == "AR":
            return f"AR({self.p})"
        if f == "HAR":
            if self.har_lags == HAR3.har_lags:
                return "HAR(3)"
            if self.har_lags == HAR4.har_lags:
                return "HAR(4)"
            return "HAR[" + ",".join(map(str, self.har_lags)) + "]"
        return "I(1)"

    def __str__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, text: str) -> ModelSpec:
        """Parse labels such as ``FI(d)``, ``ARFIMA(1,d,0)``, ``ARMA(2,1)``,
        ``AR(22)``, ``HAR(3)``, ``HAR[1,5,22]`` or ``I(1)``/``RW``."""
        s = re.sub(r"\s+", "", text).upper()
        if s in ("FI", "FI(D)", "ARFIMA(0,D,0)"):
            return cls("FI")
        if s in ("I(1)", "RW", "RANDOMWALK", "NOCHANGE"):
            return cls("RW")
        if s in ("HAR", "HAR(3)", "HAR3"):
            return HAR3
        if s in ("HAR(4)", "HAR4"):
            return HAR4
        m = re.fullmatch(r"ARFIMA\((\d+),D,(\d+)\)", s)
        if m:
            return cls("ARFIMA", int(m[1]), int(m[2]))
        m = re.fullmatch(r"ARMA\((\d+),(\d+)\)", s)
        if m:
            return cls("ARMA", int(m[1]), int(m[2]))
        m = re.fullmatch(r"AR\((\d+)\)", s)
        if m:
            return cls("AR", int(m[1]))
        m = re.fullmatch(r"HAR\[([\d,]+)\]", s)
        if m:
            return cls("HAR", har_lags=tuple(int(v) for v in m[1].split(",")))
        raise ValueError(f"cannot parse model specification {text!r}")


HAR3 = ModelSpec("HAR", har_lags=(1, 5, 22))
HAR4 = ModelSpec("HAR", har_lags=(1, 5, 22, 50))

PAPER_MODEL_SET: tuple[ModelSpec, ...] = (
    ModelSpec("FI"),
    ModelSpec("ARFIMA", 1, 0),
    ModelSpec("ARFIMA", 0, 1),
    ModelSpec("ARFIMA", 1, 1),
    ModelSpec("ARFIMA", 2, 1),
    ModelSpec("ARMA", 1, 1),
    ModelSpec("ARMA", 2, 1),
    ModelSpec("ARMA", 1, 2),
    ModelSpec("ARMA", 3, 3),
    ModelSpec("ARMA", 4, 4),
    HAR3,
    ModelSpec("AR", 22),
    ModelSpec("AR", 30),
    ModelSpec("AR", 50),
    ModelSpec("RW"),
)


@dataclass
class FittedModel:
    """Estimated parameters of one model.

    ``loglik`` and ``bic`` are None for the no-change model.  A failed
    estimation keeps ``converged=False`` and the best objective reached in
    ``message``; callers decide whether to use it.
    """

    spec: ModelSpec
    nobs: int
    sample_mean: float = 0.0
    d_hat: float | None = None
    ar_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ma_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    har_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intercept: float = 0.0
    sigma2_hat: float = float("nan")
    loglik: float | None = None
    bic: float | None = None
    n_params: int = 0
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    method: str = ""
    converged: bool = True
    message: str = ""

    @property
    def failed(self) -> bool:
        return not self.converged

    @property
    def label(self) -> str:
        return self.spec.label

    def implied_ar(self) -> np.ndarray:
        """Lag coefficients of the AR/HAR regression, lag 1 first."""
        if self.spec.family == "AR":
            return self.ar_coeffs
        if self.spec.family == "HAR":
            lags = self.spec.har_lags
            out = np.zeros(lags[-1])
            for a, w in zip(self.har_coeffs[1:], lags):
                out[:w] += a / w
            return out
        raise ValueError(f"{self.label} has no finite AR form")

    def params(self) -> dict[str, float]:
        out: dict[str, float] = {}
        if self.d_hat is not None:
            out["d"] = self.d_hat
        for i, v in enumerate(self.ar_coeffs, 1):
            out[f"ar.{i}"] = float(v)
        for i, v in enumerate(self.ma_coeffs, 1):
            out[f"ma.{i}"] = float(v)
        if self.spec.family == "HAR":
            for i, v in enumerate(self.har_coeffs):
                out[f"a{i}"] = float(v)
        elif self.spec.family == "AR":
            out["intercept"] = self.intercept
        elif self.spec.family != "RW":
            out["mean"] = self.sample_mean
        out["sigma2"] = self.sigma2_hat
        return out


def _bic(loglik: float, k: int, n: int) -> float:
    return -2.0 * loglik + k * math.log(n)


def _gauss_loglik(sigma2: float, n: int) -> float:
    return -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)


# ---------------------------------------------------------------------------
# partial-autocorrelation parameterisation


def ar_from_pacf(r) -> np.ndarray:
    """Map partial autocorrelations in (-1, 1) to stationary AR coefficients."""
    r = np.asarray(r, dtype=float)
    phi = np.zeros(0)
    for k, rk in enumerate(r, 1):
        new = np.empty(k)
        new[: k - 1] = phi - rk * phi[::-1]
        new[k - 1] = rk
        phi = new
    return phi


def pacf_from_ar(phi) -> np.ndarray:
    """Inverse of ``ar_from_pacf``; requires a stationary polynomial."""
    phi = np.asarray(phi, dtype=float).copy()
    p = phi.size
    r = np.empty(p)
    for k in range(p, 0, -1):
        rk = phi[k - 1]
        r[k - 1] = rk
        if k > 1:
            if abs(rk) >= 1.0:
                raise ValueError("polynomial is not stationary")
            phi = (phi[: k - 1] + rk * phi[: k - 1][::-1]) / (1.0 - rk * rk)
    return r


def _to_poly(u, sign: float) -> np.ndarray:
    # unconstrained -> coefficients; MA uses theta = -a so that 1 + theta z is invertible
    return sign * ar_from_pacf(np.tanh(np.clip(u, -_U_BOUND, _U_BOUND)))


def _from_poly(coeffs, sign: float, shrink: float = 0.98) -> np.ndarray:
    c = sign * np.asarray(coeffs, dtype=float)
    for _ in range(50):
        try:
            r = pacf_from_ar(c)
            if np.all(np.abs(r) < 1.0):
                return np.arctanh(np.clip(r, -0.999, 0.999))
        except ValueError:
            pass
        c = c * shrink ** np.arange(1, c.size + 1)
    return np.zeros(c.size)


def _failed(spec: ModelSpec, n: int, mean: float, message: str, **kw) -> FittedModel:
    return FittedModel(spec=spec, nobs=n, sample_mean=mean, converged=False, message=message, **kw)


def _check_length(x: np.ndarray, minimum: int, what: str) -> None:
    if x.size < minimum:
        raise ValueError(f"{what} needs at least {minimum} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("series contains non-finite values")


# ---------------------------------------------------------------------------
# ARFIMA / FI


class _CssObjective:
    """Conditional sum of squares of an ARFIMA(p, d, q) on a demeaned series.

    Residuals are ``theta(L)^-1 phi(L) (1-L)^d x`` with all pre-sample
    values set to zero.
    """

    def __init__(self, x: np.ndarray, p: int, q: int):
        self.x = x
        self.n = x.size
        self.p = p
        self.q = q
        self.nfft = 1 << int(math.ceil(math.log2(2 * self.n)))
        self.fx = np.fft.rfft(x, self.nfft)
        self._j = np.arange(1, self.n, dtype=float)

    def unpack(self, theta):
        d = float(theta[0])
        ar = _to_poly(theta[1 : 1 + self.p], 1.0)
        ma = _to_poly(theta[1 + self.p :], -1.0)
        return d, ar, ma

    def residuals(self, theta) -> np.ndarray:
        d, ar, ma = self.unpack(theta)
        w = np.empty(self.n)
        w[0] = 1.0
        w[1:] = np.cumprod((self._j - 1.0 - d) / self._j)
        y = np.fft.irfft(self.fx * np.fft.rfft(w, self.nfft), self.nfft)[: self.n]
        if self.p or self.q:
            y = signal.lfilter(np.r_[1.0, -ar], np.r_[1.0, ma], y)
        return y

    def __call__(self, theta) -> float:
        e = self.residuals(theta)
        s = float(np.dot(e, e)) / self.n
        if not math.isfinite(s) or s <= 0.0:
            return 1e10
        return 0.5 * math.log(s)


def fi_exact_loglik(x: np.ndarray, d: float) -> tuple[float, float, np.ndarray]:
    """Concentrated exact Gaussian log-likelihood of FI(d) for a demeaned ``x``.

    Returns ``(loglik, sigma2_hat, one_step_errors)``.
    """
    n = x.size
    acov = fi_autocovariance(d, n - 1)
    e, v = levinson_innovations(acov, x)
    sigma2 = float(np.mean(e * e / v))
    ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0) - 0.5 * float(np.sum(np.log(v)))
    return ll, sigma2, e


def _fit_fi_exact(x: np.ndarray, spec: ModelSpec, mean: float) -> FittedModel:
    n = x.size
    neg = lambda d: -fi_exact_loglik(x, d)[0] / n  # noqa: E731
    # coarse scan then bounded Brent inside the best bracket
    grid = np.linspace(-D_BOUND, D_BOUND, 15)
    vals = np.array([neg(g) for g in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    d = float(res.x)
    ll, sigma2, e = fi_exact_loglik(x, d)
    k = 2
    return FittedModel(
        spec=spec, nobs=n, sample_mean=mean, d_hat=d, sigma2_hat=sigma2, loglik=ll,
        bic=_bic(ll, k, n), n_params=k, residuals=e, method="exact",
        converged=bool(res.success), message=str(getattr(res, "message", "")),
    )


def _minimize(fun, x0, bounds):
    return optimize.minimize(
        fun, x0, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-9, "maxls": 50},
    )


def _fit_arfima_css(x: np.ndarray, spec: ModelSpec, mean: float) -> FittedModel:
    n = x.size
    p, q = spec.p, spec.q
    obj = _CssObjective(x, p, q)
    bounds = [(-D_BOUND, D_BOUND)] + [(-_U_BOUND, _U_BOUND)] * (p + q)
    best = None
    for d0 in D_STARTS:
        res = _minimize(obj, np.r_[d0, np.zeros(p + q)], bounds)
        if best is None or res.fun < best.fun:
            best = res
    theta = best.x
    d, ar, ma = obj.unpack(theta)
    e = obj.residuals(theta)
    sigma2 = float(np.mean(e * e))
    ll = _gauss_loglik(sigma2, n)
    k = p + q + 2
    ok = bool(best.success) or _small_gradient(obj, theta, bounds)
    if not math.isfinite(sigma2):
        return _failed(spec, n, mean, f"non-finite objective {best.fun}")
    return FittedModel(
        spec=spec, nobs=n, sample_mean=mean, d_hat=d, ar_coeffs=ar, ma_coeffs=ma,
        sigma2_hat=sigma2, loglik=ll, bic=_bic(ll, k, n), n_params=k, residuals=e,
        method="css", converged=ok, message=str(best.message),
    )


def _small_gradient(fun, theta, bounds, tol: float = 1e-4) -> bool:
    g = optimize.approx_fprime(theta, fun, 1e-7)
    free = np.array([lo + 1e-6 < t < hi - 1e-6 for t, (lo, hi) in zip(theta, bounds)])
    return bool(np.all(np.abs(g[free]) < tol))


def fit_arfima(series, spec: ModelSpec | None = None, method: str | None = None) -> FittedModel:
    """Fit FI(d) or ARFIMA(p, d, q) to the demeaned series.

    Parameters
    ----------
    series : TimeSeries or array_like
        At least 100 observations.
    spec : ModelSpec
        Family ``FI`` or ``ARFIMA``; defaults to FI.
    method : {"exact", "css"}, optional
        ``exact`` (Levinson recursion on the FI autocovariances) is only
        available for FI and is its default; ARFIMA defaults to ``css``,
        minimised from starts ``d in {0.1, 0.25, 0.4}``.
    """
    spec = spec or ModelSpec("FI")
    if not spec.fractional:
        raise ValueError(f"{spec.label} is not a fractional model")
    x = as_array(series)
    _check_length(x, 100, "fit_arfima")
    mean = float(x.mean())
    xc = x - mean
    method = method or ("exact" if spec.family == "FI" else "css")
    if method == "exact":
        if spec.family != "FI":
            raise ValueError("exact likelihood is implemented for FI(d) only")
        return _fit_fi_exact(xc, spec, mean)
    if method != "css":
        raise ValueError(f"unknown method {method!r}")
    return _fit_arfima_css(xc, spec, mean)


# ---------------------------------------------------------------------------
# ARMA


def arma_exact_loglik(x: np.ndarray, ar, ma) -> tuple[float, float, np.ndarray]:
    """Concentrated exact Gaussian log-likelihood of a zero-mean ARMA."""
    n = x.size
    v, F, _ = arma_kalman(x, np.asarray(ar, dtype=float), np.asarray(ma, dtype=float))
    if not np.all(F > 0.0):
        # near-unit-root stationary covariance can lose definiteness numerically
        return -np.inf, float("nan"), v
    sigma2 = float(np.mean(v * v / F))
    ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0) - 0.5 * float(np.sum(np.log(F)))
    return ll, sigma2, v


def _hannan_rissanen(x: np.ndarray, p: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    n = x.size
    m = min(max(20, p + q + 5), n // 4)
    X = np.column_stack([x[m - j : n - j] for j in range(1, m + 1)])
    a, *_ = np.linalg.lstsq(X, x[m:], rcond=None)
    e = np.zeros(n)
    e[m:] = x[m:] - X @ a
    start = m + max(p, q)
    cols = [x[start - j : n - j] for j in range(1, p + 1)] + [e[start - j : n - j] for j in range(1, q + 1)]
    b, *_ = np.linalg.lstsq(np.column_stack(cols), x[start:], rcond=None)
    return b[:p], b[p:]


def fit_arma(series, spec: ModelSpec) -> FittedModel:
    """Exact Gaussian maximum likelihood for ARMA(p, q) on the demeaned series.

    The likelihood comes from a Kalman filter started at the stationary
    state covariance.  Optimisation runs over unconstrained transforms of
    the partial autocorrelations of both polynomials, from a
    Hannan-Rissanen start and from zero.
    """
    if spec.family != "ARMA":
        raise ValueError(f"{spec.label} is not an ARMA model")
    x = as_array(series)
    _check_length(x, max(20, 2 * (spec.p + spec.q) + 10), "fit_arma")
    n = x.size
    mean = float(x.mean())
    xc = x - mean
    p, q = spec.p, spec.q
    if p == 0 and q == 0:
        s2 = float(np.mean(xc * xc))
        ll = _gauss_loglik(s2, n)
        return FittedModel(
            spec=spec, nobs=n, sample_mean=mean, sigma2_hat=s2, loglik=ll,
            bic=_bic(ll, 1, n), n_params=1, residuals=xc.copy(), method="exact",
        )

    def unpack(u):
        return _to_poly(u[:p], 1.0), _to_poly(u[p:], -1.0)

    def neg(u):
        ar, ma = unpack(u)
        try:
            ll = arma_exact_loglik(xc, ar, ma)[0]
        except Exception:  # singular stationary covariance at the boundary
            return 1e10
        return -ll / n if math.isfinite(ll) else 1e10

    starts = [np.zeros(p + q)]
    try:
        a0, m0 = _hannan_rissanen(xc, p, q)
        starts.insert(0, np.r_[_from_poly(a0, 1.0), _from_poly(m0, -1.0)])
    except np.linalg.LinAlgError:
        pass
    bounds = [(-_U_BOUND, _U_BOUND)] * (p + q)
    best = None
    for u0 in starts:
        res = _minimize(neg, u0, bounds)
        if best is None or res.fun < best.fun:
            best = res
    ar, ma = unpack(best.x)
    ll, s2, v = arma_exact_loglik(xc, ar, ma)
    k = p + q + 1
    ok = (bool(best.success) or _small_gradient(neg, best.x, bounds)) and math.isfinite(ll)
    return FittedModel(
        spec=spec, nobs=n, sample_mean=mean, ar_coeffs=ar, ma_coeffs=ma, sigma2_hat=s2,
        loglik=ll, bic=_bic(ll, k, n), n_params=k, residuals=v, method="exact",
        converged=ok, message=str(best.message),
    )


# ---------------------------------------------------------------------------
# regressions


def _ols(X: np.ndarray, y: np.ndarray):
    if np.linalg.matrix_rank(X) < X.shape[1]:
        return None
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    return beta


def fit_ar(series, order: int) -> FittedModel:
    """Least squares AR(order) with intercept (conditional Gaussian MLE)."""
    x = as_array(series)
    if order < 0:
        raise ValueError("order must be non-negative")
    _check_length(x, order + 11, "fit_ar")
    spec = ModelSpec("AR", order)
    n = x.size
    y = x[order:]
    X = np.column_stack([np.ones(n - order)] + [x[order - j : n - j] for j in range(1, order + 1)])
    beta = _ols(X, y)
    if beta is None:
        return _failed(spec, n, float(x.mean()), "singular design matrix")
    resid = y - X @ beta
    s2 = float(np.mean(resid * resid))
    if s2 <= 0.0:
        return _failed(spec, n, float(x.mean()), "zero residual variance")
    ll = _gauss_loglik(s2, y.size)
    k = order + 1
    return FittedModel(
        spec=spec, nobs=n, sample_mean=float(x.mean()), ar_coeffs=beta[1:].copy(),
        intercept=float(beta[0]), sigma2_hat=s2, loglik=ll, bic=_bic(ll, k, y.size),
        n_params=k, residuals=resid, method="ols",
    )


def har_design(x: np.ndarray, windows: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Regressand and ``[1, mean(x_{t-1..t-w}) for w in windows]`` design."""
    n = x.size
    w_max = windows[-1]
    c = np.r_[0.0, np.cumsum(x)]
    t = np.arange(w_max, n)
    cols = [np.ones(t.size)] + [(c[t] - c[t - w]) / w for w in windows]
    return x[w_max:], np.column_stack(cols)


def fit_har(series, windows: Sequence[int] = (1, 5, 22)) -> FittedModel:
    """HAR regression on backward moving averages of lagged values."""
    spec = ModelSpec("HAR", har_lags=tuple(windows))
    x = as_array(series)
    _check_length(x, spec.har_lags[-1] + 11, "fit_har")
    n = x.size
    y, X = har_design(x, spec.har_lags)
    beta = _ols(X, y)
    if beta is None:
        return _failed(spec, n, float(x.mean()), "singular design matrix")
    resid = y - X @ beta
    s2 = float(np.mean(resid * resid))
    if s2 <= 0.0:
        return _failed(spec, n, float(x.mean()), "zero residual variance")
    ll = _gauss_loglik(s2, y.size)
    k = len(spec.har_lags) + 1
    return FittedModel(
        spec=spec, nobs=n, sample_mean=float(x.mean()), har_coeffs=beta.copy(),
        intercept=float(beta[0]), sigma2_hat=s2, loglik=ll, bic=_bic(ll, k, y.size),
        n_params=k, residuals=resid, method="ols",
    )


def fit_random_walk(series) -> FittedModel:
    """No-change model: nothing to estimate, likelihood not defined."""
    x = as_array(series)
    if x.size < 1:
        raise ValueError("empty series")
    dx = np.diff(x)
    return FittedModel(
        spec=ModelSpec("RW"), nobs=x.size, sample_mean=float(x.mean()),
        sigma2_hat=float(np.mean(dx * dx)) if dx.size else float("nan"),
        residuals=dx, method="none", message="loglik/bic not applicable",
    )


def fit(series, spec: ModelSpec | str) -> FittedModel:
    """Fit any supported specification."""
    if isinstance(spec, str):
        spec = ModelSpec.parse(spec)
    f = spec.family
    if f in ("FI", "ARFIMA"):
        return fit_arfima(series, spec)
    if f == "ARMA":
        return fit_arma(series, spec)
    if f == "AR":
        return fit_ar(series, spec.p)
    if f == "HAR":
        return fit_har(series, spec.har_lags)
    return fit_random_walk(series)


def bic_select(series, family: str, max_p: int, max_q: int) -> ModelSpec:
    """Order with minimum BIC among all ``p <= max_p``, ``q <= max_q``.

    ARFIMA candidates are all fitted by CSS, including ``(0, 0)``, so the
    criterion compares like with like.  Ties go to fewer parameters, then
    lower ``p``.  Failed fits are skipped.
    """
    family = family.upper()
    if family not in ("ARFIMA", "ARMA"):
        raise ValueError("family must be ARFIMA or ARMA")
    x = as_array(series)
    scored = []
    for p in range(max_p + 1):
        for q in range(max_q + 1):
            if family == "ARFIMA":
                spec = ModelSpec("ARFIMA", p, q)
                fm = fit_arfima(x, spec, method="css")
            else:
                spec = ModelSpec("ARMA", p, q)
                fm = fit_arma(x, spec)
            if fm.converged and fm.bic is not None and math.isfinite(fm.bic):
                scored.append((fm.bic, p + q, p, spec))
    if not scored:
        raise EstimationError(f"every {family} specification failed to estimate")
    scored.sort(key=lambda t: (round(t[0], 9), t[1], t[2]))
    spec = scored[0][3]
    return ModelSpec("FI") if family == "ARFIMA" and spec.p == spec.q == 0 else spec


# ---------------------------------------------------------------------------
# semiparametric memory estimators


def periodogram(x: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Fourier frequencies ``2 pi j / T`` and ``I(lambda_j)``, j = 1..m, of the demeaned series."""
    x = np.asarray(x, dtype=float)
    n = x.size
    f = np.fft.rfft(x - x.mean())
    j = np.arange(1, m + 1)
    lam = 2.0 * np.pi * j / n
    I = np.abs(f[1 : m + 1]) ** 2 / (2.0 * np.pi * n)
    return lam, I


def _bandwidth(n: int, bandwidth: int | None, power: float) -> int:
    m = int(math.floor(n**power)) if bandwidth is None else int(bandwidth)
    if m < 5:
        raise ValueError(f"bandwidth m={m} is below 5")
    if m >= n / 2:
        raise ValueError(f"bandwidth m={m} must be below T/2={n / 2}")
    return m


def gph_estimate(series, bandwidth: int | None = None) -> float:
    """Log-periodogram regression estimate of ``d``; default ``m = floor(T**0.5)``."""
    x = as_array(series)
    m = _bandwidth(x.size, bandwidth, 0.5)
    lam, I = periodogram(x, m)
    reg = -2.0 * np.log(2.0 * np.sin(lam / 2.0))
    X = np.column_stack([np.ones(m), reg])
    beta, *_ = np.linalg.lstsq(X, np.log(I), rcond=None)
    return float(beta[1])


def local_whittle_objective(d: float, lam: np.ndarray, I: np.ndarray) -> float:
    return math.log(float(np.mean(lam ** (2.0 * d) * I))) - 2.0 * d * float(np.mean(np.log(lam)))


def golden_section(f, a: float, b: float, tol: float = 1e-10) -> float:
    """Minimiser of a unimodal ``f`` on ``[a, b]``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    dd = a + invphi * (b - a)
    fc, fd = f(c), f(dd)
    while b - a > tol:
        if fc < fd:
            b, dd, fd = dd, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, dd, fd
            dd = a + invphi * (b - a)
            fd = f(dd)
    return 0.5 * (a + b)


def local_whittle_estimate(series, bandwidth: int | None = None) -> float:
    """Local Whittle estimate of ``d``; default ``m = floor(T**0.65)``."""
    x = as_array(series)
    m = _bandwidth(x.size, bandwidth, 0.65)
    lam, I = periodogram(x, m)
    return golden_section(lambda d: local_whittle_objective(d, lam, I), -D_BOUND, D_BOUND)


def memory_estimate(series, method: str, bandwidth: int | None = None) -> float:
    """Dispatch ``gph`` / ``lw`` / ``mle`` (exact FI likelihood)."""
    method = method.lower()
    if method == "gph":
        return gph_estimate(series, bandwidth)
    if method in ("lw", "local_whittle"):
        return local_whittle_estimate(series, bandwidth)
    if method == "mle":
        return float(fit_arfima(series, ModelSpec("FI")).d_hat)
    raise ValueError(f"unknown memory estimator {method!r}")

