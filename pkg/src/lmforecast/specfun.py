"""Gamma-function helpers, fractional-difference weights and theoretical ACFs.

Everything here is a pure function of its arguments.  The autocovariances
are those of a process driven by unit-variance innovations unless a
``sigma2`` is passed explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal, special

__all__ = [
    "AcfSequence",
    "FracDiffCoeffs",
    "arfima_acf",
    "arma_acf",
    "arma_psi_weights",
    "check_memory",
    "fi_acf",
    "fi_autocovariance",
    "fracdiff_coeffs",
    "log_gamma",
    "stationary_ar",
]

_MEMORY_BOUND = 0.5


@dataclass(frozen=True)
class FracDiffCoeffs:
    """Coefficients ``pi_0 .. pi_n`` of the filter ``(1 - L)**d``."""

    d: float
    coeffs: np.ndarray

    def __len__(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class AcfSequence:
    """Autocovariances ``gamma_0 .. gamma_K`` (autocorrelations if ``normalized``)."""

    values: np.ndarray
    normalized: bool

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k):
        return self.values[k]

    def as_correlation(self) -> np.ndarray:
        return self.values / self.values[0]


def check_memory(d: float, bound: float = _MEMORY_BOUND) -> float:
    d = float(d)
    if not math.isfinite(d) or not -bound < d < bound:
        raise ValueError(f"memory parameter d={d!r} outside ({-bound}, {bound})")
    return d


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for a positive real argument.

    Raises
    ------
    ValueError
        If ``x`` is not a finite positive number.
    """
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise ValueError(f"log_gamma is defined for finite x > 0, got {x!r}")
    return float(special.gammaln(x))


def fracdiff_coeffs(d: float, n: int) -> FracDiffCoeffs:
    """Expansion coefficients of ``(1 - L)**d`` up to lag ``n``.

    Uses ``pi_j = pi_{j-1} * (j - 1 - d) / j``, which stays finite for any
    ``n`` where the gamma-ratio form overflows.

    Parameters
    ----------
    d : float
        Memory parameter in (-0.5, 0.5).
    n : int
        Highest lag.  ``n + 1`` coefficients are returned.
    """
    d = check_memory(d)
    if n < 0:
        raise ValueError("truncation length n must be non-negative")
    return FracDiffCoeffs(d=d, coeffs=_fracdiff_weights(d, n))


def _fracdiff_weights(d: float, n: int) -> np.ndarray:
    # unchecked; also used with -d for the inverse filter (1 - L)**(-d)
    j = np.arange(1, n + 1, dtype=float)
    out = np.empty(n + 1)
    out[0] = 1.0
    out[1:] = np.cumprod((j - 1.0 - d) / j)
    return out


def fi_acf(d: float, K: int) -> AcfSequence:
    """Autocorrelations of a fractionally integrated FI(d) process, lags 0..K.

    ``rho_k = Gamma(1-d) Gamma(k+d) / (Gamma(d) Gamma(k+1-d))``, evaluated as
    exponentiated differences of log-gamma values.
    """
    d = check_memory(d)
    if K < 0:
        raise ValueError("K must be non-negative")
    rho = np.zeros(K + 1)
    rho[0] = 1.0
    if d == 0.0 or K == 0:
        return AcfSequence(rho, normalized=True)
    k = np.arange(1, K + 1, dtype=float)
    # Gamma(d) < 0 for d < 0; every other gamma argument is positive
    sign = 1.0 if d > 0 else -1.0
    logs = (
        special.gammaln(1.0 - d)
        - special.gammaln(d)  # log|Gamma(d)|
        + special.gammaln(k + d)
        - special.gammaln(k + 1.0 - d)
    )
    rho[1:] = sign * np.exp(logs)
    return AcfSequence(rho, normalized=True)


def fi_autocovariance(d: float, K: int, sigma2: float = 1.0) -> np.ndarray:
    """Autocovariances of FI(d), ``gamma_0 = sigma2 Gamma(1-2d) / Gamma(1-d)**2``."""
    rho = fi_acf(d, K).values
    g0 = sigma2 * math.exp(special.gammaln(1.0 - 2.0 * d) - 2.0 * special.gammaln(1.0 - d))
    return g0 * rho


def stationary_ar(ar, tol: float = 0.0) -> bool:
    """True when ``1 - ar_1 z - ... - ar_p z^p`` has all roots outside the unit circle."""
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    if ar.size == 0 or not np.any(ar):
        return True
    # companion eigenvalues are the inverse roots
    comp = np.zeros((ar.size, ar.size))
    comp[0] = ar
    comp[1:, :-1] = np.eye(ar.size - 1)
    return bool(np.max(np.abs(np.linalg.eigvals(comp))) < 1.0 / (1.0 + tol))


def arma_psi_weights(ar, ma, n: int) -> np.ndarray:
    """MA(infinity) weights ``psi_0 .. psi_{n-1}`` of ``phi(L) x = theta(L) e``."""
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    ma = np.atleast_1d(np.asarray(ma, dtype=float))
    impulse = np.zeros(n)
    impulse[0] = 1.0
    return signal.lfilter(np.r_[1.0, ma], np.r_[1.0, -ar], impulse)


def _psi_length(ar, ma, eps: float = 1e-17) -> int:
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    if ar.size == 0 or not np.any(ar):
        return len(np.atleast_1d(ma)) + 1
    comp = np.zeros((ar.size, ar.size))
    comp[0] = ar
    comp[1:, :-1] = np.eye(ar.size - 1)
    rmax = float(np.max(np.abs(np.linalg.eigvals(comp))))
    if rmax == 0.0:
        return len(np.atleast_1d(ma)) + ar.size + 1
    # geometric decay r**n; the polynomial prefactor is covered by the margin
    n = math.log(eps) / math.log(rmax)
    return int(min(200_000, math.ceil(1.5 * n) + 10 * (ar.size + len(np.atleast_1d(ma))) + 50))


def arma_acf(ar, ma, K: int, sigma2: float = 1.0) -> np.ndarray:
    """Autocovariances of a stationary ARMA(p, q), lags 0..K."""
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    ma = np.atleast_1d(np.asarray(ma, dtype=float))
    if not stationary_ar(ar):
        raise ValueError("AR polynomial has a root on or inside the unit circle")
    n = _psi_length(ar, ma) + K + 1
    psi = arma_psi_weights(ar, ma, n)
    full = signal.fftconvolve(psi, psi[::-1])[n - 1 : n + K]
    return sigma2 * full


def arfima_acf(ar, d: float, ma, K: int, sigma2: float = 1.0) -> AcfSequence:
    """Autocovariances of ARFIMA(p, d, q), lags 0..K.

    The process is ``x = psi_arma(L) u`` with ``u`` an FI(d) process, so
    ``gamma_x(k) = sum_m c_m gamma_u(k + m)`` where ``c_m`` is the two-sided
    autocovariance of the short-memory filter.  ``c_m`` decays geometrically,
    so the sum is cut where ``|psi_j| < 1e-17`` (relative error well below
    1e-12 of ``gamma_0`` for the stationary region); ``gamma_u`` is exact.

    Raises
    ------
    ValueError
        If the AR part is not stationary or ``d`` is outside (-0.5, 0.5).
    """
    d = check_memory(d)
    ar = np.atleast_1d(np.asarray(ar, dtype=float))
    ma = np.atleast_1d(np.asarray(ma, dtype=float))
    if not stationary_ar(ar):
        raise ValueError("AR polynomial has a root on or inside the unit circle")
    M = _psi_length(ar, ma)
    psi = arma_psi_weights(ar, ma, M)
    c = signal.fftconvolve(psi, psi[::-1])  # lags -(M-1) .. M-1
    gu = fi_autocovariance(d, K + M, sigma2)
    # gamma_u on lags -(M-1) .. K+M-1
    two_sided = np.r_[gu[M - 1 : 0 : -1], gu[: K + M]]
    gx = np.correlate(two_sided, c, mode="valid")[: K + 1] if M > 1 else two_sided[: K + 1] * c[0]
    return AcfSequence(np.asarray(gx, dtype=float), normalized=False)
