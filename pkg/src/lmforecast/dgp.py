"""Simulators for three long-memory generating mechanisms.

* ``arfima`` -- Gaussian ARFIMA(1, d, 0): an exact FI(d) core drawn by
  circulant embedding, passed through an AR(1) filter.
* ``csa`` -- cross-sectional aggregation of ``N`` AR(1) micro units whose
  squared coefficients are Beta(p, q) with ``q = 2(1 - d)``.
* ``edm`` -- error duration model: shocks live for a random number of
  periods with survival probabilities mimicking FI(d).

Every simulator is a deterministic function of ``(spec, length, seed)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy import signal

from ._kernels import ar1_aggregate
from .series import TimeSeries
from .specfun import _fracdiff_weights, fi_acf, fi_autocovariance

__all__ = [
    "DGP_KINDS",
    "DgpSpec",
    "SimulatedPath",
    "edm_survival",
    "edm_tail_mass",
    "simulate",
    "simulate_arfima",
    "simulate_csa",
    "simulate_edm",
    "unit_seed_sequence",
]

DGP_KINDS = ("arfima", "csa", "edm")

# kind-specific burn-in defaults; csa starts at the stationary law instead
_DEFAULT_BURN_IN = {"arfima": 100, "csa": 0, "edm": 10_000}
_MA_FALLBACK_BURN_IN = 5_000
_CSA_CHUNK = 512


@dataclass(frozen=True)
class DgpSpec:
    """Parameters of one generator.

    ``phi`` is used by ``arfima`` only; ``n_units``, ``beta_p`` and
    ``alpha_squared`` by ``csa`` only; ``tail_correction`` by ``edm`` only.
    ``burn_in=None`` picks the per-kind default.
    """

    kind: str
    d: float
    phi: float = 0.2
    n_units: int = 10_000
    beta_p: float = 1.4
    burn_in: int | None = None
    innovation_sd: float = 1.0
    alpha_squared: bool = True
    tail_correction: bool = True

    def __post_init__(self) -> None:
        if self.kind not in DGP_KINDS:
            raise ValueError(f"unknown dgp kind {self.kind!r}; expected one of {DGP_KINDS}")
        lo = -0.5 if self.kind == "arfima" else 0.0
        if not lo < self.d < 0.5 and not (self.kind == "arfima" and self.d == 0.0):
            raise ValueError(f"d={self.d} outside the admissible range for {self.kind}")
        if self.kind == "arfima" and not abs(self.phi) < 1.0:
            raise ValueError(f"phi={self.phi} is not stationary")
        if self.n_units < 1:
            raise ValueError("n_units must be at least 1")
        if self.kind == "csa":
            if self.beta_p <= 1.0:
                raise ValueError("beta_p must exceed 1")
            if self.beta_q <= 1.0:
                raise ValueError(f"second Beta shape q = 2(1-d) = {self.beta_q} must exceed 1")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if not self.innovation_sd > 0:
            raise ValueError("innovation_sd must be positive")

    @property
    def beta_q(self) -> float:
        return 2.0 * (1.0 - self.d)

    @property
    def effective_burn_in(self) -> int:
        return _DEFAULT_BURN_IN[self.kind] if self.burn_in is None else int(self.burn_in)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass
class SimulatedPath:
    series: TimeSeries
    seed: int
    spec: DgpSpec
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.series.values


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def unit_seed_sequence(seed: int, unit: int) -> np.random.SeedSequence:
    """Stream for CSA micro unit ``unit``: SeedSequence hashing of ``(seed, unit)``."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(unit),))


def _path(values: np.ndarray, spec: DgpSpec, seed: int, **meta) -> SimulatedPath:
    meta = {"dgp": spec.to_dict(), "seed": int(seed), **meta}
    return SimulatedPath(TimeSeries(values, meta=dict(meta)), int(seed), spec, meta)


def _check_length(length: int) -> int:
    if int(length) < 1:
        raise ValueError("length must be at least 1")
    return int(length)


def circulant_fi(d: float, n: int, rng: np.random.Generator) -> np.ndarray | None:
    """Exact FI(d) sample of length ``n`` (unit innovations) or None if embedding fails."""
    if n == 1:
        return rng.standard_normal(1) * math.sqrt(fi_autocovariance(d, 0)[0])
    g = fi_autocovariance(d, n)
    row = np.r_[g[:n], g[n], g[n - 1 : 0 : -1]]  # size 2n
    lam = np.fft.fft(row).real
    if lam.min() < -1e-10 * lam.max():
        return None
    lam = np.clip(lam, 0.0, None)
    m = row.size
    w = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * w)
    return y.real[:n]


def simulate_arfima(spec: DgpSpec, length: int, seed: int, method: str = "circulant") -> SimulatedPath:
    """Gaussian ARFIMA(1, d, 0) path.

    ``method="truncated_ma"`` forces the fallback generator; it is also used
    automatically if the circulant embedding is not non-negative definite.
    """
    if spec.kind != "arfima":
        raise ValueError("spec is not an arfima spec")
    length = _check_length(length)
    rng = _rng(seed)
    burn = spec.effective_burn_in
    core = None
    used = method
    if method == "circulant":
        core = circulant_fi(spec.d, length + burn, rng)
        if core is None:
            used = "truncated_ma"
    elif method != "truncated_ma":
        raise ValueError(f"unknown method {method!r}")
    if core is None:
        burn = max(burn, _MA_FALLBACK_BURN_IN)
        n = length + burn
        psi = _fracdiff_weights(-spec.d, burn)
        eps = rng.standard_normal(n + burn)
        core = signal.fftconvolve(eps, psi)[burn : burn + n]
    x = signal.lfilter([1.0], [1.0, -spec.phi], spec.innovation_sd * core)
    return _path(x[burn:], spec, seed, method=used, burn_in=burn)


def simulate_csa(spec: DgpSpec, length: int, seed: int) -> SimulatedPath:
    """Cross-sectional aggregate ``N**-0.5 * sum_i x_{i,t}`` of AR(1) micro units.

    Unit ``i`` draws, from its own stream ``unit_seed_sequence(seed, i)``,
    first its Beta variate, then its starting value from the stationary
    law ``N(0, sd**2 / (1 - alpha_i**2))``, then ``length + burn_in``
    innovations.
    """
    if spec.kind != "csa":
        raise ValueError("spec is not a csa spec")
    length = _check_length(length)
    burn = spec.effective_burn_in
    L = length + burn
    p, q = spec.beta_p, spec.beta_q
    sd = spec.innovation_sd
    agg = np.zeros(L)
    alphas = np.empty(spec.n_units)
    for start in range(0, spec.n_units, _CSA_CHUNK):
        stop = min(start + _CSA_CHUNK, spec.n_units)
        k = stop - start
        noise = np.empty((k, L))
        x0 = np.empty(k)
        a = np.empty(k)
        for j, unit in enumerate(range(start, stop)):
            g = np.random.default_rng(unit_seed_sequence(seed, unit))
            u = g.beta(p, q)
            a[j] = math.sqrt(u) if spec.alpha_squared else u
            x0[j] = g.standard_normal() * sd / math.sqrt(1.0 - a[j] ** 2)
            noise[j] = g.standard_normal(L)
        noise *= sd
        # x0 is the value at t = -1; the kernel applies one AR step first
        ar1_aggregate(a, x0, noise, agg)
        alphas[start:stop] = a
    x = agg[burn:] / math.sqrt(spec.n_units)
    return _path(
        x, spec, seed, burn_in=burn, alpha_max=float(alphas.max()), alpha_mean=float(alphas.mean())
    )


def edm_survival(d: float, K: int) -> np.ndarray:
    """Survival probabilities ``p_0 .. p_K``.

    ``p_k = Gamma(k+d) Gamma(2-d) / (Gamma(k+2-d) Gamma(d))``, generated by
    ``p_k = p_{k-1} (k-1+d) / (k+1-d)`` from ``p_0 = 1``.
    """
    k = np.arange(1, K + 1, dtype=float)
    return np.r_[1.0, np.cumprod((k - 1.0 + d) / (k + 1.0 - d))]


def edm_tail_mass(d: float, window: int) -> float:
    """Share of expected live shocks older than ``window`` periods.

    Equals ``sum_{k>window} p_k / sum_{k>=0} p_k``, which is the FI(d)
    autocorrelation at lag ``window + 1``.
    """
    return float(fi_acf(d, window + 1).values[-1])


def _edm_far_past(d: float, window: int, length: int, sd: float, rng: np.random.Generator) -> np.ndarray:
    # shocks born before the window that are still alive at the first sample
    # date; their count is Poisson(sum_{k>window} p_k) and their age has
    # P(age >= a) = rho_a / rho_{window+1} ~ (a / (window+1))**(2d-1)
    out = np.zeros(length)
    total_live = (1.0 - d) / (1.0 - 2.0 * d)
    lam = total_live * edm_tail_mass(d, window)
    count = rng.poisson(lam)
    if count == 0:
        return out
    u = rng.random(count)
    ages = np.minimum((window + 1) * u ** (1.0 / (2.0 * d - 1.0)), 1e15)
    ages = np.floor(ages)
    v = rng.random(count)
    shocks = sd * rng.standard_normal(count)
    t = np.arange(1, length, dtype=float)
    for age, vi, e in zip(ages, v, shocks):
        # log(p_{age+t} / p_age) for t = 0..length-1
        logsurv = np.r_[0.0, np.cumsum(np.log1p((2.0 * d - 2.0) / (age + t + 1.0 - d)))]
        alive = int(np.searchsorted(-logsurv, -math.log(vi), side="right"))
        out[:alive] += e
    return out


def simulate_edm(spec: DgpSpec, length: int, seed: int) -> SimulatedPath:
    """Error duration model path.

    Shocks are born every period of a pre-sample window of ``burn_in``
    periods and of the sample itself.  Each gets a duration ``n_s`` with
    ``P(n_s >= k) = p_k`` by inverting the survival function; ``x_t`` sums
    the shocks alive at ``t``.  With ``tail_correction`` the shocks born
    before the window that survive into the sample are added as well.
    """
    if spec.kind != "edm":
        raise ValueError("spec is not an edm spec")
    length = _check_length(length)
    rng = _rng(seed)
    d, sd = spec.d, spec.innovation_sd
    window = spec.effective_burn_in
    total = window + length
    surv = edm_survival(d, total)
    eps = sd * rng.standard_normal(total)
    u = rng.random(total)
    # n_s = #{k >= 1 : p_k >= u}; surv is decreasing so search the negation
    dur = np.searchsorted(-surv[1:], -u, side="right")
    start = np.arange(total)
    stop = np.minimum(start + dur + 1, total)
    delta = np.bincount(start, weights=eps, minlength=total + 1)
    delta -= np.bincount(stop, weights=eps, minlength=total + 1)
    x = np.cumsum(delta[:total])[window:]
    meta = {"burn_in": window, "tail_mass": edm_tail_mass(d, window)}
    if spec.tail_correction:
        x = x + _edm_far_past(d, window, length, sd, rng)
    return _path(x, spec, seed, **meta)


_SIMULATORS = {"arfima": simulate_arfima, "csa": simulate_csa, "edm": simulate_edm}


def simulate(spec: DgpSpec, length: int, seed: int) -> SimulatedPath:
    """Dispatch on ``spec.kind``."""
    return _SIMULATORS[spec.kind](spec, length, seed)
