import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import special, stats

from lmforecast.dgp import (
    DgpSpec,
    circulant_fi,
    edm_survival,
    edm_tail_mass,
    simulate,
    simulate_arfima,
    simulate_csa,
    simulate_edm,
    unit_seed_sequence,
)
from lmforecast.models import gph_estimate, local_whittle_estimate
from lmforecast.specfun import arfima_acf, fi_acf, fi_autocovariance


def sample_acf(x, k):
    xc = x - x.mean()
    return float(np.dot(xc[:-k], xc[k:]) / np.dot(xc, xc))


# ------------------------------------------------------------------- spec


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="bogus", d=0.3),
        dict(kind="csa", d=0.0),
        dict(kind="edm", d=0.5),
        dict(kind="csa", d=0.3, n_units=0),
        dict(kind="csa", d=0.3, beta_p=1.0),
        dict(kind="arfima", d=0.3, phi=1.0),
        dict(kind="edm", d=0.3, burn_in=-1),
        dict(kind="arfima", d=0.3, innovation_sd=0.0),
    ],
)
def test_invalid_specs_rejected(kw):
    with pytest.raises(ValueError):
        DgpSpec(**kw)


def test_beta_q_derived():
    assert DgpSpec("csa", 0.3).beta_q == pytest.approx(1.4)


@pytest.mark.parametrize("kind", ["arfima", "csa", "edm"])
def test_determinism_and_length(kind):
    spec = DgpSpec(kind, 0.3, n_units=200)
    a = simulate(spec, 257, 99)
    b = simulate(spec, 257, 99)
    c = simulate(spec, 257, 100)
    assert a.values.shape == (257,)
    assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.spec == spec and a.seed == 99


def test_wrong_kind_rejected():
    with pytest.raises(ValueError):
        simulate_csa(DgpSpec("edm", 0.3), 10, 0)
    with pytest.raises(ValueError):
        simulate_arfima(DgpSpec("arfima", 0.3), 0, 0)


# ------------------------------------------------------------------ arfima


def test_arfima_white_noise_case():
    x = simulate(DgpSpec("arfima", 0.0, phi=0.0), 2000, 3).values
    assert stats.normaltest(x).pvalue > 0.001
    # Ljung-Box style whiteness over 10 lags
    n = x.size
    q = n * (n + 2) * sum(sample_acf(x, k) ** 2 / (n - k) for k in range(1, 11))
    assert stats.chi2.sf(q, 10) > 0.001
    assert abs(x.std() - 1.0) < 0.06


def test_circulant_core_has_fi_covariance():
    # second moments of the embedding equal the target Toeplitz matrix
    d, n = 0.3, 6
    rng = np.random.default_rng(0)
    draws = np.array([circulant_fi(d, n, rng) for _ in range(40000)])
    emp = draws.T @ draws / draws.shape[0]
    g = fi_autocovariance(d, n - 1)
    target = g[np.abs(np.subtract.outer(np.arange(n), np.arange(n)))]
    assert_allclose(emp, target, atol=0.05)


def demeaned_acf_oracle(acov, T, k):
    """Ratio of expectations E[x'M S_k M x] / E[x'M x] for the Toeplitz covariance."""
    idx = np.abs(np.subtract.outer(np.arange(T), np.arange(T)))
    cov = acov[idx]
    M = np.eye(T) - 1.0 / T
    C = M @ cov @ M
    return np.trace(C, offset=k) / np.trace(C)


def test_arfima_lag1_autocorrelation_band():
    spec = DgpSpec("arfima", 0.3, phi=0.2)
    T = 1000
    r1 = np.array([sample_acf(simulate(spec, T, s).values, 1) for s in range(200)])
    acov = arfima_acf([0.2], 0.3, [], T).values
    target = demeaned_acf_oracle(acov, T, 1)
    assert target < acov[1] / acov[0]  # demeaning bias is material under long memory
    se = r1.std(ddof=1) / math.sqrt(r1.size)
    assert abs(r1.mean() - target) < 2.576 * se + 0.003


def test_arfima_truncated_ma_fallback_recorded():
    p = simulate_arfima(DgpSpec("arfima", 0.3), 300, 1, method="truncated_ma")
    assert p.meta["method"] == "truncated_ma"
    assert p.meta["burn_in"] >= 5000
    assert p.values.size == 300


# --------------------------------------------------------------------- csa


def unit_alphas(spec, seed):
    """Re-derive micro-unit coefficients from the documented per-unit streams."""
    return np.array(
        [
            math.sqrt(np.random.default_rng(unit_seed_sequence(seed, i)).beta(spec.beta_p, spec.beta_q))
            for i in range(spec.n_units)
        ]
    )


def test_csa_coefficients_in_unit_interval():
    spec = DgpSpec("csa", 0.3, n_units=500)
    a = unit_alphas(spec, 4)
    assert np.all((a > 0) & (a < 1))
    path = simulate(spec, 50, 4)
    assert_allclose(path.meta["alpha_max"], a.max())


def test_csa_single_unit_is_ar1():
    # oracle: the same draws pushed through a direct AR(1) loop
    spec = DgpSpec("csa", 0.3, n_units=1)
    for seed in range(20):
        g = np.random.default_rng(unit_seed_sequence(seed, 0))
        a = math.sqrt(g.beta(spec.beta_p, spec.beta_q))
        prev = g.standard_normal() / math.sqrt(1 - a * a)
        eps = g.standard_normal(200)
        ref = np.empty(200)
        for t in range(200):
            prev = a * prev + eps[t]
            ref[t] = prev
        assert_allclose(simulate(spec, 200, seed).values, ref, rtol=1e-12, atol=1e-12)


def test_csa_autocovariance_matches_micro_unit_oracle():
    # conditional on the drawn coefficients, E[x_t x_{t+k}] = mean(a^k / (1 - a^2))
    spec = DgpSpec("csa", 0.3, n_units=2000)
    T, lags = 1000, np.array([0, 1, 5, 20])
    ratios = []
    for seed in range(40):
        x = simulate(spec, T, seed).values
        a = unit_alphas(spec, seed)
        g = np.array([np.mean(a**k / (1 - a * a)) for k in lags])
        s = np.array([np.dot(x[: T - k], x[k:]) / T for k in lags])
        ratios.append(s / (g * (T - lags) / T))
    ratios = np.array(ratios)
    se = ratios.std(axis=0, ddof=1) / math.sqrt(len(ratios))
    assert np.all(np.abs(ratios.mean(axis=0) - 1.0) < 3 * se + 0.02)


def test_csa_population_autocovariance_closed_form():
    # E over Beta draws of a^k / (1 - a^2) with a^2 ~ Beta(p, q) is B(p + k/2, q - 1) / B(p, q)
    spec = DgpSpec("csa", 0.3, n_units=200_000)
    u = np.random.default_rng(1).beta(spec.beta_p, spec.beta_q, size=spec.n_units)
    k = 10
    closed = math.exp(special.betaln(spec.beta_p + k / 2, spec.beta_q - 1) - special.betaln(spec.beta_p, spec.beta_q))
    mc = np.mean(u ** (k / 2) / (1 - u))
    assert abs(mc / closed - 1) < 0.1
    # hyperbolic decay: gamma(k) ~ k^(2d-1) since B(p + k/2, q - 1) ~ k^(1-q)
    ks = np.array([1000.0, 2000.0])
    g = np.exp(special.betaln(spec.beta_p + ks / 2, spec.beta_q - 1))
    slope = np.diff(np.log(g)) / np.diff(np.log(ks))
    assert_allclose(slope, 2 * spec.d - 1, atol=0.01)


def csa_local_memory(spec, m, T):
    """Oracle: least-squares log-spectrum slope of the CSA spectrum over GPH frequencies."""
    p, q = spec.beta_p, spec.beta_q
    lam = 2 * np.pi * np.arange(1, m + 1) / T
    u = np.linspace(0, 1, 200_001)[1:-1]
    w = stats.beta.pdf(u, p, q)
    a = np.sqrt(u)
    f = np.array([np.trapezoid(w / np.abs(1 - a * np.exp(-1j * l)) ** 2, u) for l in lam])
    reg = -2 * np.log(2 * np.sin(lam / 2))
    return np.polyfit(reg, np.log(f), 1)[0]


@pytest.mark.slow
def test_csa_gph_matches_local_spectral_slope():
    spec = DgpSpec("csa", 0.3)
    est = np.array([gph_estimate(simulate(spec, 1000, s).values) for s in range(60)])
    target = csa_local_memory(spec, 31, 1000)
    se = est.std(ddof=1) / math.sqrt(est.size)
    assert abs(est.mean() - target) < 3 * se + 0.03


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="finite-sample CSA memory at T=1000 sits well above d; see decisions ledger")
def test_csa_gph_mean_near_nominal_d():
    spec = DgpSpec("csa", 0.3)
    est = np.array([gph_estimate(simulate(spec, 1000, s).values) for s in range(200)])
    assert abs(est.mean() - 0.3) <= 0.07


# --------------------------------------------------------------------- edm


def test_edm_first_survival_probability():
    assert_allclose(edm_survival(0.3, 1)[1], 0.3 / 1.7, rtol=1e-15)


@pytest.mark.parametrize("d", [0.1, 0.3, 0.45])
def test_edm_survival_matches_gamma_form(d):
    k = np.arange(0, 500)
    ref = np.exp(special.gammaln(k + d) + special.gammaln(2 - d) - special.gammaln(k + 2 - d) - special.gammaln(d))
    p = edm_survival(d, 499)
    assert_allclose(p, ref, rtol=1e-11)
    assert p[0] == 1.0 and np.all(np.diff(p) < 0) and np.all(p > 0)


def test_edm_tail_mass_is_fi_acf():
    d, W = 0.4, 10_000
    p = edm_survival(d, 2_000_000)
    total = (1 - d) / (1 - 2 * d)
    # partial tail sum plus the analytic remainder sum_{k>K} p_k ~ c K^(2d-1)
    K = p.size - 1
    c = math.exp(special.gammaln(2 - d) - special.gammaln(d))
    rem = c * K ** (2 * d - 1) / (1 - 2 * d)
    direct = (p[W + 1 :].sum() + rem) / total
    assert_allclose(edm_tail_mass(d, W), direct, rtol=2e-3)
    assert_allclose(edm_tail_mass(d, W), fi_acf(d, W + 1).values[-1])


def test_edm_acf_decays_hyperbolically():
    # long paths make the demeaning bias negligible over lags 10-100
    spec = DgpSpec("edm", 0.3)
    lags = np.arange(10, 101)
    acfs = []
    for s in range(20):
        x = simulate(spec, 100_000, s).values
        xc = x - x.mean()
        acfs.append([np.dot(xc[:-k], xc[k:]) for k in lags] / np.dot(xc, xc))
    slope = np.polyfit(np.log(lags), np.log(np.mean(acfs, axis=0)), 1)[0]
    assert abs(slope - (2 * 0.3 - 1)) <= 0.25


def test_edm_short_path_acf_matches_fi_oracle():
    # the EDM shares the FI(d) covariance, so short demeaned ACFs follow the same oracle
    T, d = 1000, 0.3
    spec = DgpSpec("edm", d)
    target = [demeaned_acf_oracle(fi_autocovariance(d, T), T, k) for k in (1, 10, 50)]
    est = np.array([[sample_acf(simulate(spec, T, s).values, k) for k in (1, 10, 50)] for s in range(200)])
    se = est.std(axis=0, ddof=1) / math.sqrt(len(est))
    assert np.all(np.abs(est.mean(axis=0) - target) < 3 * se + 0.005)


def test_edm_variance_matches_live_shock_count():
    # Var x_t = sd^2 * E[#live shocks] = (1 - d) / (1 - 2d) for unit innovations
    spec = DgpSpec("edm", 0.2)
    v = np.mean([np.mean(simulate(spec, 200, s).values ** 2) for s in range(400)])
    assert abs(v / ((1 - 0.2) / (1 - 0.4)) - 1) < 0.08


# ---------------------------------------------------------------- invariants


@pytest.mark.parametrize("kind", ["arfima", "csa", "edm"])
def test_zero_mean(kind):
    spec = DgpSpec(kind, 0.3, n_units=1000)
    R = 200 if kind != "csa" else 60
    means = np.array([simulate(spec, 1000, s).values.mean() for s in range(R)])
    se = means.std(ddof=1) / math.sqrt(R)
    assert abs(means.mean()) < 3 * se


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["arfima", "edm"])
@pytest.mark.parametrize("d", [0.2, 0.3, 0.4])
def test_memory_transfer_local_whittle(kind, d):
    spec = DgpSpec(kind, d, phi=0.0)
    est = [local_whittle_estimate(simulate(spec, 1000, s).values) for s in range(200)]
    assert abs(np.mean(est) - d) <= 0.07
