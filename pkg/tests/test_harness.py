import csv
import dataclasses

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import lmforecast.harness as harness
from lmforecast.dgp import DgpSpec, simulate
from lmforecast.forecast import forecast, loss, rm_summary
from lmforecast.harness import (
    HAR_COMPARISON_SET,
    PAPER_HORIZONS,
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    emit_tables,
    load_config,
    parse_config,
    replication_seeds,
    run_d_grid,
    run_experiment,
    run_har_comparison,
)
from lmforecast.mcs import BootstrapConfig, LossPanel, mcs
from lmforecast.models import PAPER_MODEL_SET, ModelSpec, fit

SMALL_MODELS = (ModelSpec("FI"), ModelSpec("AR", 2), ModelSpec("ARMA", 1, 0), ModelSpec("RW"))


def small_config(**kw):
    base = dict(
        dgp=DgpSpec("arfima", 0.3), T=200, horizons=(5, 10, 30), R=4, model_set=SMALL_MODELS,
        master_seed=42, boot_replications=199,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_singleton_rate_is_one():
    cfg = small_config(R=1, model_set=(ModelSpec("RW"),))
    res = run_experiment(cfg)
    assert_array_equal(res.inclusion, np.ones((1, 3)))
    res = run_har_comparison(cfg)
    assert res.models == ["I(1)"] and np.all(res.inclusion == 1.0)


def test_replication_matches_manual_protocol():
    cfg = small_config(R=2)
    res = run_experiment(cfg)
    inc = np.zeros((4, 3))
    rmad = np.zeros((4, 3))
    for r in range(2):
        path_seed, boot_seed = replication_seeds(42, r)
        y = simulate(cfg.dgp, 230, path_seed).values
        preds = [forecast(fit(y[:200], s), y[:200], 30).values for s in SMALL_MODELS]
        for j, h in enumerate((5, 10, 30)):
            L = np.column_stack([loss(y[200 : 200 + h], p[:h], "AD") for p in preds])
            out = mcs(LossPanel(L, ["0", "1", "2", "3"]), "R", 0.05, BootstrapConfig(199, None, boot_seed + j))
            for lab in out.superior_set:
                inc[int(lab), j] += 0.5
            for i, p in enumerate(preds):
                rmad[i, j] += rm_summary(y[200 : 200 + h], p[:h], "AD") / 2
    assert_allclose(res.inclusion, inc)
    assert_allclose(res.mean_rmad, rmad, rtol=1e-13)


def test_determinism_and_worker_invariance():
    cfg = small_config(R=5)
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    c = run_experiment(dataclasses.replace(cfg, workers=2))
    assert a.same_as(b)
    assert a.same_as(c)


def test_result_invariants():
    res = run_experiment(small_config(R=6))
    assert np.all((res.inclusion >= 0) & (res.inclusion <= 1))
    assert np.all(res.inclusion.max(axis=0) > 0)
    assert np.all(res.n_success + np.array([sum(f.model == m for f in res.failures) for m in res.models]) == 6)
    assert_allclose(res.inclusion_at(0.05), res.inclusion)
    assert np.all(res.inclusion_at(0.5) <= res.inclusion)


def test_seed_lattice():
    assert replication_seeds(1, 3) == replication_seeds(1, 3)
    assert replication_seeds(1, 3) != replication_seeds(1, 4)
    assert replication_seeds(1, 3) != replication_seeds(2, 3)


def test_failures_are_logged_not_raised(monkeypatch):
    real_fit = harness.fit

    def flaky(sample, spec):
        if spec.family == "ARMA":
            fm = real_fit(sample, spec)
            fm.converged = False
            fm.message = "forced"
            return fm
        if spec.family == "FI":
            raise FloatingPointError("boom")
        return real_fit(sample, spec)

    monkeypatch.setattr(harness, "fit", flaky)
    res = run_experiment(small_config(R=3))
    stages = {(f.model, f.stage) for f in res.failures}
    assert stages == {("ARMA(1,0)", "fit"), ("FI(d)", "fit")}
    assert len(res.failures) == 6
    assert res.rate("ARMA(1,0)", 5) == 0.0 and res.rate("FI(d)", 30) == 0.0
    assert np.isnan(res.rm("FI(d)", 5))
    assert res.n_success.tolist() == [0, 3, 0, 3]


def test_har_comparison_uses_six_models():
    cfg = small_config(R=1, T=300, horizons=(5, 10), model_set=PAPER_MODEL_SET)
    res = run_har_comparison(cfg)
    assert res.models == [m.label for m in HAR_COMPARISON_SET]


def test_d_grid_runs_each_value():
    cfg = small_config(R=1, horizons=(5,), model_set=(ModelSpec("RW"), ModelSpec("AR", 1)), d_grid=(0.1, 0.4))
    out = run_d_grid(cfg)
    assert sorted(out) == [0.1, 0.4]
    assert out[0.4].config.dgp.d == 0.4


@pytest.mark.parametrize(
    "kw",
    [dict(T=100), dict(R=0), dict(horizons=()), dict(horizons=(10, 5)), dict(horizons=(1, 5)),
     dict(model_set=()), dict(model_set=(ModelSpec("RW"), ModelSpec("RW"))), dict(loss_kind="XX"),
     dict(statistic="T"), dict(alpha=1.5), dict(workers=0), dict(block_length=0)],
)
def test_invalid_configs_fail_before_work(kw, monkeypatch):
    monkeypatch.setattr(harness, "_replicate", lambda *a: pytest.fail("work started"))
    with pytest.raises(ConfigError):
        run_experiment(small_config(**kw))


# ------------------------------------------------------------------ tables


def fake_result(models, horizons, loss_kind="AD"):
    m, H = len(models), len(horizons)
    cfg = small_config(model_set=tuple(ModelSpec.parse(x) for x in models), horizons=horizons, loss_kind=loss_kind)
    vals = np.arange(m * H, dtype=float).reshape(m, H) / (m * H)
    return ExperimentResult(cfg, list(models), tuple(horizons), vals, vals + 1, vals + 2, np.ones(m, int))


def test_paper_table_shape(tmp_path):
    res = fake_result([m.label for m in PAPER_MODEL_SET], PAPER_HORIZONS)
    with open(emit_tables(res, "paper-table", tmp_path / "t.csv"), newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 16
    assert rows[0][:3] == ["model", "RMAD_h5", "MCS_h5"] and len(rows[0]) == 13
    assert all(len(r) == 13 for r in rows[1:])
    assert rows[2][0] == "ARFIMA(1,d,0)"
    assert rows[1][1] == "2.000"


def test_one_model_one_horizon(tmp_path):
    res = fake_result(["I(1)"], (5,), loss_kind="SQ")
    lines = emit_tables(res, "paper-table", tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["model,RMSE_h5,MCS_h5", "I(1),1.000,0.000"]


def test_tidy_layout(tmp_path):
    res = fake_result(["I(1)", "AR(2)"], (5, 10))
    lines = emit_tables(res, "tidy-csv", tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "model,horizon,metric,value"
    assert len(lines) == 1 + 2 * 2 * 3
    assert lines[1] == "I(1),5,mcs_inclusion,0"
    assert float(lines[2].split(",")[-1]) == 2.0


def test_emit_errors(tmp_path):
    res = fake_result(["I(1)"], (5,))
    with pytest.raises(ValueError):
        emit_tables(dataclasses.replace(res, horizons=()), "paper-table", tmp_path / "x")
    with pytest.raises(ValueError):
        emit_tables(res, "latex", tmp_path / "x")
    with pytest.raises(OSError, match="nope"):
        emit_tables(res, "tidy-csv", tmp_path / "nope" / "x.csv")


# ------------------------------------------------------------------ config


def test_parse_config_roundtrip():
    cfg, study = parse_config(
        """
        # comment
        dgp = csa
        d = 0.2
        n_units = 500
        T = 400
        horizons = 5, 10
        R = 3
        models = FI(d); ARFIMA(1,d,0); I(1)
        statistic = semiquadratic
        loss = sq
        alpha = 0.1
        master_seed = 9
        boot = 500
        block_length = auto
        study = har
        """
    )
    assert study == "har"
    assert cfg.dgp == DgpSpec("csa", 0.2, n_units=500)
    assert cfg.horizons == (5, 10) and cfg.R == 3 and cfg.T == 400
    assert [m.label for m in cfg.model_set] == ["FI(d)", "ARFIMA(1,d,0)", "I(1)"]
    assert cfg.statistic == "SQ" and cfg.loss_kind == "SQ" and cfg.alpha == 0.1
    assert cfg.boot_replications == 500 and cfg.block_length is None


@pytest.mark.parametrize(
    "text, match",
    [("x = 1", "unknown key"), ("T = 1\nT = 2", "duplicate"), ("garbage", "key = value"),
     ("dgp = foo", "dgp"), ("T = 50", "T must"), ("d = abc", "could not convert"), ("study = other", "study")],
)
def test_parse_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_shipped_configs_parse():
    from pathlib import Path

    root = Path(__file__).resolve().parents[1] / "configs"
    for name in ("table4_dgp1.cfg", "table5_dgp2.cfg", "table6_dgp3.cfg", "har_comparison_d04.cfg"):
        cfg, _ = load_config(root / name)
        assert cfg.R == 200 and cfg.T == 1000 and cfg.alpha == 0.05
    with pytest.raises(ConfigError, match="not found"):
        load_config(root / "missing.cfg")
