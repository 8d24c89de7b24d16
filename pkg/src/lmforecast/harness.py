"""Monte Carlo forecasting experiments.

One replication simulates ``T + max(horizons)`` points, fits every model
on the first ``T``, forecasts to the longest horizon and, for each
horizon ``h``, runs the Model Confidence Set on the ``h x m`` panel of
per-step losses.  Across replications the harness reports how often each
model lands in the set and the mean RMSE / RMAD.

Every random draw of replication ``r`` is derived from
``(master_seed, r)``, so results do not depend on the number of workers
or on the order in which replications finish.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .dgp import DGP_KINDS, DgpSpec, simulate
from .forecast import forecast, loss, rm_summary
from .mcs import BootstrapConfig, LossPanel, mcs
from .models import HAR3, HAR4, PAPER_MODEL_SET, ModelSpec, fit

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "FailureRecord",
    "HAR_COMPARISON_SET",
    "PAPER_HORIZONS",
    "emit_tables",
    "load_config",
    "parse_config",
    "replication_seeds",
    "run_d_grid",
    "run_experiment",
    "run_har_comparison",
]

PAPER_HORIZONS = (5, 10, 30, 50, 100, 300)
HAR_COMPARISON_SET: tuple[ModelSpec, ...] = (
    HAR3, ModelSpec("AR", 22), HAR4, ModelSpec("AR", 50), ModelSpec("FI"), ModelSpec("RW"),
)


class ConfigError(ValueError):
    """Invalid experiment or study configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of one Monte Carlo experiment.

    ``dgp.d`` is the memory used by :func:`run_experiment`; ``d_grid`` is
    only read by :func:`run_d_grid`.  ``workers`` bounds the process pool
    and never changes the results.
    """

    dgp: DgpSpec
    T: int = 1000
    horizons: tuple[int, ...] = PAPER_HORIZONS
    R: int = 200
    model_set: tuple[ModelSpec, ...] = PAPER_MODEL_SET
    loss_kind: str = "AD"
    statistic: str = "R"
    alpha: float = 0.05
    master_seed: int = 0
    workers: int = 1
    boot_replications: int = 999
    block_length: int | None = None
    d_grid: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4)

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "model_set", tuple(self.model_set))
        object.__setattr__(self, "d_grid", tuple(float(d) for d in self.d_grid))

    def validate(self) -> None:
        if self.T < 200:
            raise ConfigError(f"T must be at least 200, got {self.T}")
        if self.R < 1:
            raise ConfigError("R must be at least 1")
        if not self.horizons:
            raise ConfigError("horizons must not be empty")
        if any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigError("horizons must be strictly increasing")
        if self.horizons[0] < 2:
            raise ConfigError("the MCS needs horizons of at least 2 steps")
        if not self.model_set:
            raise ConfigError("model_set must not be empty")
        labels = [m.label for m in self.model_set]
        if len(set(labels)) != len(labels):
            raise ConfigError("model_set contains duplicates")
        if self.loss_kind not in ("SQ", "AD"):
            raise ConfigError(f"loss_kind must be SQ or AD, got {self.loss_kind!r}")
        if self.statistic not in ("R", "SQ"):
            raise ConfigError(f"statistic must be R or SQ, got {self.statistic!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.boot_replications < 1:
            raise ConfigError("boot_replications must be at least 1")
        if self.block_length is not None and self.block_length < 1:
            raise ConfigError("block_length must be at least 1")

    def to_dict(self) -> dict[str, Any]:
        out = dataclasses.asdict(self)
        out["dgp"] = self.dgp.to_dict()
        out["model_set"] = [m.label for m in self.model_set]
        out["horizons"] = list(self.horizons)
        out["d_grid"] = list(self.d_grid)
        return out


@dataclass(frozen=True)
class FailureRecord:
    replication: int
    model: str
    stage: str
    message: str


@dataclass(eq=False)
class ExperimentResult:
    """Aggregates over replications, rows in ``models`` order.

    ``inclusion[i, j]`` is the share of all ``R`` replications in which
    model ``i`` was in the MCS at horizon ``horizons[j]``; a replication
    where the model failed counts as not included.  ``mean_rmse`` and
    ``mean_rmad`` average over the replications where the model produced
    forecasts (``n_success``).
    """

    config: ExperimentConfig
    models: list[str]
    horizons: tuple[int, ...]
    inclusion: np.ndarray
    mean_rmse: np.ndarray
    mean_rmad: np.ndarray
    n_success: np.ndarray
    failures: list[FailureRecord] = field(default_factory=list)
    mcs_pvalues: np.ndarray | None = None  # R x m x H, nan where the model failed

    def inclusion_at(self, alpha: float) -> np.ndarray:
        """Inclusion rates for another level, from the stored MCS p-values."""
        if self.mcs_pvalues is None:
            raise ValueError("MCS p-values were not stored")
        with np.errstate(invalid="ignore"):
            return np.mean(self.mcs_pvalues >= alpha, axis=0)

    def _row(self, model: str) -> int:
        return self.models.index(model)

    def rate(self, model: str, h: int) -> float:
        return float(self.inclusion[self._row(model), self.horizons.index(h)])

    def rm(self, model: str, h: int, kind: str = "AD") -> float:
        table = self.mean_rmad if kind == "AD" else self.mean_rmse
        return float(table[self._row(model), self.horizons.index(h)])

    def records(self) -> list[tuple[str, int, str, float]]:
        """Long-format rows ``(model, horizon, metric, value)``."""
        rows = []
        for i, m in enumerate(self.models):
            for j, h in enumerate(self.horizons):
                rows.append((m, h, "mcs_inclusion", float(self.inclusion[i, j])))
                rows.append((m, h, "rmad", float(self.mean_rmad[i, j])))
                rows.append((m, h, "rmse", float(self.mean_rmse[i, j])))
        return rows

    def same_as(self, other: "ExperimentResult") -> bool:
        return (
            self.models == other.models
            and self.horizons == other.horizons
            and np.array_equal(self.inclusion, other.inclusion)
            and np.array_equal(self.mean_rmse, other.mean_rmse, equal_nan=True)
            and np.array_equal(self.mean_rmad, other.mean_rmad, equal_nan=True)
            and np.array_equal(self.n_success, other.n_success)
            and self.failures == other.failures
            and np.array_equal(self.mcs_pvalues, other.mcs_pvalues, equal_nan=True)
        )


def replication_seeds(master_seed: int, r: int) -> tuple[int, int]:
    """``(path_seed, bootstrap_seed)`` for replication ``r``."""
    state = np.random.SeedSequence(int(master_seed), spawn_key=(int(r),)).generate_state(2)
    return int(state[0]), int(state[1])


@dataclass
class _Outcome:
    r: int
    included: np.ndarray  # m x H, bool
    rmse: np.ndarray  # m x H, nan where the model failed
    rmad: np.ndarray
    pvalues: np.ndarray  # m x H
    failures: list[FailureRecord]


def _replicate(config: ExperimentConfig, r: int) -> _Outcome:
    m, H = len(config.model_set), len(config.horizons)
    hmax = config.horizons[-1]
    path_seed, boot_seed = replication_seeds(config.master_seed, r)
    y = simulate(config.dgp, config.T + hmax, path_seed).values
    sample, future = y[: config.T], y[config.T :]
    failures = []
    preds: dict[int, np.ndarray] = {}
    for i, spec in enumerate(config.model_set):
        stage = "fit"
        try:
            fm = fit(sample, spec)
            if fm.failed:
                failures.append(FailureRecord(r, spec.label, stage, fm.message or "did not converge"))
                continue
            stage = "forecast"
            preds[i] = forecast(fm, sample, hmax).values
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append(FailureRecord(r, spec.label, stage, f"{type(exc).__name__}: {exc}"))
    included = np.zeros((m, H), dtype=bool)
    rmse = np.full((m, H), np.nan)
    rmad = np.full((m, H), np.nan)
    pvals = np.full((m, H), np.nan)
    alive = sorted(preds)
    for j, h in enumerate(config.horizons):
        for i in alive:
            rmse[i, j] = rm_summary(future[:h], preds[i][:h], "SQ")
            rmad[i, j] = rm_summary(future[:h], preds[i][:h], "AD")
        if not alive:
            continue
        panel = np.column_stack([loss(future[:h], preds[i][:h], config.loss_kind) for i in alive])
        boot = BootstrapConfig(config.boot_replications, config.block_length, boot_seed + j)
        res = mcs(LossPanel(panel, [str(i) for i in alive], config.loss_kind),
                  config.statistic, config.alpha, boot)
        for lab, pv in res.pvalues.items():
            pvals[int(lab), j] = pv
        for lab in res.superior_set:
            included[int(lab), j] = True
    return _Outcome(r, included, rmse, rmad, pvals, failures)


def _run_chunk(config: ExperimentConfig, reps: Sequence[int]) -> list[_Outcome]:
    return [_replicate(config, r) for r in reps]


def _collect(config: ExperimentConfig, outcomes: list[_Outcome]) -> ExperimentResult:
    outcomes = sorted(outcomes, key=lambda o: o.r)
    inc = np.sum([o.included for o in outcomes], axis=0, dtype=float) / config.R
    rmse = np.stack([o.rmse for o in outcomes])
    rmad = np.stack([o.rmad for o in outcomes])
    ok = ~np.isnan(rmad[:, :, 0])
    n_success = ok.sum(axis=0)
    with np.errstate(invalid="ignore"):
        mean_rmse = np.nansum(rmse, axis=0) / n_success[:, None]
        mean_rmad = np.nansum(rmad, axis=0) / n_success[:, None]
    mean_rmse[n_success == 0] = np.nan
    mean_rmad[n_success == 0] = np.nan
    return ExperimentResult(
        config=config,
        models=[m.label for m in config.model_set],
        horizons=config.horizons,
        inclusion=inc,
        mean_rmse=mean_rmse,
        mean_rmad=mean_rmad,
        n_success=n_success,
        failures=[f for o in outcomes for f in o.failures],
        mcs_pvalues=np.stack([o.pvalues for o in outcomes]),
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run ``config.R`` replications and aggregate them.

    Raises
    ------
    ConfigError
        Before any work if the configuration is invalid.  Failures inside a
        replication are logged in the result, never raised.
    """
    config.validate()
    reps = list(range(config.R))
    if config.workers == 1 or config.R == 1:
        outcomes = _run_chunk(config, reps)
    else:
        n_chunks = min(config.R, 4 * config.workers)
        chunks = [reps[k::n_chunks] for k in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = pool.map(_run_chunk, [config] * n_chunks, chunks)
            outcomes = [o for part in parts for o in part]
    return _collect(config, outcomes)


def run_har_comparison(config: ExperimentConfig) -> ExperimentResult:
    """Same protocol with the six-model set HAR(3), AR(22), HAR(4), AR(50), FI(d), I(1).

    A ``model_set`` that is already a subset of those six is kept (useful
    for degenerate checks); anything else is replaced by the full six.
    """
    allowed = {m.label for m in HAR_COMPARISON_SET}
    if not {m.label for m in config.model_set} <= allowed:
        config = dataclasses.replace(config, model_set=HAR_COMPARISON_SET)
    return run_experiment(config)


def run_d_grid(config: ExperimentConfig, har: bool = False) -> dict[float, ExperimentResult]:
    """One experiment per value of ``config.d_grid`` with otherwise equal settings."""
    runner = run_har_comparison if har else run_experiment
    out = {}
    for d in config.d_grid:
        out[d] = runner(dataclasses.replace(config, dgp=dataclasses.replace(config.dgp, d=d)))
    return out


# ---------------------------------------------------------------------------
# output


def _fmt_table(v: float) -> str:
    return "NA" if not math.isfinite(v) else f"{v:.3f}"


def emit_tables(result: ExperimentResult, layout: str, path: str | os.PathLike) -> Path:
    """Write ``result`` as ``paper-table`` or ``tidy-csv`` and return the path.

    The paper-table layout has one row per model and, per horizon, the
    RMAD (or RMSE for squared loss) followed by the MCS inclusion rate.
    The tidy layout has columns ``model,horizon,metric,value`` with 17
    significant digits.
    """
    if not result.horizons:
        raise ValueError("result has no horizons")
    path = Path(path)
    if layout == "paper-table":
        rm_name = "RMAD" if result.config.loss_kind == "AD" else "RMSE"
        table = result.mean_rmad if result.config.loss_kind == "AD" else result.mean_rmse
        header = ["model"]
        for h in result.horizons:
            header += [f"{rm_name}_h{h}", f"MCS_h{h}"]
        rows = [header]
        for i, m in enumerate(result.models):
            cells = [m]
            for j in range(len(result.horizons)):
                cells += [_fmt_table(table[i, j]), _fmt_table(result.inclusion[i, j])]
            rows.append(cells)
    elif layout == "tidy-csv":
        rows = [["model", "horizon", "metric", "value"]]
        rows += [[m, h, k, repr(v) if not math.isfinite(v) else f"{v:.17g}"] for m, h, k, v in result.records()]
    else:
        raise ValueError(f"unknown layout {layout!r}")
    # labels such as ARFIMA(1,d,0) contain commas and get quoted
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# ---------------------------------------------------------------------------
# flat key = value configuration

_DGP_KEYS = {"phi": float, "n_units": int, "beta_p": float, "burn_in": int,
             "innovation_sd": float}
_KNOWN = {"dgp", "d", "T", "horizons", "R", "models", "loss", "statistic", "alpha", "master_seed",
          "workers", "boot", "block_length", "d_grid", "study", "tail_correction", *_DGP_KEYS}

CONFIG_KEYS = tuple(sorted(_KNOWN))


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]


def _models(value: str) -> tuple[ModelSpec, ...]:
    key = value.strip().lower()
    if key in ("paper", "table2", "default"):
        return PAPER_MODEL_SET
    if key == "har":
        return HAR_COMPARISON_SET
    # model labels contain commas, so the list separator is ';'
    return tuple(ModelSpec.parse(v.strip()) for v in value.split(";") if v.strip())


def parse_config(text: str) -> tuple[ExperimentConfig, str]:
    """Parse ``key = value`` lines into a config and the study kind.

    Blank lines and ``#`` comments are ignored.  Lists are comma
    separated, except ``models`` which is ``;`` separated (or one of
    ``paper`` / ``har``).  ``study`` is ``experiment`` (default) or ``har``.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _KNOWN:
            raise ConfigError(f"line {lineno}: unknown key {k!r}; known keys: {', '.join(CONFIG_KEYS)}")
        if k in raw:
            raise ConfigError(f"line {lineno}: duplicate key {k!r}")
        raw[k] = v
    try:
        kind = raw.get("dgp", "arfima").lower()
        if kind not in DGP_KINDS:
            raise ConfigError(f"dgp must be one of {DGP_KINDS}")
        dgp_kw: dict[str, Any] = {k: conv(raw[k]) for k, conv in _DGP_KEYS.items() if k in raw}
        if "tail_correction" in raw:
            dgp_kw["tail_correction"] = raw["tail_correction"].lower() in ("1", "true", "yes", "on")
        dgp = DgpSpec(kind, float(raw.get("d", "0.3")), **dgp_kw)
        kw: dict[str, Any] = {"dgp": dgp}
        if "T" in raw:
            kw["T"] = int(raw["T"])
        if "R" in raw:
            kw["R"] = int(raw["R"])
        if "horizons" in raw:
            kw["horizons"] = tuple(int(h) for h in _split(raw["horizons"]))
        if "d_grid" in raw:
            kw["d_grid"] = tuple(float(v) for v in _split(raw["d_grid"]))
        if "models" in raw:
            kw["model_set"] = _models(raw["models"])
        if "loss" in raw:
            kw["loss_kind"] = raw["loss"].upper()
        if "statistic" in raw:
            stat = raw["statistic"].upper()
            kw["statistic"] = {"RANGE": "R", "SEMIQUADRATIC": "SQ"}.get(stat, stat)
        if "alpha" in raw:
            kw["alpha"] = float(raw["alpha"])
        if "master_seed" in raw:
            kw["master_seed"] = int(raw["master_seed"])
        if "workers" in raw:
            kw["workers"] = int(raw["workers"])
        if "boot" in raw:
            kw["boot_replications"] = int(raw["boot"])
        if "block_length" in raw:
            bl = raw["block_length"].lower()
            kw["block_length"] = None if bl in ("auto", "none") else int(bl)
        config = ExperimentConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    study = raw.get("study", "experiment").lower()
    if study not in ("experiment", "har"):
        raise ConfigError("study must be 'experiment' or 'har'")
    config.validate()
    return config, study


def load_config(path: str | os.PathLike) -> tuple[ExperimentConfig, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"))


def timed(fn, *args, **kwargs):
    """``(result, seconds)`` of one call."""
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0
