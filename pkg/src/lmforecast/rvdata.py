"""Realized-variance input and the increasing-window forecasting study.

Input format: a CSV with a header row containing a date column (ISO
``YYYY-MM-DD``; a trailing time/zone part such as ``2000-01-03
00:00:00+01:00`` is ignored) and a decimal RV column.  Extra columns are
ignored.  If ``symbol`` is given, only rows whose ``Symbol`` column equals
it are kept, which covers multi-index extracts in long format.

The study fits every model on an expanding sample that starts at a fixed
date and ends at each window end, forecasts each horizon and runs the
Model Confidence Set per (window, horizon).
"""

from __future__ import annotations

import csv
import datetime as dt
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .forecast import forecast, loss, rm_summary
from .harness import ConfigError, FailureRecord
from .mcs import BootstrapConfig, LossPanel, mcs
from .models import PAPER_MODEL_SET, ModelSpec, fit, memory_estimate

__all__ = [
    "RV_HORIZONS",
    "RV_MODEL_SET",
    "DataError",
    "RvSeries",
    "WindowStudyConfig",
    "WindowStudyResult",
    "load_rv",
    "load_study_config",
    "model_group",
    "parse_study_config",
    "run_window_study",
]

RV_HORIZONS = (5, 10, 22, 66, 120, 254)
RV_MODEL_SET: tuple[ModelSpec, ...] = tuple(
    m for m in PAPER_MODEL_SET if m.label != "ARFIMA(2,d,1)"
)
GROUPS = ("ARFIMA", "ARMA", "AR/HAR", "I(1)")


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass
class RvSeries:
    dates: np.ndarray  # datetime64[D], strictly increasing
    rv: np.ndarray
    source: str = ""
    dropped: int = 0

    def __post_init__(self) -> None:
        self.dates = np.asarray(self.dates, dtype="datetime64[D]")
        self.rv = np.asarray(self.rv, dtype=float)
        if self.dates.shape != self.rv.shape or self.rv.ndim != 1:
            raise DataError("dates and rv must be 1-d arrays of equal length")
        if self.rv.size and (not np.all(np.isfinite(self.rv)) or np.any(self.rv < 0)):
            raise DataError("rv must be finite and non-negative")
        if np.any(np.diff(self.dates) <= np.timedelta64(0, "D")):
            raise DataError("dates must be strictly increasing")

    def __len__(self) -> int:
        return self.rv.size

    def index_of(self, date) -> int:
        """Position of the last observation dated on or before ``date``."""
        k = int(np.searchsorted(self.dates, np.datetime64(date, "D"), side="right")) - 1
        if k < 0:
            raise DataError(f"{date} precedes the first observation {self.dates[0]}")
        return k


def _parse_date(text: str) -> np.datetime64:
    head = text.strip()[:10]
    return np.datetime64(dt.date.fromisoformat(head), "D")


def load_rv(path: str | os.PathLike, column: str = "rv", date_column: str = "date",
            symbol: str | None = None) -> RvSeries:
    """Read, validate and clean a realized-variance CSV.

    Rows with a missing, non-numeric, non-finite or negative RV value are
    dropped and counted in ``RvSeries.dropped``.

    Raises
    ------
    DataError
        Missing file or column, unparseable or non-increasing dates, or no
        usable rows.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"input file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if date_column not in fields and "" in fields and date_column == "date":
            date_column = ""  # unnamed index column of pandas exports
        for col in (date_column, column):
            if col not in fields:
                shown = ", ".join(f or "<unnamed>" for f in fields)
                raise DataError(f"column {col!r} not found in {path}; available: {shown}")
        if symbol is not None and "Symbol" not in fields:
            raise DataError(f"symbol filter needs a 'Symbol' column in {path}")
        dates, values, dropped = [], [], 0
        for lineno, row in enumerate(reader, 2):
            if symbol is not None and row["Symbol"] != symbol:
                continue
            try:
                d = _parse_date(row[date_column] or "")
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: unparseable date {row[date_column]!r}") from exc
            try:
                v = float(row[column])
            except (TypeError, ValueError):
                v = math.nan
            if not math.isfinite(v) or v < 0:
                dropped += 1
                continue
            dates.append(d)
            values.append(v)
    if not values:
        raise DataError(f"no usable rows in {path}")
    dates_arr = np.array(dates, dtype="datetime64[D]")
    if np.any(np.diff(dates_arr) <= np.timedelta64(0, "D")):
        raise DataError(f"dates in {path} are not strictly increasing")
    return RvSeries(dates_arr, np.array(values), source=f"{path}:{column}", dropped=dropped)


@dataclass(frozen=True)
class WindowStudyConfig:
    """Increasing-window study settings.

    Window ends run over every trading day from ``first_window_end`` to
    ``last_window_end`` inclusive.  Each estimation sample starts at
    ``start`` (default: the first observation).
    """

    first_window_end: Any
    last_window_end: Any
    horizons: tuple[int, ...] = RV_HORIZONS
    model_set: tuple[ModelSpec, ...] = RV_MODEL_SET
    loss_kind: str = "AD"
    alpha: float = 0.05
    statistic: str = "R"
    start: Any = None
    log: bool = False
    seed: int = 0
    boot_replications: int = 999
    block_length: int | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "horizons", tuple(int(h) for h in self.horizons))
        object.__setattr__(self, "model_set", tuple(self.model_set))

    def validate(self, series: RvSeries) -> tuple[int, int, int]:
        """Check against ``series``; returns (start, first end, last end) positions."""
        if not self.horizons or any(b <= a for a, b in zip(self.horizons, self.horizons[1:])):
            raise ConfigError("horizons must be non-empty and strictly increasing")
        if self.horizons[0] < 2:
            raise ConfigError("the MCS needs horizons of at least 2 steps")
        if not self.model_set:
            raise ConfigError("model_set must not be empty")
        if self.loss_kind not in ("SQ", "AD") or self.statistic not in ("R", "SQ"):
            raise ConfigError("loss_kind must be SQ/AD and statistic R/SQ")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be in (0, 1)")
        if len(series) == 0:
            raise ConfigError("empty series")
        try:
            s = 0 if self.start is None else int(np.searchsorted(series.dates, np.datetime64(self.start, "D")))
            a = series.index_of(self.first_window_end)
            b = series.index_of(self.last_window_end)
        except (DataError, ValueError) as exc:
            raise ConfigError(f"window endpoints: {exc}") from exc
        if not s <= a <= b:
            raise ConfigError("need start <= first_window_end <= last_window_end")
        if b + self.horizons[-1] >= len(series):
            raise ConfigError(
                f"last window ends at position {b}; scoring h={self.horizons[-1]} needs "
                f"{b + self.horizons[-1] + 1} observations, series has {len(series)}"
            )
        return s, a, b


@dataclass(eq=False)
class WindowStudyResult:
    config: WindowStudyConfig
    models: list[str]
    horizons: tuple[int, ...]
    window_ends: list[str]
    inclusion: np.ndarray  # m x H, share of windows
    mean_rmad: np.ndarray
    mean_rmse: np.ndarray
    group_inclusion: dict[str, np.ndarray]
    first_window_rmad: np.ndarray
    first_window_included: np.ndarray
    memory: dict[str, float]
    failures: list[FailureRecord] = field(default_factory=list)

    @property
    def n_windows(self) -> int:
        return len(self.window_ends)

    def rate(self, model: str, h: int) -> float:
        return float(self.inclusion[self.models.index(model), self.horizons.index(h)])


def model_group(spec: ModelSpec) -> str:
    if spec.fractional:
        return "ARFIMA"
    return {"ARMA": "ARMA", "AR": "AR/HAR", "HAR": "AR/HAR", "RW": "I(1)"}[spec.family]


def _window(config: WindowStudyConfig, y: np.ndarray, start: int, end: int, w: int):
    m, H = len(config.model_set), len(config.horizons)
    hmax = config.horizons[-1]
    sample = y[start : end + 1]
    future = y[end + 1 : end + 1 + hmax]
    mcs_seed = int(np.random.SeedSequence(int(config.seed), spawn_key=(w,)).generate_state(1)[0])
    preds, failures = {}, []
    for i, spec in enumerate(config.model_set):
        try:
            fm = fit(sample, spec)
            if fm.failed:
                failures.append(FailureRecord(w, spec.label, "fit", fm.message or "did not converge"))
                continue
            preds[i] = forecast(fm, sample, hmax).values
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            failures.append(FailureRecord(w, spec.label, "fit/forecast", f"{type(exc).__name__}: {exc}"))
    included = np.zeros((m, H), dtype=bool)
    rmad = np.full((m, H), np.nan)
    rmse = np.full((m, H), np.nan)
    alive = sorted(preds)
    for j, h in enumerate(config.horizons):
        for i in alive:
            rmad[i, j] = rm_summary(future[:h], preds[i][:h], "AD")
            rmse[i, j] = rm_summary(future[:h], preds[i][:h], "SQ")
        if alive:
            panel = np.column_stack([loss(future[:h], preds[i][:h], config.loss_kind) for i in alive])
            boot = BootstrapConfig(config.boot_replications, config.block_length, mcs_seed + j)
            res = mcs(LossPanel(panel, [str(i) for i in alive]), config.statistic, config.alpha, boot)
            for lab in res.superior_set:
                included[int(lab), j] = True
    return w, included, rmad, rmse, failures


def _run_windows(config, y, start, ends: Sequence[tuple[int, int]]):
    return [_window(config, y, start, e, w) for w, e in ends]


def run_window_study(series: RvSeries, config: WindowStudyConfig) -> WindowStudyResult:
    """Run the increasing-window study.

    Estimation sample ``w`` is ``series[start : end_w + 1]``; forecasts are
    scored on the following ``h`` observations only.  Group rates are the
    share of windows in which at least one member of the group is in the
    MCS.  Memory estimates refer to the first estimation sample.
    """
    start, first, last = config.validate(series)
    if config.log and not np.all(series.rv > 0):
        raise ConfigError("log transform needs strictly positive RV")
    y = np.log(series.rv) if config.log else series.rv
    ends = list(enumerate(range(first, last + 1)))
    if config.workers > 1 and len(ends) > 1:
        n_chunks = min(len(ends), 4 * config.workers)
        chunks = [ends[k::n_chunks] for k in range(n_chunks)]
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            parts = pool.map(_run_windows, [config] * n_chunks, [y] * n_chunks, [start] * n_chunks, chunks)
            outs = sorted((o for part in parts for o in part), key=lambda o: o[0])
    else:
        outs = _run_windows(config, y, start, ends)
    inc = np.stack([o[1] for o in outs])  # W x m x H
    rmad = np.stack([o[2] for o in outs])
    rmse = np.stack([o[3] for o in outs])
    groups = [model_group(s) for s in config.model_set]
    group_inc = {}
    for g in GROUPS:
        rows = [i for i, gi in enumerate(groups) if gi == g]
        if rows:
            group_inc[g] = inc[:, rows, :].any(axis=1).mean(axis=0)
    n_ok = np.sum(~np.isnan(rmad), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_rmad = np.where(n_ok > 0, np.nansum(rmad, axis=0) / n_ok, np.nan)
        mean_rmse = np.where(n_ok > 0, np.nansum(rmse, axis=0) / n_ok, np.nan)
    sample0 = y[start : first + 1]
    memory = {}
    for method in ("gph", "lw", "mle"):
        try:
            memory[method] = memory_estimate(sample0, method)
        except (ValueError, ArithmeticError) as exc:
            memory[method] = math.nan
            outs[0][4].append(FailureRecord(0, f"memory:{method}", "estimate", str(exc)))
    return WindowStudyResult(
        config=config,
        models=[m.label for m in config.model_set],
        horizons=config.horizons,
        window_ends=[str(series.dates[e]) for _, e in ends],
        inclusion=inc.mean(axis=0),
        mean_rmad=mean_rmad,
        mean_rmse=mean_rmse,
        group_inclusion=group_inc,
        first_window_rmad=rmad[0],
        first_window_included=inc[0],
        memory=memory,
        failures=[f for o in outs for f in o[4]],
    )


# ---------------------------------------------------------------------------
# configuration file

_STUDY_KEYS = {"first_window_end", "last_window_end", "start", "horizons", "models", "loss",
               "statistic", "alpha", "log", "seed", "boot", "block_length", "workers",
               "column", "date_column", "symbol"}


def parse_study_config(text: str) -> tuple[WindowStudyConfig, dict[str, str]]:
    """Parse ``key = value`` lines; returns the config and the input options
    (``column``, ``date_column``, ``symbol``)."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        if k not in _STUDY_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {k!r}; known keys: {', '.join(sorted(_STUDY_KEYS))}")
        raw[k] = v
    for req in ("first_window_end", "last_window_end"):
        if req not in raw:
            raise ConfigError(f"missing required key {req!r}")
    kw: dict[str, Any] = {"first_window_end": raw["first_window_end"], "last_window_end": raw["last_window_end"]}
    try:
        for key in ("first_window_end", "last_window_end", "start"):
            if key in raw:
                kw[key] = dt.date.fromisoformat(raw[key])
        if "horizons" in raw:
            kw["horizons"] = tuple(int(h) for h in raw["horizons"].split(",") if h.strip())
        if "models" in raw:
            key = raw["models"].strip().lower()
            kw["model_set"] = RV_MODEL_SET if key in ("paper", "default") else tuple(
                ModelSpec.parse(s.strip()) for s in raw["models"].split(";") if s.strip())
        if "loss" in raw:
            kw["loss_kind"] = raw["loss"].upper()
        if "statistic" in raw:
            st = raw["statistic"].upper()
            kw["statistic"] = {"RANGE": "R", "SEMIQUADRATIC": "SQ"}.get(st, st)
        if "alpha" in raw:
            kw["alpha"] = float(raw["alpha"])
        if "log" in raw:
            kw["log"] = raw["log"].lower() in ("1", "true", "yes", "on")
        if "seed" in raw:
            kw["seed"] = int(raw["seed"])
        if "boot" in raw:
            kw["boot_replications"] = int(raw["boot"])
        if "block_length" in raw:
            bl = raw["block_length"].lower()
            kw["block_length"] = None if bl in ("auto", "none") else int(bl)
        if "workers" in raw:
            kw["workers"] = int(raw["workers"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    io = {k: raw[k] for k in ("column", "date_column", "symbol") if k in raw}
    return WindowStudyConfig(**kw), io


def load_study_config(path: str | os.PathLike) -> tuple[WindowStudyConfig, dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_study_config(path.read_text(encoding="utf-8"))

