"""Command-line entry point: ``lmforecast <subcommand> ...``.

Exit status is 0 on success, 1 for usage, configuration or data errors
and 2 for internal faults.  Errors are reported on stderr as a single
line ``lmforecast: error[<kind>]: <message>``.  Each run writes one JSON
manifest next to its main output (or to ``--manifest``).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as dt
import io
import json
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy

from . import __version__
from .dgp import DGP_KINDS, DgpSpec, simulate
from .forecast import forecast
from .harness import ConfigError, emit_tables, load_config, run_experiment, run_har_comparison
from .mcs import BootstrapConfig, LossPanel, mcs
from .models import EstimationError, ModelSpec, fit, memory_estimate
from .rvdata import DataError, load_rv, load_study_config, run_window_study

PROG = "lmforecast"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _fmt(v: float) -> str:
    return repr(float(v)) if not math.isfinite(v) else f"{float(v):.17g}"


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[Any]],
               comment: str | None = None) -> str | None:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(c) if isinstance(c, (float, np.floating)) else c for c in row])
    if path == "-":
        sys.stdout.write(buf.getvalue())
        return None
    p = Path(path)
    try:
        p.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {p}: {exc.strerror or exc}") from exc
    return str(p)


def _uncommented(lines):
    return (line for line in lines if not line.startswith("#"))


def _read_series(path: str, column: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input file not found: {p}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(_uncommented(fh))
        if column not in (reader.fieldnames or []):
            raise DataError(f"column {column!r} not found in {p}; available: {', '.join(reader.fieldnames or [])}")
        try:
            x = np.array([float(r[column]) for r in reader])
        except ValueError as exc:
            raise DataError(f"non-numeric value in column {column!r} of {p}: {exc}") from exc
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise DataError(f"column {column!r} of {p} is empty or has non-finite values")
    return x


def _read_panel(path: str) -> LossPanel:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"loss file not found: {p}")
    with p.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(_uncommented(fh)))
    if len(rows) < 2:
        raise DataError(f"{p} needs a header row and at least one data row")
    try:
        values = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DataError(f"non-numeric loss in {p}: {exc}") from exc
    return LossPanel(values, [h.strip() for h in rows[0]])


def _manifest_path(args, main_output: str | None, cmd: str) -> Path:
    if args.manifest:
        return Path(args.manifest)
    if main_output:
        return Path(main_output + ".manifest.json")
    return Path(f"{PROG}-{cmd}.manifest.json")


# ---------------------------------------------------------------------------
# subcommands; each returns (outputs, manifest extras)


def cmd_simulate(args):
    spec = DgpSpec(args.dgp, args.d, phi=args.phi, n_units=args.n_units, beta_p=args.beta_p,
                   burn_in=args.burn_in)
    path = simulate(spec, args.length, args.seed)
    desc = " ".join(f"{k}={v}" for k, v in spec.to_dict().items())
    out = _write_csv(args.out, ["value"], [(float(v),) for v in path.values],
                     comment=f"{PROG} simulate {desc} length={args.length} seed={args.seed}")
    return [out], {"config": {"dgp": spec.to_dict(), "length": args.length},
                   "seeds": {"seed": args.seed}, "meta": {k: v for k, v in path.meta.items() if k != "dgp"}}


def cmd_fit(args):
    x = _read_series(args.input, args.column)
    fm = fit(x, ModelSpec.parse(args.model))
    rows = [(k, float(v)) for k, v in fm.params().items()]
    rows += [("loglik", float("nan") if fm.loglik is None else fm.loglik),
             ("bic", float("nan") if fm.bic is None else fm.bic),
             ("converged", int(fm.converged)), ("nobs", fm.nobs)]
    out = _write_csv(args.out, ["parameter", "value"], rows)
    warn = [] if fm.converged else [f"{fm.label} did not converge: {fm.message}"]
    return [out], {"config": {"model": fm.label, "input": args.input, "column": args.column,
                              "method": fm.method}, "warnings": warn}


def cmd_memest(args):
    x = _read_series(args.input, args.column)
    methods = ("gph", "lw", "mle") if args.method == "all" else (args.method,)
    rows = [(m, memory_estimate(x, m, args.bandwidth)) for m in methods]
    out = _write_csv(args.out, ["method", "d_hat"], rows)
    return [out], {"config": {"methods": list(methods), "bandwidth": args.bandwidth,
                              "input": args.input, "column": args.column}}


def cmd_forecast(args):
    x = _read_series(args.input, args.column)
    fm = fit(x, ModelSpec.parse(args.model))
    if fm.failed:
        raise EstimationError(f"{fm.label} did not converge: {fm.message}")
    path = forecast(fm, x, args.h)
    out = _write_csv(args.out, ["horizon", "forecast"],
                     [(k + 1, float(v)) for k, v in enumerate(path.values)])
    return [out], {"config": {"model": fm.label, "h": args.h, "input": args.input,
                              "column": args.column, "params": fm.params()}}


def cmd_mcs(args):
    panel = _read_panel(args.losses)
    boot = BootstrapConfig(args.boot, args.blocks, args.seed)
    res = mcs(panel, args.stat, args.alpha, boot)
    rank = {lab: i + 1 for i, (lab, _) in enumerate(res.elimination_order)}
    rows = [(lab, res.pvalues[lab], int(lab in res.superior_set), rank[lab]) for lab in panel.model_ids]
    out = _write_csv(args.out, ["model", "mcs_pvalue", "in_set", "elimination_step"], rows)
    return [out], {"config": {"losses": args.losses, "statistic": res.statistic, "alpha": args.alpha,
                              "bootstrap": res.bootstrap}, "seeds": {"bootstrap": args.seed}}


def cmd_experiment(args):
    config, study = load_config(args.config)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
        config.validate()
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    res = (run_har_comparison if study == "har" else run_experiment)(config)
    wall = time.perf_counter() - t0
    outs = [str(emit_tables(res, "paper-table", outdir / "table.csv")),
            str(emit_tables(res, "tidy-csv", outdir / "tidy.csv"))]
    outs.append(_write_csv(str(outdir / "failures.csv"), ["replication", "model", "stage", "message"],
                           [(f.replication, f.model, f.stage, f.message) for f in res.failures]))
    args._manifest_default = str(outdir / "manifest.json")
    return outs, {"config": {**config.to_dict(), "study": study}, "seeds": {"master_seed": config.master_seed},
                  "failures": len(res.failures), "wall_time_s": wall}


def cmd_rv_study(args):
    config, io_opts = load_study_config(args.config)
    if args.log:
        config = dataclasses.replace(config, log=True)
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)
    series = load_rv(args.input, column=io_opts.get("column", "rv"),
                     date_column=io_opts.get("date_column", "date"), symbol=io_opts.get("symbol"))
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = run_window_study(series, config)
    outs = []
    rows = [(g, h, float(v[j])) for g, v in res.group_inclusion.items() for j, h in enumerate(res.horizons)]
    outs.append(_write_csv(str(outdir / "groups.csv"), ["group", "horizon", "mcs_inclusion"], rows))
    rows = []
    for i, m in enumerate(res.models):
        for j, h in enumerate(res.horizons):
            rows.append((m, h, float(res.inclusion[i, j]), float(res.mean_rmad[i, j]),
                         float(res.first_window_rmad[i, j]), int(res.first_window_included[i, j])))
    outs.append(_write_csv(str(outdir / "models.csv"),
                           ["model", "horizon", "mcs_inclusion", "mean_rmad", "first_window_rmad",
                            "first_window_in_mcs"], rows))
    outs.append(_write_csv(str(outdir / "memory.csv"), ["method", "d_hat"],
                           [(k, float(v)) for k, v in res.memory.items()]))
    args._manifest_default = str(outdir / "manifest.json")
    cfg = {k: (str(v) if isinstance(v, dt.date) else v) for k, v in {
        "first_window_end": config.first_window_end, "last_window_end": config.last_window_end,
        "start": config.start, "horizons": list(config.horizons),
        "model_set": [m.label for m in config.model_set], "loss_kind": config.loss_kind,
        "alpha": config.alpha, "statistic": config.statistic, "log": config.log,
        "boot_replications": config.boot_replications, "block_length": config.block_length,
        "workers": config.workers, **io_opts}.items()}
    return outs, {"config": cfg, "seeds": {"seed": config.seed}, "failures": len(res.failures),
                  "windows": res.n_windows, "dropped_rows": series.dropped,
                  "warnings": [f"{f.replication}:{f.model}:{f.message}" for f in res.failures]}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog=PROG, description="Long-memory simulation, estimation, forecasting and MCS tools.")
    p.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_default="-"):
        sp.add_argument("--out", default=out_default, help="output CSV path ('-' for stdout)")
        sp.add_argument("--manifest", default=None, help="manifest path (default: next to --out)")

    s = sub.add_parser("simulate", help="simulate a long-memory series")
    s.add_argument("--dgp", choices=DGP_KINDS, required=True)
    s.add_argument("--d", type=float, required=True)
    s.add_argument("--length", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--phi", type=float, default=0.2)
    s.add_argument("--n-units", type=int, default=10_000)
    s.add_argument("--beta-p", type=float, default=1.4)
    s.add_argument("--burn-in", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_simulate)

    for name, helptext, func in (("fit", "fit one model", cmd_fit), ("forecast", "fit and forecast", cmd_forecast)):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--input", required=True)
        s.add_argument("--column", default="value")
        s.add_argument("--model", required=True, help="e.g. FI, 'ARFIMA(1,d,0)', 'ARMA(2,1)', 'AR(22)', HAR(3), I(1)")
        if name == "forecast":
            s.add_argument("--h", type=int, required=True)
        common(s)
        s.set_defaults(func=func)

    s = sub.add_parser("memest", help="estimate the memory parameter")
    s.add_argument("--input", required=True)
    s.add_argument("--column", default="value")
    s.add_argument("--method", choices=("gph", "lw", "mle", "all"), default="all")
    s.add_argument("--bandwidth", type=int, default=None)
    common(s)
    s.set_defaults(func=cmd_memest)

    s = sub.add_parser("mcs", help="Model Confidence Set on a loss panel")
    s.add_argument("--losses", required=True, help="CSV, header = model ids, one row per period")
    s.add_argument("--stat", choices=("range", "sq", "R", "SQ"), default="range")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--blocks", type=int, default=None, help="block length (default ceil(n^(1/3)))")
    s.add_argument("--boot", type=int, default=999)
    s.add_argument("--seed", type=int, default=0)
    common(s)
    s.set_defaults(func=cmd_mcs)

    s = sub.add_parser("experiment", help="Monte Carlo experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--outdir", default=".")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--manifest", default=None)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("rv-study", help="increasing-window study on realized variance")
    s.add_argument("--input", required=True)
    s.add_argument("--config", required=True)
    s.add_argument("--outdir", default=".")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--log", action="store_true", help="model log RV instead of levels")
    s.add_argument("--manifest", default=None)
    s.set_defaults(func=cmd_rv_study)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    print(f"{PROG}: error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, 1)
    started = dt.datetime.now(dt.timezone.utc)
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            outputs, extra = args.func(args)
    except (ConfigError, DataError) as exc:
        return _fail("config" if isinstance(exc, ConfigError) else "data", exc, 1)
    except EstimationError as exc:
        return _fail("estimation", exc, 1)
    except (ValueError, OSError) as exc:
        return _fail("input", exc, 1)
    except Exception as exc:  # anything else is a bug
        return _fail("internal", f"{type(exc).__name__}: {exc}", 2)
    outputs = [o for o in outputs if o]
    main_out = getattr(args, "_manifest_default", None)
    mpath = Path(args.manifest) if args.manifest else (
        Path(main_out) if main_out else _manifest_path(args, outputs[0] if outputs else None, args.command))
    manifest = {
        "subcommand": args.command,
        "argv": argv,
        "version": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "started": started.isoformat(),
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        "elapsed_s": time.perf_counter() - t0,
        "outputs": outputs,
        "warnings": extra.pop("warnings", []) + [str(w.message) for w in caught],
        **extra,
    }
    try:
        mpath.write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")
    except OSError as exc:
        return _fail("input", f"cannot write manifest {mpath}: {exc.strerror or exc}", 1)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
