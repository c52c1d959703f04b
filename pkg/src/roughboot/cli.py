"""Command-line interface: ``simulate``, ``estimate``, ``test`` and ``montecarlo``.

Exit codes: 0 success, 2 usage or validation error, 3 data error, 4 numerical
failure. Numbers are written with 17 significant digits in CSV output; JSON
uses the shortest repr that round-trips to the same double.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bss_sim import GammaKernel, NoSV, simulate_bss, volatility_model
from .harness import CSV_COLUMNS, ExperimentPlan, default_workers, run_power_experiment, run_size_experiment
from .inference import CLT, LFB, TestSpec, clt_test, lfb_test, quantile_indices
from .powervar import DegenerateSeriesError, TimeSeries, estimate_alpha
from .seeding import derive_seed, entropy_seed

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
MIN_ROWS = 6
EQUIDISTANCE_RTOL = 1e-9


class UsageError(Exception):
    """Bad arguments or parameter combinations (exit 2)."""


class DataError(Exception):
    """Unreadable, too short or degenerate input (exit 3)."""


class NumericalError(Exception):
    """Non-finite output or a failed factorisation (exit 4)."""


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class RunManifest:
    """Provenance record written next to every output."""

    command: str
    parameters: dict
    master_seed: int
    seed_source: str
    library_version: str = __version__
    started_at: str = field(default_factory=_now)
    finished_at: Optional[str] = None

    def finish(self) -> "RunManifest":
        self.finished_at = _now()
        return self

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# I/O helpers
# ---------------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    """Write to a temporary sibling, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        atomic_write(Path(out), text)
    else:
        sys.stdout.write(text)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def read_series(path: Path, delta: Optional[float] = None, log: bool = False) -> TimeSeries:
    """Load a one-column (values) or multi-column (``t,value[,...]``) CSV."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read {path}: {e}") from None
    if not rows:
        raise DataError(f"{path}: empty file")
    header = None
    if not all(_is_number(c) for c in rows[0]):
        header = [c.strip().lower() for c in rows[0]]
        rows = rows[1:]
    ncol = len(rows[0]) if rows else 0
    if any(len(r) != ncol for r in rows):
        raise DataError(f"{path}: ragged rows")
    if len(rows) < MIN_ROWS:
        raise DataError(f"{path}: need at least {MIN_ROWS} rows, got {len(rows)}")
    try:
        table = np.array([[float(c) for c in r] for r in rows])
    except ValueError as e:
        raise DataError(f"{path}: non-numeric entry ({e})") from None
    if ncol == 1:
        values, t = table[:, 0], None
    else:
        ti, vi = 0, 1
        if header is not None and "t" in header and "value" in header:
            ti, vi = header.index("t"), header.index("value")
        t, values = table[:, ti], table[:, vi]
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values")
    if t is not None:
        d = np.diff(t)
        step = (t[-1] - t[0]) / (t.size - 1)
        if not (step > 0 and np.all(np.abs(d - step) <= EQUIDISTANCE_RTOL * step)):
            raise DataError(f"{path}: timestamps are not equidistant (relative tolerance {EQUIDISTANCE_RTOL:g})")
        if delta is None:
            delta = float(step)
    if log:
        if np.any(values <= 0):
            raise DataError(f"{path}: --log requires positive values")
        values = np.log(values)
    if delta is None:
        delta = 1.0 / (values.size - 1)
    return TimeSeries(values, delta, label=Path(path).name)


def _input_files(spec: str) -> tuple[list[Path], bool]:
    p = Path(spec)
    if p.is_dir():
        files = sorted(f for f in p.iterdir() if f.suffix.lower() == ".csv" and f.is_file())
        if not files:
            raise DataError(f"{p}: no .csv files")
        return files, True
    if not p.exists():
        raise DataError(f"{p}: no such file")
    return [p], False


def _resolve_seed(seed: Optional[int]) -> tuple[int, str]:
    if seed is None:
        return entropy_seed(), "entropy"
    return seed, "flag"


def _check_finite(record: dict) -> dict:
    for k in ("alpha_hat", "statistic"):
        if k in record and not math.isfinite(record[k]):
            raise NumericalError(f"non-finite {k} for {record.get('series')}")
    return record


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    """Write ``path_00000.csv`` ... with columns t, value, sigma plus a manifest."""
    if not -0.5 < args.alpha < 0.5:
        raise UsageError(f"--alpha must lie in the open interval (-0.5, 0.5), got {args.alpha}")
    if args.n < 5:
        raise UsageError("--n must be >= 5")
    if args.paths < 1:
        raise UsageError("--paths must be >= 1")
    if args.__dict__["lambda"] <= 0:
        raise UsageError("--lambda must be positive")
    model = volatility_model(args.vol)
    scheme = args.scheme or ("exact" if isinstance(model, NoSV) else "hybrid")
    if scheme == "exact" and not isinstance(model, NoSV):
        raise UsageError("--scheme exact requires --vol nosv")
    seed, source = _resolve_seed(args.seed)
    manifest = RunManifest("simulate", _params(args), seed, source)
    kernel = GammaKernel(args.alpha, args.__dict__["lambda"])
    out = Path(args.out)
    width = max(5, len(str(args.paths - 1)))
    files = []
    for i in range(args.paths):
        path = simulate_bss(kernel, model, args.n, derive_seed(seed, "simulate", i), scheme=scheme)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "value", "sigma"])
        for t, x, s in zip(path.times, path.values, path.volatility):
            w.writerow([fmt(t), fmt(x), fmt(s)])
        name = f"path_{i:0{width}d}.csv"
        atomic_write(out / name, buf.getvalue())
        files.append(name)
    m = manifest.finish().to_dict()
    m["files"] = files
    atomic_write(out / "manifest.json", _json(m))
    return EXIT_OK


def cmd_estimate(args) -> int:
    """COF estimate with its asymptotic variance and standard error."""
    files, _ = _input_files(args.input)
    manifest = RunManifest("estimate", _params(args), 0, "none")
    records = []
    for f in files:
        ts = read_series(f, args.delta, args.log)
        est = estimate_alpha(ts, args.p)
        records.append(
            _check_finite(
                {
                    "series": ts.label,
                    "n": ts.n,
                    "delta": ts.delta,
                    "alpha_hat": est.alpha_hat,
                    "cof": est.cof,
                    "var_hat": est.var_hat,
                    "std_error": est.std_error,
                }
            )
        )
    _emit(_json({"manifest": manifest.finish().to_dict(), "records": records}), args.out)
    return EXIT_OK


def _test_one(job) -> list[dict]:
    path, delta, log, alpha0, methods, level, B, seed = job
    ts = read_series(path, delta, log)
    out = []
    for method in methods:
        spec = TestSpec(alpha0=alpha0, level=level, B=B, seed=seed, method=method)
        res = clt_test(ts, spec) if method == CLT else lfb_test(ts, spec)
        out.append(
            _check_finite(
                {
                    "series": ts.label,
                    "n": res.n,
                    "alpha_hat": res.alpha_hat,
                    "method": method.lower(),
                    "statistic": res.statistic,
                    "ci": [res.ci_low, res.ci_high],
                    "reject": bool(res.reject),
                    "B": res.B_used,
                    "seed": res.seed,
                    "diagnostics": res.diagnostics,
                }
            )
        )
    return out


def cmd_test(args) -> int:
    """Single-series test, or batch mode over a directory with per-series seeds."""
    if not -0.5 < args.alpha0 < 0.5:
        raise UsageError(f"--alpha0 must lie in the open interval (-0.5, 0.5), got {args.alpha0}")
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    methods = {"clt": [CLT], "lfb": [LFB], "both": [CLT, LFB]}[args.method]
    if LFB in methods:
        try:
            quantile_indices(args.B, args.level)
        except ValueError as e:
            raise UsageError(str(e)) from None
    files, batch = _input_files(args.input)
    seed, source = _resolve_seed(args.seed)
    manifest = RunManifest("test", _params(args), seed, source)
    seeds = [derive_seed(seed, "series", i) for i in range(len(files))] if batch else [seed]
    jobs = [(f, args.delta, args.log, args.alpha0, methods, args.level, args.B, s) for f, s in zip(files, seeds)]
    workers = default_workers() if args.workers is None else args.workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            per_series = list(ex.map(_test_one, jobs))
    else:
        per_series = [_test_one(j) for j in jobs]
    records = [r for rs in per_series for r in rs]
    doc = {"manifest": None, "records": records}
    if batch:
        doc["aggregate"] = [
            {
                "method": m.lower(),
                "num_series": len(files),
                "rejection_rate": sum(r["reject"] for r in records if r["method"] == m.lower()) / len(files),
            }
            for m in methods
        ]
    doc["manifest"] = manifest.finish().to_dict()
    _emit(_json(doc), args.out)
    return EXIT_OK


def _parse_grid(s: str) -> tuple[int, ...]:
    try:
        grid = tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--n-grid must be comma-separated integers, got {s!r}") from None
    if not grid:
        raise UsageError("--n-grid is empty")
    return grid


def cmd_montecarlo(args) -> int:
    """Size or size-adjusted power table as CSV, with a JSON manifest alongside."""
    if args.mode == "size" and args.alpha_true != args.alpha0:
        raise UsageError("--mode size requires --alpha-true equal to --alpha0")
    if args.mode == "power" and args.alpha_true == args.alpha0:
        raise UsageError("--mode power requires --alpha-true different from --alpha0")
    seed, source = _resolve_seed(args.seed)
    try:
        plan = ExperimentPlan(
            vol_model=volatility_model(args.panel),
            alpha_true=args.alpha_true,
            alpha0=args.alpha0,
            n_grid=_parse_grid(args.n_grid),
            mc_reps=args.reps,
            B=args.B,
            level=args.level,
            master_seed=seed,
            lam=args.__dict__["lambda"],
        )
    except ValueError as e:
        raise UsageError(str(e)) from None
    manifest = RunManifest("montecarlo", _params(args), seed, source)
    run = run_size_experiment if args.mode == "size" else run_power_experiment
    table = run(plan, workers=args.workers)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in table.cells:
        w.writerow([c.n, c.method, fmt(c.rejection_rate), fmt(c.mc_se), fmt(c.runtime_ms)])
    extras = {k: ({str(n): v for n, v in val.items()} if isinstance(val, dict) else val) for k, val in table.extras.items()}
    doc = {"manifest": manifest.finish().to_dict(), "rows": table.rows(), "extras": extras}
    if args.out:
        out = Path(args.out)
        atomic_write(out, buf.getvalue())
        atomic_write(out.with_suffix(".json"), _json(doc))
    else:
        sys.stdout.write(buf.getvalue())
        sys.stderr.write(_json(doc["manifest"]))
    return EXIT_OK


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roughboot", description="Roughness estimation and bootstrap tests for BSS processes.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate BSS paths to CSV")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--lambda", type=float, default=1.0)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--paths", type=int, default=1)
    s.add_argument("--vol", choices=["nosv", "sv1f", "sv2f"], default="nosv")
    s.add_argument("--scheme", choices=["hybrid", "exact"], default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    def add_input(q):
        q.add_argument("--input", required=True, help="CSV file, or directory of CSV files for batch mode")
        q.add_argument("--delta", type=float, default=None, help="sampling interval for one-column input (default 1/n)")
        q.add_argument("--log", action="store_true", help="take natural logs of the values first")
        q.add_argument("--out", default=None, help="output JSON path (default stdout)")

    e = sub.add_parser("estimate", help="COF estimate of alpha")
    add_input(e)
    e.add_argument("--p", type=float, default=2.0)
    e.set_defaults(func=cmd_estimate)

    t = sub.add_parser("test", help="test H0: alpha = alpha0")
    add_input(t)
    t.add_argument("--alpha0", type=float, required=True)
    t.add_argument("--method", choices=["clt", "lfb", "both"], default="both")
    t.add_argument("--level", type=float, default=0.05)
    t.add_argument("--B", type=int, default=999)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--workers", type=int, default=None)
    t.set_defaults(func=cmd_test)

    m = sub.add_parser("montecarlo", help="size or size-adjusted power table")
    m.add_argument("--panel", choices=["nosv", "sv1f", "sv2f"], default="nosv")
    m.add_argument("--alpha-true", type=float, required=True)
    m.add_argument("--alpha0", type=float, required=True)
    m.add_argument("--mode", choices=["size", "power"], default="size")
    m.add_argument("--reps", type=int, default=1000)
    m.add_argument("--B", type=int, default=199)
    m.add_argument("--n-grid", default="20,40,80,160,320")
    m.add_argument("--level", type=float, default=0.05)
    m.add_argument("--lambda", type=float, default=1.0)
    m.add_argument("--seed", type=int, default=None)
    m.add_argument("--workers", type=int, default=None)
    m.add_argument("--out", default=None, help="CSV path; the manifest goes next to it as .json")
    m.set_defaults(func=cmd_montecarlo)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DegenerateSeriesError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError, OverflowError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
