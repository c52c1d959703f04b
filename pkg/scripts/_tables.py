"""Shared driver for the size and power table scripts."""

import argparse
import csv
import time
from pathlib import Path

from roughboot.bss_sim import volatility_model
from roughboot.harness import CSV_COLUMNS, ExperimentPlan, run_power_experiment, run_size_experiment

PANELS = ("nosv", "sv1f", "sv2f")


def parse_args(description: str) -> argparse.Namespace:
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--panels", default=",".join(PANELS))
    ap.add_argument("--reps", type=int, default=1000, help="5000 for full scale")
    ap.add_argument("--B", type=int, default=199, help="999 for full scale")
    ap.add_argument("--n-grid", default="20,40,80,160,320")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--out", default="results", help="output directory for per-panel CSVs")
    return ap.parse_args()


def run(mode: str, alphas: tuple, args: argparse.Namespace) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n_grid = tuple(int(n) for n in args.n_grid.split(","))
    runner = run_size_experiment if mode == "size" else run_power_experiment
    for panel in args.panels.split(","):
        grid = {}
        for a in alphas:
            plan = ExperimentPlan(
                vol_model=volatility_model(panel),
                alpha_true=a,
                alpha0=a if mode == "size" else 0.0,
                n_grid=n_grid,
                mc_reps=args.reps,
                B=args.B,
                master_seed=args.seed,
            )
            t0 = time.perf_counter()
            table = runner(plan, workers=args.workers)
            print(f"# {panel} alpha={a:+.4f} done in {time.perf_counter() - t0:.1f}s", flush=True)
            grid[a] = table
            with open(out / f"{mode}_{panel}_alpha{a:+.4f}.csv", "w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
                w.writeheader()
                w.writerows(table.rows())
        print(f"\n{mode} rejection rates, panel {panel} ({args.reps} reps, B={args.B})")
        print("n".rjust(5) + "".join(f"{f'a={a:+.3f}':>18}" for a in alphas))
        print(" " * 5 + "".join(f"{'CLT':>9}{'boot':>9}" for _ in alphas))
        for n in n_grid:
            cells = "".join(f"{grid[a].cell(n, 'CLT').rejection_rate:9.4f}{grid[a].cell(n, 'LFB').rejection_rate:9.4f}" for a in alphas)
            print(f"{n:5d}{cells}")
