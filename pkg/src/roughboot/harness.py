"""Monte Carlo size and size-adjusted power experiments for the CLT and LFB
tests on simulated BSS paths."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .bss_sim import GammaKernel, NoSV, VolatilityModel, simulate_bss
from .fgn import HurstIndex, exact_pv_moments
from .inference import CLT, LFB, _decision, bootstrap_quantiles, bootstrap_t_stats, draw_seeds, studentized_statistic
from .powervar import TimeSeries
from .seeding import derive_seed

__all__ = [
    "ExperimentPlan",
    "CellResult",
    "ExperimentTable",
    "run_size_experiment",
    "run_power_experiment",
    "default_workers",
]

THREADS_ENV = "ROUGHBOOT_THREADS"
CSV_COLUMNS = ("n", "method", "rejection_rate", "mc_se", "runtime_ms")


def default_workers() -> int:
    """Worker count from ``ROUGHBOOT_THREADS``, defaulting to 1."""
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return 1


@dataclass(frozen=True)
class ExperimentPlan:
    """One Monte Carlo panel.

    Parameters
    ----------
    vol_model : VolatilityModel
        Volatility specification for the simulated BSS paths.
    alpha_true : float
        Smoothness of the data-generating gamma kernel.
    alpha0 : float
        Hypothesised value under test.
    n_grid : tuple of int
        Sample sizes, each on [0, 1] with spacing 1/n.
    mc_reps : int
        Replications per cell, at least 100.
    B : int
        Bootstrap draws per replication.
    level : float
        Nominal two-sided level.
    master_seed : int
        Root of all derived seeds.
    lam : float
        Kernel decay parameter.
    p : float
        Power-variation order; only 2 is supported.
    """

    vol_model: VolatilityModel = field(default_factory=NoSV)
    alpha_true: float = 0.0
    alpha0: float = 0.0
    n_grid: tuple = (20, 40, 80, 160, 320)
    mc_reps: int = 1000
    B: int = 199
    level: float = 0.05
    master_seed: int = 0
    lam: float = 1.0
    p: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        if self.mc_reps < 100:
            raise ValueError("mc_reps must be at least 100 for a reportable cell")
        if not self.n_grid or min(self.n_grid) < 5:
            raise ValueError("n_grid entries must be >= 5")
        if self.p != 2:
            raise ValueError("only p = 2 is supported")
        GammaKernel(self.alpha_true, self.lam)
        HurstIndex.from_alpha(self.alpha0)
        # validates B against the level
        from .inference import quantile_indices

        quantile_indices(self.B, self.level)


@dataclass(frozen=True)
class CellResult:
    """Rejection rate for one (n, method) cell with its binomial standard error."""

    n: int
    method: str
    rejection_rate: float
    mc_se: float
    runtime_ms: float

    @classmethod
    def from_count(cls, n: int, method: str, rejections: int, reps: int, runtime_ms: float) -> "CellResult":
        r = rejections / reps
        return cls(n, method, r, math.sqrt(r * (1 - r) / reps), runtime_ms)


@dataclass
class ExperimentTable:
    """Cells of a size or power run plus the plan that produced them."""

    cells: list
    plan: ExperimentPlan
    mode: str
    extras: dict = field(default_factory=dict)
    # per n: paired per-replication decisions, {"clt": bool array, "lfb": bool array}
    decisions: dict = field(default_factory=dict, repr=False)

    def rows(self) -> list[dict]:
        return [asdict(c) for c in self.cells]

    def numeric_key(self) -> list[tuple]:
        """Everything except wall-clock timings, for reproducibility checks."""
        return [(c.n, c.method, c.rejection_rate, c.mc_se) for c in self.cells]

    def cell(self, n: int, method: str) -> CellResult:
        for c in self.cells:
            if c.n == n and c.method == method:
                return c
        raise KeyError((n, method))


# ---------------------------------------------------------------------------
# Replications
# ---------------------------------------------------------------------------


def _replicate_chunk(args):
    plan, alpha_true, stream, n, reps = args
    kernel = GammaKernel(alpha_true, plan.lam)
    H0 = HurstIndex.from_alpha(plan.alpha0)
    moments = exact_pv_moments(H0, n, 1.0 / n)
    out = np.empty((len(reps), 6))
    for r, j in enumerate(reps):
        t0 = time.perf_counter()
        path = simulate_bss(kernel, plan.vol_model, n, derive_seed(plan.master_seed, f"{stream}/path/n={n}", j))
        ts = TimeSeries.unit_interval(path.values)
        alpha_hat, vhat, t = studentized_statistic(ts, plan.alpha0)
        t1 = time.perf_counter()
        boot_seed = derive_seed(plan.master_seed, f"{stream}/boot/n={n}", j)
        t_star, _, _, clamped, _ = bootstrap_t_stats(n, H0, moments, draw_seeds(boot_seed, plan.B))
        q_lo, q_hi = bootstrap_quantiles(t_star, plan.level)
        se = math.sqrt(vhat / n)
        lfb_reject = _decision(alpha_hat, se, q_lo, q_hi, plan.alpha0)[2]
        t2 = time.perf_counter()
        out[r] = (t, float(lfb_reject), float(clamped.sum()), (t1 - t0) * 1e3, (t2 - t1) * 1e3, alpha_hat)
    return out


def _run_reps(plan: ExperimentPlan, alpha_true: float, stream: str, n: int, workers: int) -> np.ndarray:
    reps = list(range(plan.mc_reps))
    if workers <= 1:
        return _replicate_chunk((plan, alpha_true, stream, n, reps))
    size = math.ceil(len(reps) / (workers * 4))
    chunks = [reps[i : i + size] for i in range(0, len(reps), size)]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_replicate_chunk, [(plan, alpha_true, stream, n, c) for c in chunks]))
    return np.concatenate(parts, axis=0)


def _size_cells(plan: ExperimentPlan, raw: dict, crit: Optional[dict] = None) -> tuple[list, dict]:
    z = float(stats.norm.ppf(1 - plan.level / 2))
    cells, decisions = [], {}
    for n in plan.n_grid:
        a = raw[n]
        c = z if crit is None else crit[n]
        clt = np.abs(a[:, 0]) > c
        lfb = a[:, 1] > 0
        decisions[n] = {"clt": clt, "lfb": lfb}
        clt_ms = float(a[:, 3].sum())
        cells.append(CellResult.from_count(n, CLT, int(clt.sum()), plan.mc_reps, clt_ms))
        cells.append(CellResult.from_count(n, LFB, int(lfb.sum()), plan.mc_reps, clt_ms + float(a[:, 4].sum())))
    return cells, decisions


def _simulate(plan: ExperimentPlan, alpha_true: float, stream: str, workers: Optional[int]) -> dict:
    w = default_workers() if workers is None else max(1, int(workers))
    return {n: _run_reps(plan, alpha_true, stream, n, w) for n in plan.n_grid}


def run_size_experiment(plan: ExperimentPlan, workers: Optional[int] = None) -> ExperimentTable:
    """Rejection rates under a true null (``alpha_true == alpha0``).

    Both tests are applied to the same simulated path in each replication.
    """
    if plan.alpha_true != plan.alpha0:
        raise ValueError("size experiment requires alpha_true == alpha0")
    raw = _simulate(plan, plan.alpha_true, "size", workers)
    clamped = int(sum(raw[n][:, 2].sum() for n in plan.n_grid))
    cells, decisions = _size_cells(plan, raw)
    return ExperimentTable(cells, plan, "size", {"clamped_draws": clamped}, decisions)


def size_adjusted_critical_value(abs_t: np.ndarray, target_size: float) -> float:
    """Smallest order statistic ``c`` of ``|T|`` with ``mean(|T| > c) == target``."""
    if not 0 < target_size < 1:
        raise ValueError(f"unadjustable: target size {target_size} must lie strictly in (0, 1)")
    a = np.sort(np.asarray(abs_t, dtype=float))
    k = int(round(target_size * a.size))
    return float(a[a.size - k - 1])


def run_power_experiment(plan: ExperimentPlan, workers: Optional[int] = None) -> ExperimentTable:
    """Size-adjusted power.

    Phase 1 simulates under ``alpha0`` on its own seed stream, records the
    bootstrap's empirical size ``s`` and sets the CLT critical value to the
    empirical ``(1 - s)`` quantile of ``|T|``. Phase 2 simulates under
    ``alpha_true``; the CLT uses the adjusted value, the bootstrap its nominal
    percentile-t interval.
    """
    if plan.alpha_true == plan.alpha0:
        raise ValueError("power experiment requires alpha_true != alpha0")
    null = _simulate(plan, plan.alpha0, "adjust", workers)
    crit, sizes = {}, {}
    for n in plan.n_grid:
        s = float(null[n][:, 1].mean())
        sizes[n] = s
        crit[n] = size_adjusted_critical_value(np.abs(null[n][:, 0]), s)
    alt = _simulate(plan, plan.alpha_true, "power", workers)
    cells, decisions = _size_cells(plan, alt, crit)
    clamped = int(sum(alt[n][:, 2].sum() + null[n][:, 2].sum() for n in plan.n_grid))
    extras = {"critical_values": crit, "bootstrap_null_size": sizes, "clamped_draws": clamped}
    return ExperimentTable(cells, plan, "power", extras, decisions)
