"""Acceptance checks at desk scale.

Each test covers one criterion and records a single PASS/FAIL line, printed in
the terminal summary (see conftest.py). Tolerances are the desk-scale ones:
size anchors ±0.03 with 1000 replications and B = 199, power anchors ±0.06.
Run directly with ``python tests/test_acceptance.py``.
"""

import math
import sys

import numpy as np
import pytest
from scipy import stats

from roughboot.bss_sim import GammaKernel, NoSV, _exact_factor, simulate_bss_hybrid
from roughboot.fgn import HurstIndex, exact_pv_moments, simulate_fgn_batch
from roughboot.harness import ExperimentPlan, run_power_experiment, run_size_experiment
from roughboot.inference import TestSpec, bootstrap_t_stats, draw_seeds, lfb_test
from roughboot.powervar import TimeSeries, estimate_alpha
from roughboot.seeding import derive_seed

MASTER_SEED = 0
DESK_REPS, DESK_B = 1000, 199
SIZE_TOL, POWER_TOL = 0.03, 0.06
MANY_WORKERS = 4

RESULTS: dict[int, str] = {}


def record(k: int, title: str, ok: bool, detail: str) -> bool:
    RESULTS[k] = f"CRITERION {k} ({title}): {'PASS' if ok else 'FAIL'} | {detail}"
    print(RESULTS[k])
    return ok


@pytest.fixture(scope="module")
def nosv_null_tables():
    """Full desk-scale NoSV table under alpha = 0, run three times."""
    plan = ExperimentPlan(vol_model=NoSV(), alpha_true=0.0, alpha0=0.0, mc_reps=DESK_REPS, B=DESK_B, master_seed=MASTER_SEED)
    first = run_size_experiment(plan, workers=1)
    second = run_size_experiment(plan, workers=1)
    many = run_size_experiment(plan, workers=MANY_WORKERS)
    return first, second, many


def test_criterion_1_size_anchors(nosv_null_tables):
    table0 = nosv_null_tables[0]
    plan = ExperimentPlan(
        vol_model=NoSV(), alpha_true=-1 / 3, alpha0=-1 / 3, n_grid=(20,), mc_reps=DESK_REPS, B=DESK_B, master_seed=MASTER_SEED
    )
    table13 = run_size_experiment(plan, workers=1)
    anchors = [
        ("a=0 n=20 CLT", table0.cell(20, "CLT"), 0.0968),
        ("a=0 n=20 boot", table0.cell(20, "LFB"), 0.0354),
        ("a=0 n=320 CLT", table0.cell(320, "CLT"), 0.0562),
        ("a=0 n=320 boot", table0.cell(320, "LFB"), 0.0526),
        ("a=-1/3 n=20 boot", table13.cell(20, "LFB"), 0.0470),
    ]
    oks = [abs(c.rejection_rate - ref) <= SIZE_TOL for _, c, ref in anchors]
    detail = "; ".join(f"{name} {c.rejection_rate:.4f} vs {ref}" for name, c, ref in anchors)
    assert record(1, "size anchors, tol 0.03", all(oks), detail)


def test_criterion_2_power_anchors():
    cases = [(-1 / 3, 320, 0.9852), (1 / 3, 80, 0.6212)]
    parts, oks = [], []
    for alpha_true, n, ref in cases:
        plan = ExperimentPlan(
            vol_model=NoSV(), alpha_true=alpha_true, alpha0=0.0, n_grid=(n,), mc_reps=DESK_REPS, B=DESK_B, master_seed=MASTER_SEED
        )
        r = run_power_experiment(plan, workers=1).cell(n, "LFB").rejection_rate
        oks.append(abs(r - ref) <= POWER_TOL)
        parts.append(f"a={alpha_true:+.4f} n={n} boot {r:.4f} vs {ref}")
    assert record(2, "size-adjusted power anchors, tol 0.06", all(oks), "; ".join(parts))


def _mc_moments(H, n, paths):
    delta = 1.0 / n
    inc, _ = simulate_fgn_batch(H, n, delta, [derive_seed(MASTER_SEED, f"c3/{H}/{n}", j) for j in range(paths)])
    x = np.concatenate([np.zeros((paths, 1)), np.cumsum(inc, axis=1)], axis=1)
    v1 = np.sum((x[:, 2:] - 2 * x[:, 1:-1] + x[:, :-2]) ** 2, axis=1)
    v2 = np.sum((x[:, 4:] - 2 * x[:, 2:-2] + x[:, :-4]) ** 2, axis=1)
    c1, c2 = v1 - v1.mean(), v2 - v2.mean()
    out = {}
    for key, a, b in (("varV1", c1, c1), ("varV2", c2, c2), ("covV12", c1, c2)):
        prod = a * b
        # SE of a sample (co)variance: spread of the centred products
        out[key] = (prod.mean(), prod.std(ddof=1) / math.sqrt(paths))
    return out


def test_criterion_3_exact_moment_oracle():
    paths = 10**5
    worst, oks = 0.0, []
    for H in (0.2, 0.5, 0.8):
        for n in (10, 50):
            exact = exact_pv_moments(H, n, 1.0 / n)
            for key, (est, se) in _mc_moments(H, n, paths).items():
                z = abs(est - getattr(exact, key)) / se
                worst = max(worst, z)
                oks.append(z < 3)
    lam = exact_pv_moments(0.5, 10**5, 1e-5).lambda11
    lam_ok = abs(lam - 3) < 0.01
    detail = f"max |MC - exact| / SE = {worst:.2f} over 18 moments (<3); lambda11(H=0.5, n=1e5) = {lam:.6f}"
    assert record(3, "exact-moment oracle", all(oks) and lam_ok, detail)


def test_criterion_4_bootstrap_null_distribution():
    n, draws = 500, 10**4
    parts, oks, clamped_total = [], [], 0
    for H in (0.2, 0.5, 0.8):
        H0 = HurstIndex(H)
        t, _, _, clamped, _ = bootstrap_t_stats(n, H0, exact_pv_moments(H0, n, 1.0 / n), draw_seeds(derive_seed(MASTER_SEED, "c4", int(100 * H)), draws))
        mean, var = float(t.mean()), float(t.var(ddof=1))
        ks = float(stats.kstest(t, "norm").statistic)
        clamped_total += int(np.sum(clamped))
        ok = abs(mean) < 0.03 and 0.9 <= var <= 1.1 and ks < 0.02
        oks.append(ok)
        parts.append(f"H={H}: mean {mean:+.4f} var {var:.4f} KS {ks:.4f}{'' if ok else ' (out)'}")
    parts.append(f"clamped draws {clamped_total}/{3 * draws}")
    assert record(4, "bootstrap null distribution", all(oks), "; ".join(parts))


def test_criterion_5_estimator_consistency():
    n, paths = 10**4, 200
    parts, oks = [], []
    for alpha in (-1 / 3, -1 / 6, 0.0, 1 / 6, 1 / 3):
        inc, _ = simulate_fgn_batch(alpha + 0.5, n, 1.0 / n, [derive_seed(MASTER_SEED, f"c5/{alpha}", j) for j in range(paths)])
        x = np.concatenate([np.zeros((paths, 1)), np.cumsum(inc, axis=1)], axis=1)
        m = float(np.mean([estimate_alpha(TimeSeries.unit_interval(p), alpha_for_variance=alpha).alpha_hat for p in x]))
        oks.append(abs(m - alpha) < 0.02)
        parts.append(f"a={alpha:+.4f}: {m:+.4f}")
    assert record(5, "estimator consistency, tol 0.02", all(oks), "; ".join(parts))


def test_criterion_6_hybrid_fidelity():
    n, paths = 200, 10**4
    parts, oks = [], []
    for alpha in (-1 / 3, 1 / 3):
        k = GammaKernel(alpha, 1.0)
        x1 = np.array([simulate_bss_hybrid(k, NoSV(), n, seed=derive_seed(MASTER_SEED, "c6", j)).values[-1] for j in range(paths)])
        exact_sd = float(np.linalg.norm(_exact_factor(alpha, 1.0, n)[-1]))
        rel = float(x1.std(ddof=1) / exact_sd - 1)
        oks.append(abs(rel) < 0.02)
        parts.append(f"a={alpha:+.4f}: hybrid sd {x1.std(ddof=1):.5f} vs exact {exact_sd:.5f} ({100 * rel:+.2f}%)")
    assert record(6, "hybrid-scheme fidelity, tol 2%", all(oks), "; ".join(parts))


def test_criterion_7_data_cancellation():
    n = 250
    rng = np.random.default_rng(MASTER_SEED)
    a = TimeSeries.unit_interval(np.cumsum(rng.standard_normal(n + 1)))
    b = TimeSeries.unit_interval(np.exp(rng.standard_normal(n + 1)) * 1e3)
    spec = TestSpec(alpha0=-0.1667, B=DESK_B, seed=derive_seed(MASTER_SEED, "c7"))
    ra, rb = lfb_test(a, spec), lfb_test(b, spec)
    ok = ra.quantiles == rb.quantiles and ra.alpha_hat != rb.alpha_hat
    detail = f"quantiles {ra.quantiles} vs {rb.quantiles}; alpha_hat {ra.alpha_hat:.4f} vs {rb.alpha_hat:.4f}"
    assert record(7, "data-cancellation, bitwise quantiles", ok, detail)


def test_criterion_8_determinism(nosv_null_tables):
    first, second, many = nosv_null_tables
    same_runs = first.numeric_key() == second.numeric_key()
    same_workers = first.numeric_key() == many.numeric_key()
    same_decisions = all(
        np.array_equal(first.decisions[n][m], many.decisions[n][m]) for n in first.plan.n_grid for m in ("clt", "lfb")
    )
    ok = same_runs and same_workers and same_decisions
    detail = (
        f"{len(first.cells)} cells x {DESK_REPS} reps, B={DESK_B}; run-to-run identical: {same_runs}; "
        f"1 vs {MANY_WORKERS} workers identical: {same_workers and same_decisions}"
    )
    assert record(8, "determinism", ok, detail)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
