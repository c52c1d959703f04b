"""Tests of ``H0: alpha = alpha0``: the asymptotic (CLT) test and the local
fractional bootstrap (LFB) percentile-t test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .fgn import HurstIndex, SecondDiffMoments, exact_pv_moments, simulate_fgn_batch
from .powervar import DegenerateSeriesError, TimeSeries, estimate_alpha
from .seeding import derive_seed

__all__ = [
    "TestSpec",
    "BootstrapDraw",
    "TestResult",
    "clt_test",
    "lfb_bootstrap_draw",
    "lfb_test",
    "bootstrap_quantiles",
    "quantile_indices",
    "bootstrap_t_stats",
    "studentized_statistic",
    "draw_seeds",
]

CLT, LFB = "CLT", "LFB"
_LOG2 = math.log(2.0)
_CHUNK_ELEMS = 1 << 20


def quantile_indices(B: int, gamma: float) -> tuple[int, int]:
    """1-based order-statistic indices ``ceil(γ/2 (B+1))`` and ``ceil((1-γ/2)(B+1))``."""
    lo = math.ceil(round(gamma / 2 * (B + 1), 9))
    hi = math.ceil(round((1 - gamma / 2) * (B + 1), 9))
    if lo < 1 or hi > B:
        raise ValueError(f"B too small for requested level: B={B}, level={gamma}")
    return lo, hi


@dataclass(frozen=True)
class TestSpec:
    __test__ = False  # not a pytest class

    alpha0: float
    level: float = 0.05
    p: float = 2.0
    B: int = 999
    seed: int = 0
    method: str = LFB

    def __post_init__(self):
        if not (-0.5 < self.alpha0 < 0.5):
            raise ValueError(f"alpha0 must lie in (-1/2, 1/2), got {self.alpha0!r}")
        if not (0 < self.level < 1):
            raise ValueError("level must lie in (0, 1)")
        if self.p != 2:
            raise ValueError("tests are implemented for p = 2 only")
        if self.method not in (CLT, LFB):
            raise ValueError(f"method must be {CLT!r} or {LFB!r}")
        if self.method == LFB:
            if self.B < 19:
                raise ValueError("B must be at least 19")
            quantile_indices(self.B, self.level)

    @property
    def hurst0(self) -> HurstIndex:
        return HurstIndex.from_alpha(self.alpha0)


@dataclass(frozen=True)
class BootstrapDraw:
    t_star: float
    alpha_star: float
    vhat_star: float
    fallback_flag: bool = False


@dataclass
class TestResult:
    __test__ = False

    method: str
    alpha_hat: float
    alpha0: float
    statistic: float
    ci_low: float
    ci_high: float
    quantiles: tuple[float, float]
    reject: bool
    B_used: int
    n: int
    seed: Optional[int] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["quantiles"] = list(self.quantiles)
        return d


def studentized_statistic(ts: TimeSeries, alpha0: float) -> tuple[float, float, float]:
    """Step-1 quantities under the null: ``(alpha_hat, vhat, statistic)``.

    ``vhat`` uses Λ at ``H = alpha0 + 1/2``; the statistic is
    ``(alpha_hat - alpha0) / sqrt(vhat / n)``.
    """
    est = estimate_alpha(ts, 2.0, alpha_for_variance=alpha0)
    vhat = est.var_hat
    if not vhat > 0:
        raise DegenerateSeriesError("degenerate series: zero variance estimate")
    t = (est.alpha_hat - alpha0) / math.sqrt(vhat / ts.n)
    return est.alpha_hat, vhat, t


def _decision(alpha_hat: float, se: float, q_lo: float, q_hi: float, alpha0: float):
    lo = alpha_hat - q_hi * se
    hi = alpha_hat - q_lo * se
    return lo, hi, not (lo <= alpha0 <= hi)


def clt_test(ts: TimeSeries, spec: TestSpec) -> TestResult:
    """Asymptotic test; rejects iff ``|statistic| > z_{1-γ/2}``.

    The reported interval inverts the null-studentized statistic, so
    ``reject`` equals ``alpha0`` falling outside it. The plug-in interval
    with Λ at the estimate is reported under ``diagnostics["ci_plugin"]``.
    """
    if ts.n < 5:
        raise ValueError("need at least 6 observations")
    alpha_hat, vhat, t = studentized_statistic(ts, spec.alpha0)
    z = float(stats.norm.ppf(1 - spec.level / 2))
    se = math.sqrt(vhat / ts.n)
    lo, hi, reject = _decision(alpha_hat, se, -z, z, spec.alpha0)
    plug = estimate_alpha(ts, 2.0)
    se_plug = math.sqrt(plug.var_hat / ts.n)
    return TestResult(
        method=CLT,
        alpha_hat=alpha_hat,
        alpha0=spec.alpha0,
        statistic=t,
        ci_low=lo,
        ci_high=hi,
        quantiles=(-z, z),
        reject=reject,
        B_used=0,
        n=ts.n,
        seed=None,
        diagnostics={
            "vhat": vhat,
            "ci_plugin": [alpha_hat - z * se_plug, alpha_hat + z * se_plug],
            "alpha_clipped": abs(alpha_hat) > 0.49,
        },
    )


def bootstrap_t_stats(n: int, H0: HurstIndex, moments: SecondDiffMoments, seeds: Sequence[int]):
    """Vectorised bootstrap draws for the given per-draw seeds.

    Returns ``(t_star, alpha_diff, vhat_star, clamped, method)`` with one entry
    per seed; ``alpha_diff`` is ``alpha_star - alpha_tilde``.
    """
    delta = moments.delta
    seeds = list(seeds)
    V1 = np.empty(len(seeds))
    V2 = np.empty(len(seeds))
    method = "circulant"
    chunk = max(1, _CHUNK_ELEMS // (n + 1))
    for s in range(0, len(seeds), chunk):
        inc, method = simulate_fgn_batch(H0, n, delta, seeds[s : s + chunk])
        path = np.zeros((inc.shape[0], n + 1))
        np.cumsum(inc, axis=1, out=path[:, 1:])
        d1 = path[:, 2:] - 2.0 * path[:, 1:-1] + path[:, :-2]
        d2 = path[:, 4:] - 2.0 * path[:, 2:-2] + path[:, :-4]
        V1[s : s + chunk] = np.einsum("ij,ij->i", d1, d1)
        V2[s : s + chunk] = np.einsum("ij,ij->i", d2, d2)
    mu1, mu2 = moments.mu1, moments.mu2
    # data factor of COF* cancels against alpha_tilde
    alpha_diff = 0.5 * np.log2((mu1 / mu2) * (V2 / V1))
    A = V1**2 * moments.varV1 / (delta * mu1**4)
    B = V2**2 * moments.varV2 / (delta * mu2**4)
    C = -2.0 * V1 * V2 * moments.covV12 / (delta * mu1**2 * mu2**2)
    s = A + B + C
    clamped = ~(s > 0)
    s = np.where(clamped, 1e-15 * (A + B), s)
    vhat = s / (2.0 * _LOG2) ** 2
    t_star = alpha_diff / np.sqrt(delta * vhat)
    return t_star, alpha_diff, vhat, clamped, method


def _null_moments(n: int, H0: HurstIndex) -> SecondDiffMoments:
    # internal grid on [0, 1]
    return exact_pv_moments(H0, n, 1.0 / n)


def lfb_bootstrap_draw(n: int, delta: float, H0: HurstIndex, moments: SecondDiffMoments, seed_j: int) -> BootstrapDraw:
    """One bootstrap replication (simulate fBm under the null, studentize)."""
    if moments.n != n or moments.hurst != H0 or moments.delta != delta:
        raise ValueError("moments were computed for a different (H0, n, delta)")
    t, diff, vhat, clamped, _ = bootstrap_t_stats(n, H0, moments, [seed_j])
    return BootstrapDraw(
        t_star=float(t[0]),
        alpha_star=float(diff[0]),
        vhat_star=float(vhat[0]),
        fallback_flag=bool(clamped[0]),
    )


def bootstrap_quantiles(draws, gamma: float) -> tuple[float, float]:
    """Order-statistic quantiles ``(q*_{γ/2}, q*_{1-γ/2})`` of the draws."""
    vals = np.sort(np.asarray([d.t_star if isinstance(d, BootstrapDraw) else d for d in draws], dtype=float))
    lo, hi = quantile_indices(vals.size, gamma)
    return float(vals[lo - 1]), float(vals[hi - 1])


def draw_seeds(master_seed: int, B: int) -> list[int]:
    return [derive_seed(master_seed, "lfb", j) for j in range(B)]


def lfb_test(ts: TimeSeries, spec: TestSpec) -> TestResult:
    """Local fractional bootstrap percentile-t test.

    The bootstrap statistics depend only on ``(n, alpha0, seed, B)``; the
    observed series enters through the estimate and its null-imposed
    variance.
    """
    if ts.n < 5:
        raise ValueError("need at least 6 observations")
    quantile_indices(spec.B, spec.level)
    alpha_hat, vhat, t = studentized_statistic(ts, spec.alpha0)
    H0 = spec.hurst0
    moments = _null_moments(ts.n, H0)
    t_star, _, _, clamped, method = bootstrap_t_stats(ts.n, H0, moments, draw_seeds(spec.seed, spec.B))
    q_lo, q_hi = bootstrap_quantiles(t_star, spec.level)
    se = math.sqrt(vhat / ts.n)
    lo, hi, reject = _decision(alpha_hat, se, q_lo, q_hi, spec.alpha0)
    return TestResult(
        method=LFB,
        alpha_hat=alpha_hat,
        alpha0=spec.alpha0,
        statistic=t,
        ci_low=lo,
        ci_high=hi,
        quantiles=(q_lo, q_hi),
        reject=reject,
        B_used=spec.B,
        n=ts.n,
        seed=spec.seed,
        diagnostics={"vhat": vhat, "clamped": int(clamped.sum()), "fbm_method": method},
    )
