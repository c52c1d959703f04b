"""Second-order-difference power variations and the change-of-frequency
(COF) estimator of the roughness index."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fgn import HurstIndex, LambdaMatrix, gaussian_abs_moment, lambda_asymptotic, tau_squared

__all__ = [
    "DegenerateSeriesError",
    "TimeSeries",
    "PowerVariationSet",
    "RoughnessEstimate",
    "second_differences",
    "power_variation",
    "power_variations",
    "tau_n",
    "cof",
    "h_p",
    "estimate_alpha",
    "clt_variance",
]

# keeps Λ evaluable when a plug-in estimate lands outside (-1/2, 1/2)
ALPHA_CLIP = 0.49


class DegenerateSeriesError(ValueError):
    """Second differences vanish, so the COF ratio is undefined."""


@dataclass(frozen=True)
class TimeSeries:
    values: np.ndarray
    delta: float
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def unit_interval(cls, values, label: str = "") -> "TimeSeries":
        """Series observed on [0, 1], so ``delta = 1/n``."""
        v = np.asarray(values, dtype=float)
        return cls(v, 1.0 / (v.size - 1), label)

    @property
    def n(self) -> int:
        return self.values.size - 1


@dataclass(frozen=True)
class PowerVariationSet:
    p: float
    v1: float
    v2: float
    v2p1: float
    n: int
    delta: float


@dataclass(frozen=True)
class RoughnessEstimate:
    alpha_hat: float
    cof: float
    var_hat: Optional[float]
    pv: PowerVariationSet
    lambda_: Optional[LambdaMatrix]

    @property
    def std_error(self) -> Optional[float]:
        if self.var_hat is None:
            return None
        return math.sqrt(self.var_hat / self.pv.n)


def second_differences(x, v: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[2 * v:] - 2.0 * x[v:-v] + x[: -2 * v]


def _values(ts) -> np.ndarray:
    return ts.values if isinstance(ts, TimeSeries) else np.asarray(ts, dtype=float)


def power_variation(ts, p: float, v: int) -> float:
    """``sum_{i=2v}^{n} |X_i - 2 X_{i-v} + X_{i-2v}|^p`` (``n - 2v + 1`` terms)."""
    if v not in (1, 2):
        raise ValueError("lag must be 1 or 2")
    if p < 1:
        raise ValueError("p must be >= 1")
    x = _values(ts)
    if x.size - 1 < 2 * v:
        raise ValueError(f"series too short for lag {v}: need at least {2 * v + 1} observations")
    d = np.abs(second_differences(x, v))
    if p == 2:
        return float(np.dot(d, d))
    return float(np.sum(d**p))


def power_variations(ts: TimeSeries, p: float = 2.0) -> PowerVariationSet:
    return PowerVariationSet(
        p=float(p),
        v1=power_variation(ts, p, 1),
        v2=power_variation(ts, p, 2),
        v2p1=power_variation(ts, 2 * p, 1),
        n=ts.n,
        delta=ts.delta,
    )


def tau_n(H, delta: float, v: int) -> float:
    """Standard deviation of a lag-``v`` second difference of fBm."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    return math.sqrt(tau_squared(H, delta, v))


def cof(ts, p: float) -> float:
    """Change-of-frequency ratio ``V(X;p,2) / V(X;p,1)``."""
    den = power_variation(ts, p, 1)
    if den <= 0:
        raise DegenerateSeriesError("degenerate series: lag-1 second differences vanish")
    return power_variation(ts, p, 2) / den


def h_p(x: float, p: float) -> float:
    if x <= 0:
        raise DegenerateSeriesError(f"COF must be positive, got {x!r}")
    return math.log2(x) / p - 0.5


def clt_variance(pv: PowerVariationSet, lam: LambdaMatrix) -> float:
    """Plug-in asymptotic variance of ``sqrt(n) (alpha_hat - alpha)``.

    ``n m_4^{-1} V(X;4,1) (-1,1) Λ (-1,1)^T / (2 log 2 V(X;2,1))^2``.
    """
    if pv.p != 2:
        raise ValueError("asymptotic variance known only for p = 2")
    if pv.v1 <= 0:
        raise DegenerateSeriesError("degenerate series: lag-1 second differences vanish")
    q = max(lam.quadratic_form(), 0.0)
    m4 = gaussian_abs_moment(4)
    return pv.n * pv.v2p1 / m4 * q / (2.0 * math.log(2.0) * pv.v1) ** 2


def lambda_at(alpha: float) -> LambdaMatrix:
    a = min(max(alpha, -ALPHA_CLIP), ALPHA_CLIP)
    return lambda_asymptotic(HurstIndex(a + 0.5))


def estimate_alpha(ts: TimeSeries, p: float = 2.0, alpha_for_variance: Optional[float] = None) -> RoughnessEstimate:
    """COF estimate of the roughness index.

    The variance is filled in for ``p = 2`` only, with Λ evaluated at
    ``alpha_for_variance`` (default: the estimate itself, clipped to
    ``[-0.49, 0.49]``).
    """
    pv = power_variations(ts, p)
    if pv.v1 <= 0:
        raise DegenerateSeriesError("degenerate series: lag-1 second differences vanish")
    ratio = pv.v2 / pv.v1
    alpha_hat = h_p(ratio, p)
    lam = var_hat = None
    if p == 2:
        lam = lambda_at(alpha_hat if alpha_for_variance is None else alpha_for_variance)
        var_hat = clt_variance(pv, lam)
    return RoughnessEstimate(alpha_hat=alpha_hat, cof=ratio, var_hat=var_hat, pv=pv, lambda_=lam)
