"""Fractional Gaussian machinery.

Covariances of fractional Gaussian noise and of second-order differences of
fractional Brownian motion, an exact fBm sampler (circulant embedding with a
Cholesky fallback), and the exact first and second moments of the lag-1/lag-2
quadratic variations of fBm that both tests need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np
from scipy import linalg, special


__all__ = [
    "HurstIndex",
    "FbmPath",
    "SecondDiffMoments",
    "LambdaMatrix",
    "fgn_autocovariance",
    "second_diff_covariance",
    "rho_second_diff",
    "simulate_fbm",
    "simulate_fgn_batch",
    "gaussian_abs_moment",
    "pv_mean",
    "tau_squared",
    "exact_pv_moments",
    "lambda_asymptotic",
]


@dataclass(frozen=True)
class HurstIndex:
    H: float

    def __post_init__(self):
        if not (0.0 < float(self.H) < 1.0) or not math.isfinite(self.H):
            raise ValueError(f"Hurst index must lie in (0, 1), got {self.H!r}")
        object.__setattr__(self, "H", float(self.H))

    @classmethod
    def from_alpha(cls, alpha: float) -> "HurstIndex":
        if not (-0.5 < alpha < 0.5):
            raise ValueError(f"roughness index must lie in (-1/2, 1/2), got {alpha!r}")
        return cls(alpha + 0.5)

    @property
    def alpha(self) -> float:
        return self.H - 0.5

    def __float__(self) -> float:
        return self.H


HurstLike = Union[HurstIndex, float]


def _h(H: HurstLike) -> float:
    if isinstance(H, HurstIndex):
        return H.H
    return HurstIndex(float(H)).H


# ---------------------------------------------------------------------------
# Finite differences of |x|^a, evaluated without catastrophic cancellation
# ---------------------------------------------------------------------------

_SERIES_TERMS = 64


@lru_cache(maxsize=None)
def _stencil(offsets: tuple, weights: tuple):
    """Integer stencil plus the order of its first non-vanishing moment."""
    first = 0
    while first < 16 and sum(w * o**first for o, w in zip(offsets, weights)) == 0:
        first += 1
    reach = max(abs(o) for o in offsets)
    return np.asarray(offsets, dtype=float), np.asarray(weights, dtype=float), first, reach


def _power_stencil(h, offsets: tuple, weights: tuple, a: float) -> np.ndarray:
    """Return ``sum_j w_j |h + o_j|^a`` for integer-valued ``h``.

    For ``|h|`` well beyond the stencil reach the direct sum cancels down to
    roughly ``|h|^(a - k)`` (``k`` vanishing moments), so it is replaced by the
    binomial expansion started at the first non-vanishing moment.
    """
    off, w, first, reach = _stencil(tuple(offsets), tuple(weights))
    h = np.asarray(h, dtype=float)
    scalar = h.ndim == 0
    h = np.atleast_1d(h)
    out = np.empty_like(h)

    near = np.abs(h) <= 4 * reach
    if near.any():
        hn = h[near][:, None]
        out[near] = (w * np.abs(hn + off) ** a).sum(axis=1)
    far = ~near
    if far.any():
        hf = h[far]
        mag = np.abs(hf)
        u = np.sign(hf) / mag  # |u * o_j| <= 1/4
        # sum_j w_j (1 + u o_j)^a = sum_m binom(a, m) u^m sum_j w_j o_j^m, by Horner
        ms = range(first, first + _SERIES_TERMS)
        coef = [special.binom(a, m) * float(np.dot(w, off**m)) for m in ms]
        acc = np.zeros_like(hf)
        for c in reversed(coef):
            acc = acc * u + c
        out[far] = mag**a * acc * u**first
    return out[0] if scalar else out


def fgn_autocovariance(H: HurstLike, delta: float, k) -> np.ndarray:
    """Autocovariance of fGn increments ``B_{(i+1)Δ} - B_{iΔ}`` at lag ``k``."""
    Hv = _h(H)
    if delta <= 0:
        raise ValueError("delta must be positive")
    val = 0.5 * delta ** (2 * Hv) * _power_stencil(k, (-1, 0, 1), (1, -2, 1), 2 * Hv)
    return val


# second difference at lag v written on fGn increments eps_i = X_i - X_{i-1}
_SECOND_DIFF_ON_FGN = {1: ((0, 1), (1, -1)), 2: ((0, 1, 2, 3), (1, 1, -1, -1))}


@lru_cache(maxsize=None)
def _cross_stencil(v1: int, v2: int):
    """Stencil of Cov(D^{v1}_{i+h}, D^{v2}_i) in units of -1/2 Δ^{2H} |.|^{2H}."""
    wts = (1, -2, 1)
    acc: dict[int, int] = {}
    for a, wa in enumerate(wts):
        for b, wb in enumerate(wts):
            o = -a * v1 + b * v2
            acc[o] = acc.get(o, 0) + wa * wb
    items = sorted((o, w) for o, w in acc.items() if w != 0)
    return tuple(o for o, _ in items), tuple(w for _, w in items)


def second_diff_covariance(H: HurstLike, delta: float, v1: int, v2: int, h) -> np.ndarray:
    """``Cov(D^{v1}_{i+h}, D^{v2}_i)`` for second differences of fBm.

    Algebraically equal to composing :func:`fgn_autocovariance` with the
    fGn-representation of each second difference; evaluated on the combined
    stencil so large lags stay accurate.
    """
    if v1 not in (1, 2) or v2 not in (1, 2):
        raise ValueError("lags must be 1 or 2")
    Hv = _h(H)
    offs, wts = _cross_stencil(v1, v2)
    return -0.5 * delta ** (2 * Hv) * _power_stencil(h, offs, wts, 2 * Hv)


def tau_squared(H: HurstLike, delta: float, v: int) -> float:
    """Variance of a lag-``v`` second difference of fBm."""
    Hv = _h(H)
    return delta ** (2 * Hv) * (4 * v ** (2 * Hv) - (2 * v) ** (2 * Hv))


_RHO = {
    (1, 1): ((-2, -1, 0, 1, 2), (-1, 4, -6, 4, -1)),
    (2, 2): ((-4, -2, 0, 2, 4), (-1, 4, -6, 4, -1)),
    (1, 2): ((-2, -1, 0, 1, 2, 3, 4), (-1, 2, 1, -4, 1, 2, -1)),
}


def rho_second_diff(H: HurstLike, v1: int, v2: int, h) -> np.ndarray:
    """Correlation between the lag-``v1`` second difference at ``i+h`` and
    the lag-``v2`` second difference at ``i``.

    Only the pairs (1,1), (2,2) and (1,2) are defined.
    """
    key = (int(v1), int(v2))
    if key not in _RHO:
        raise ValueError(f"unsupported lag pair {key}; use (1,1), (2,2) or (1,2)")
    Hv = _h(H)
    a = 2 * Hv
    offs, wts = _RHO[key]
    num = _power_stencil(h, offs, wts, a)
    c1 = 4 - 2**a
    c2 = 4 * 2**a - 4**a
    if key == (1, 1):
        den = 2 * c1
    elif key == (2, 2):
        den = 2 * c2
    else:
        den = 2 * math.sqrt(c1) * math.sqrt(c2)
    return num / den


# ---------------------------------------------------------------------------
# Exact simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FbmPath:
    values: np.ndarray
    delta: float
    hurst: HurstIndex
    seed: int
    method: str = "circulant"

    @property
    def n(self) -> int:
        return len(self.values) - 1

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)


@lru_cache(maxsize=64)
def _circulant_sqrt_eigs(H: float, n: int):
    """sqrt(eigenvalues / m) of the 2n circulant embedding, or None if negative."""
    k = np.arange(n + 1)
    g = fgn_autocovariance(H, 1.0, k)
    row = np.concatenate([g, g[-2:0:-1]])
    eig = np.fft.fft(row).real
    m = row.size
    if eig.min() < -1e-10 * eig.max():
        return None
    sq = np.sqrt(np.clip(eig, 0.0, None) / m)
    sq.setflags(write=False)
    return sq


@lru_cache(maxsize=16)
def _fgn_cholesky(H: float, n: int) -> np.ndarray:
    g = fgn_autocovariance(H, 1.0, np.arange(n))
    L = linalg.cholesky(linalg.toeplitz(g), lower=True)
    L.setflags(write=False)
    return L


def simulate_fgn_batch(H: HurstLike, n: int, delta: float, seeds: Sequence[int]):
    """Exact fGn samples, one row per seed.

    Returns ``(increments, method)`` where ``increments`` has shape
    ``(len(seeds), n)`` and ``method`` is ``"circulant"`` or ``"cholesky"``.
    Each row depends only on its own seed.
    """
    Hv = _h(H)
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    scale = delta**Hv
    sq = _circulant_sqrt_eigs(Hv, n)
    rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    if sq is not None:
        m = sq.size
        z = np.stack([r.standard_normal(2 * m) for r in rngs]) if rngs else np.empty((0, 2 * m))
        w = np.fft.fft(sq * (z[:, :m] + 1j * z[:, m:]), axis=1)
        return scale * w.real[:, :n], "circulant"
    L = _fgn_cholesky(Hv, n)
    z = np.stack([r.standard_normal(n) for r in rngs]) if rngs else np.empty((0, n))
    return scale * z @ L.T, "cholesky"


def simulate_fbm(H: HurstLike, n: int, delta: float, seed: int) -> FbmPath:
    """Exact fBm sample ``(B_0, B_Δ, ..., B_{nΔ})`` with ``B_0 = 0``."""
    hurst = H if isinstance(H, HurstIndex) else HurstIndex(float(H))
    inc, method = simulate_fgn_batch(hurst, n, delta, [seed])
    values = np.concatenate([[0.0], np.cumsum(inc[0])])
    return FbmPath(values=values, delta=float(delta), hurst=hurst, seed=int(seed), method=method)


# ---------------------------------------------------------------------------
# Moments of power variations
# ---------------------------------------------------------------------------


def gaussian_abs_moment(p: float) -> float:
    """``E|U|^p`` for a standard normal ``U``."""
    if p <= 0:
        raise ValueError("p must be positive")
    return 2 ** (p / 2) * math.gamma((p + 1) / 2) / math.sqrt(math.pi)


def pv_mean(H: HurstLike, n: int, delta: float, v: int) -> float:
    """Expected lag-``v`` quadratic variation of fBm over ``n`` increments."""
    if n < 2 * v:
        raise ValueError(f"need n >= {2 * v} for lag {v}")
    return (n - 2 * v + 1) * tau_squared(H, delta, v)


@dataclass(frozen=True)
class SecondDiffMoments:
    hurst: HurstIndex
    n: int
    delta: float
    mu1: float
    mu2: float
    varV1: float
    varV2: float
    covV12: float
    lambda11: float
    lambda22: float
    lambda12: float

    def covariance_matrix(self) -> np.ndarray:
        return np.array([[self.varV1, self.covV12], [self.covV12, self.varV2]])


def _pair_counts(n: int, lo1: int, lo2: int, h: np.ndarray) -> np.ndarray:
    """#{(i, j): lo1 <= i <= n, lo2 <= j <= n, i - j = h}."""
    c = np.minimum(n, n + h) - np.maximum(lo1, lo2 + h) + 1
    return np.clip(c, 0, None)


@lru_cache(maxsize=256)
def _exact_moments(H: float, n: int, delta: float) -> SecondDiffMoments:
    h1 = np.arange(-(n - 2), n - 1)  # lag-1 terms i = 2..n
    h2 = np.arange(-(n - 4), n - 3)  # lag-2 terms j = 4..n
    h12 = np.arange(2 - n, n - 3)
    # Var(sum D_i^2) = 2 sum_ij Cov(D_i, D_j)^2 for centred Gaussians
    var1 = 2.0 * float(np.sum(_pair_counts(n, 2, 2, h1) * second_diff_covariance(H, delta, 1, 1, h1) ** 2))
    var2 = 2.0 * float(np.sum(_pair_counts(n, 4, 4, h2) * second_diff_covariance(H, delta, 2, 2, h2) ** 2))
    cov12 = 2.0 * float(np.sum(_pair_counts(n, 2, 4, h12) * second_diff_covariance(H, delta, 1, 2, h12) ** 2))
    t1 = tau_squared(H, delta, 1)
    t2 = tau_squared(H, delta, 2)
    return SecondDiffMoments(
        hurst=HurstIndex(H),
        n=n,
        delta=delta,
        mu1=pv_mean(H, n, delta, 1),
        mu2=pv_mean(H, n, delta, 2),
        varV1=var1,
        varV2=var2,
        covV12=cov12,
        lambda11=delta * var1 / t1**2,
        lambda22=delta * var2 / t2**2,
        lambda12=delta * cov12 / (t1 * t2),
    )


def exact_pv_moments(H: HurstLike, n: int, delta: float) -> SecondDiffMoments:
    """Exact mean, variance and covariance of ``V(B^H;2,1)`` and ``V(B^H;2,2)``.

    Parameters
    ----------
    H : HurstIndex or float
    n : int
        Number of increments (``n + 1`` observations), at least 5.
    delta : float
        Grid spacing.

    Notes
    -----
    The variances use the Gaussian identity ``Var(sum D_i^2) = 2 sum_ij
    Cov(D_i, D_j)^2`` summed over lag differences, so the cost is O(n).
    The normalized entries are ``lambda_ij = delta * Cov(V_i, V_j) /
    (tau_i^2 tau_j^2)``, which converge to :func:`lambda_asymptotic`.
    """
    if n < 5:
        raise ValueError("exact_pv_moments needs n >= 5 (lag-2 second differences)")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return _exact_moments(_h(H), int(n), float(delta))


@dataclass(frozen=True)
class LambdaMatrix:
    l11: float
    l22: float
    l12: float
    tolerance: float
    terms: int = field(default=0, compare=False)

    def quadratic_form(self) -> float:
        """``(-1, 1) Λ (-1, 1)^T``."""
        return self.l11 + self.l22 - 2.0 * self.l12

    def as_array(self) -> np.ndarray:
        return np.array([[self.l11, self.l12], [self.l12, self.l22]])


@lru_cache(maxsize=256)
def _lambda_series(H: float, tol: float, min_terms: int) -> LambdaMatrix:
    K = max(int(min_terms), 16)
    while True:
        h = np.arange(-2, K + 3)
        r = rho_second_diff(H, 1, 1, h)  # r[j] = rho(h = j - 2)
        idx = np.arange(1, K + 1) + 2
        t11 = 4.0 * r[idx] ** 2
        b22 = r[idx - 2] + 4 * r[idx - 1] + 6 * r[idx] + 4 * r[idx + 1] + r[idx + 2]
        t22 = 2.0 ** (2 - 4 * H) * b22**2
        idx0 = np.arange(0, K) + 2
        b12 = r[idx0] + 2 * r[idx0 + 1] + r[idx0 + 2]
        t12 = 2.0 ** (2 - 2 * H) * b12**2
        tail = max(t11[-1], t22[-1], t12[-1])
        if tail < tol or K >= 1 << 24:
            break
        K *= 2
    rho1 = rho_second_diff(H, 1, 1, 1)
    l11 = 2.0 + t11.sum()
    l22 = 2.0 + t22.sum()
    l12 = 2.0 ** (3 - 2 * H) * (rho1 + 1.0) ** 2 + t12.sum()
    return LambdaMatrix(float(l11), float(l22), float(l12), tolerance=tol, terms=K)


def lambda_asymptotic(H: HurstLike, tol: float = 1e-12, min_terms: int = 10_000) -> LambdaMatrix:
    """Limiting covariance matrix of the normalized lag-1/lag-2 quadratic
    variations of fBm, summed until the last term is below ``tol`` and at
    least ``min_terms`` terms are included."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _lambda_series(_h(H), float(tol), int(min_terms))


def fgn_second_diff_covariance_direct(H: HurstLike, delta: float, v1: int, v2: int, h: int) -> float:
    """Same quantity as :func:`second_diff_covariance`, composed term by term
    from :func:`fgn_autocovariance`. Slow; kept as an independent check."""
    oa, wa = _SECOND_DIFF_ON_FGN[v1]
    ob, wb = _SECOND_DIFF_ON_FGN[v2]
    tot = 0.0
    for k, ak in zip(oa, wa):
        for l, bl in zip(ob, wb):
            tot += ak * bl * float(fgn_autocovariance(H, delta, h - k + l))
    return tot
