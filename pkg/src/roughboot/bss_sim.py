"""Simulation of Brownian semistationary processes with the gamma kernel
``g(x) = x^alpha exp(-lambda x)``.

Two routes: the hybrid scheme (exact Wiener integrals of the power kernel for
the first ``kappa`` cells, Riemann sum at optimal points beyond) for any
volatility model, and exact Cholesky simulation for constant volatility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import integrate, linalg, signal, special

from .seeding import rng_from

__all__ = [
    "GammaKernel",
    "NoSV",
    "SV1F",
    "SV2F",
    "VolatilityModel",
    "volatility_model",
    "HybridConfig",
    "BssPath",
    "VolatilityPath",
    "optimal_point",
    "s_exp",
    "kernel_covariance",
    "kernel_covariance_bessel",
    "simulate_volatility",
    "simulate_bss_hybrid",
    "simulate_bss_exact_gaussian",
    "simulate_bss",
]

LOG15 = math.log(1.5)
# above this many multiply-adds the Riemann sum goes through the FFT
_DIRECT_RIEMANN_LIMIT = 20_000_000


@dataclass(frozen=True)
class GammaKernel:
    alpha: float
    lam: float = 1.0

    def __post_init__(self):
        if not (-0.5 < self.alpha < 0.5):
            raise ValueError(f"alpha must lie in (-1/2, 1/2), got {self.alpha!r}")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x**self.alpha * np.exp(-self.lam * x)


@dataclass(frozen=True)
class NoSV:
    name = "nosv"


@dataclass(frozen=True)
class SV1F:
    beta1: float = 0.125
    xi: float = -0.025
    rho: float = -0.3
    beta0: Optional[float] = None  # defaults to beta1^2 / (2 xi)

    name = "sv1f"

    def __post_init__(self):
        if self.beta0 is None:
            object.__setattr__(self, "beta0", self.beta1**2 / (2 * self.xi))
        if not self.xi < 0:
            raise ValueError("xi must be negative (mean reversion)")
        if not -1 <= self.rho <= 1:
            raise ValueError("rho must lie in [-1, 1]")


@dataclass(frozen=True)
class SV2F:
    beta0: float = -1.20
    beta1: float = 0.040
    beta2: float = 1.50
    xi1: float = -0.00137
    xi2: float = -1.386
    phi: float = 0.250
    rho1: float = -0.30
    rho2: float = -0.30
    substeps: int = 10

    name = "sv2f"

    def __post_init__(self):
        if not (self.xi1 < 0 and self.xi2 < 0):
            raise ValueError("xi1, xi2 must be negative")
        if not (-1 <= self.rho1 <= 1 and -1 <= self.rho2 <= 1):
            raise ValueError("correlations must lie in [-1, 1]")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")


VolatilityModel = Union[NoSV, SV1F, SV2F]


def volatility_model(name: str) -> VolatilityModel:
    try:
        return {"nosv": NoSV, "sv1f": SV1F, "sv2f": SV2F}[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown volatility model {name!r}") from None


@dataclass(frozen=True)
class HybridConfig:
    kappa: int
    delta_trunc: float = 0.5

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if not self.delta_trunc > 0:
            raise ValueError("delta_trunc must be positive")

    @classmethod
    def default(cls, alpha: float) -> "HybridConfig":
        return cls(kappa=1 if alpha < 0 else 3, delta_trunc=0.5)

    def horizon(self, n: int) -> int:
        return int(math.floor(n ** (1 + self.delta_trunc)))


@dataclass(frozen=True)
class BssPath:
    values: np.ndarray
    volatility: np.ndarray
    kernel: GammaKernel
    model: VolatilityModel
    scheme: str
    seed: int

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.values.size)


def s_exp(x):
    """``exp`` below ``log 1.5``, square-root growth above it."""
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        lower = np.exp(np.minimum(x, LOG15))
    upper = 1.5 * np.sqrt(1.0 - LOG15 + x**2 / LOG15)
    out = np.where(x <= LOG15, lower, upper)
    return out[()] if out.ndim == 0 else out


def optimal_point(alpha: float, k) -> np.ndarray:
    """Riemann evaluation point ``b*_k`` in ``[k-1, k]`` for the power kernel."""
    if alpha == 0:
        raise ValueError("b*_k is undefined for alpha = 0; evaluate the kernel at k/n instead")
    if not (-0.5 < alpha < 0.5):
        raise ValueError("alpha must lie in (-1/2, 1/2)")
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    a1 = alpha + 1.0
    # (k^{a1} - (k-1)^{a1}) / a1 written to avoid cancellation at large k
    with np.errstate(divide="ignore"):
        base = -(k**a1) * np.expm1(a1 * np.log1p(-1.0 / k)) / a1
    return base ** (1.0 / alpha)


# ---------------------------------------------------------------------------
# Kernel autocovariance
# ---------------------------------------------------------------------------


def kernel_covariance(kernel: GammaKernel, lag: float, rtol: float = 1e-11) -> float:
    """``∫_0^∞ g(u) g(u + lag) du`` by adaptive quadrature.

    The algebraic singularity at ``u = 0`` is absorbed into a quadrature
    weight, and the range is split at ``lag`` and 1.
    """
    a, lam = kernel.alpha, kernel.lam
    t = abs(float(lag))
    kw = dict(epsabs=0.0, epsrel=rtol, limit=200)
    if t == 0.0:
        head = integrate.quad(lambda u: np.exp(-2 * lam * u), 0.0, 1.0, weight="alg", wvar=(2 * a, 0.0), **kw)[0]
        tail = integrate.quad(lambda u: u ** (2 * a) * np.exp(-2 * lam * u), 1.0, np.inf, **kw)[0]
        return head + tail

    def f(u):
        return (u + t) ** a * np.exp(-lam * (2 * u + t))

    cuts = sorted({min(t, 1.0), 1.0})
    total = integrate.quad(f, 0.0, cuts[0], weight="alg", wvar=(a, 0.0), **kw)[0]
    if len(cuts) == 2:
        total += integrate.quad(lambda u: u**a * f(u), cuts[0], cuts[1], **kw)[0]
    total += integrate.quad(lambda u: u**a * f(u), 1.0, np.inf, **kw)[0]
    return total


def kernel_covariance_bessel(kernel: GammaKernel, lag: float) -> float:
    """Closed form via the modified Bessel function ``K_{alpha+1/2}``."""
    a, lam = kernel.alpha, kernel.lam
    t = abs(float(lag))
    if t == 0.0:
        return math.gamma(2 * a + 1) / (2 * lam) ** (2 * a + 1)
    return math.gamma(a + 1) / math.sqrt(math.pi) * (t / (2 * lam)) ** (a + 0.5) * special.kv(a + 0.5, lam * t)


@lru_cache(maxsize=32)
def _exact_factor(alpha: float, lam: float, n: int):
    kern = GammaKernel(alpha, lam)
    c = np.array([kernel_covariance(kern, k / n) for k in range(n + 1)])
    cov = linalg.toeplitz(c)
    try:
        L = linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(cov)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    L.setflags(write=False)
    return L


def simulate_bss_exact_gaussian(kernel: GammaKernel, n: int, seed: int, model: VolatilityModel = NoSV()) -> BssPath:
    """Exact sample of the Gaussian core on ``{0, 1/n, ..., 1}``."""
    if not isinstance(model, NoSV):
        raise ValueError("exact Cholesky simulation requires constant volatility (NoSV)")
    if n < 1:
        raise ValueError("n must be >= 1")
    L = _exact_factor(kernel.alpha, kernel.lam, int(n))
    z = rng_from(seed, "exact").standard_normal(n + 1)
    return BssPath(
        values=L @ z,
        volatility=np.ones(n + 1),
        kernel=kernel,
        model=model,
        scheme="exact",
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# Volatility
# ---------------------------------------------------------------------------


@dataclass
class VolatilityPath:
    """Volatility on the grid ``j/n``, ``j = -history..n``, with the Brownian
    increments ``dw[j]`` of ``W`` over ``[j/n, (j+1)/n]`` it was coupled to.

    ``innovations`` holds the exact OU innovation of the first factor over
    each cell (``None`` for NoSV); it is correlated with ``dw``.
    """

    sigma: np.ndarray
    dw: np.ndarray
    innovations: Optional[np.ndarray]
    history: int
    factors: dict = field(default_factory=dict)


def _ou_cell_cov(xi: float, rho: float, n: int) -> np.ndarray:
    h = 1.0 / n
    a = math.exp(xi * h)
    return np.array([[h, rho * (a - 1) / xi], [rho * (a - 1) / xi, (a * a - 1) / (2 * xi)]])


def _ou_path(rng: np.random.Generator, xi: float, rho: float, n: int, cells: int):
    L = linalg.cholesky(_ou_cell_cov(xi, rho, n), lower=True)
    z = rng.standard_normal((cells, 2)) @ L.T
    dw, eps = z[:, 0], z[:, 1]
    tau0 = rng.standard_normal() * math.sqrt(-1.0 / (2 * xi))
    a = math.exp(xi / n)
    tau = np.empty(cells + 1)
    tau[0] = tau0
    tau[1:] = signal.lfilter([1.0], [1.0, -a], eps, zi=[a * tau0])[0]
    return tau, dw, eps


def simulate_volatility(model: VolatilityModel, n: int, seed: int, history: int = 0) -> VolatilityPath:
    """Simulate ``sigma`` jointly with the increments of ``W``.

    OU factors use the exact Gaussian transition and start from their
    stationary law. The SV2F factor with state-dependent diffusion is
    advanced by Euler substeps after one unit of burn-in from 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    cells = history + n
    rng = rng_from(seed, "vol")
    if isinstance(model, NoSV):
        dw = rng.standard_normal(cells) / math.sqrt(n)
        return VolatilityPath(np.ones(cells + 1), dw, None, history)
    if isinstance(model, SV1F):
        tau, dw, eps = _ou_path(rng, model.xi, model.rho, n, cells)
        sigma = np.exp(model.beta0 + model.beta1 * tau)
        return VolatilityPath(sigma, dw, eps, history, {"tau": tau})
    if isinstance(model, SV2F):
        tau1, dw, eps = _ou_path(rng, model.xi1, model.rho1, n, cells)
        tau2 = _sv2f_second_factor(rng, model, n, dw)
        sigma = s_exp(model.beta0 + model.beta1 * tau1 + model.beta2 * tau2)
        return VolatilityPath(sigma, dw, eps, history, {"tau1": tau1, "tau2": tau2})
    raise TypeError(f"unknown volatility model {model!r}")


def _sv2f_second_factor(rng, model: SV2F, n: int, dw: np.ndarray) -> np.ndarray:
    s = model.substeps
    h = 1.0 / (n * s)
    sq = math.sqrt(h)
    xi, phi, rho = model.xi2, model.phi, model.rho2
    perp = math.sqrt(1.0 - rho * rho)

    x = 0.0
    burn = rng.standard_normal(n * s) * sq
    for db in burn.tolist():
        x += xi * x * h + (1.0 + phi * x) * db

    cells = dw.size
    # W substeps conditioned on each cell's increment (Brownian bridge)
    zeta = rng.standard_normal((cells, s)) * sq
    w_sub = zeta - zeta.mean(axis=1, keepdims=True) + dw[:, None] / s
    db2 = rho * w_sub + perp * rng.standard_normal((cells, s)) * sq
    out = np.empty(cells + 1)
    out[0] = x
    flat = db2.ravel().tolist()
    for j in range(cells):
        for db in flat[j * s : (j + 1) * s]:
            x += xi * x * h + (1.0 + phi * x) * db
        out[j + 1] = x
    return out


# ---------------------------------------------------------------------------
# Hybrid scheme
# ---------------------------------------------------------------------------


def _quad01(f, singular_at_one: float = 0.0) -> float:
    kw = dict(epsabs=0.0, epsrel=1e-12, limit=200)
    if singular_at_one:
        return integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(0.0, singular_at_one), **kw)[0]
    return integrate.quad(f, 0.0, 1.0, **kw)[0]


@lru_cache(maxsize=64)
def _hybrid_noise(alpha: float, kappa: int, n: int, xi: Optional[float], rho: float):
    """Regression of the Wiener integrals on the conditioning noise.

    The cell vector is ``(dW, eps, W^(1..kappa))`` with
    ``W^(k) = ∫ (k/n - u)^alpha dW_u`` over the cell. Returns
    ``(coef, chol_resid)`` so that ``W^(.) = coef @ cond + chol_resid @ z``,
    where ``cond`` is ``(dW,)`` or ``(dW, eps)`` (``xi`` is None for NoSV).
    """
    a = alpha
    h = 1.0 / n
    with_eps = xi is not None
    ks = np.arange(1, kappa + 1)
    cww = np.empty((kappa, kappa))
    for i, k in enumerate(ks):
        for j, l in enumerate(ks):
            if k == l:
                v = (k ** (2 * a + 1) - (k - 1) ** (2 * a + 1)) / (2 * a + 1)
            else:
                lo, hi = min(k, l), max(k, l)
                if lo == 1:
                    v = _quad01(lambda x, hi=hi: (hi - x) ** a, singular_at_one=a)
                else:
                    v = _quad01(lambda x, lo=lo, hi=hi: (lo - x) ** a * (hi - x) ** a)
            cww[i, j] = v * h ** (2 * a + 1)
    c_dw = np.array([(k ** (a + 1) - (k - 1) ** (a + 1)) / (a + 1) for k in ks]) * h ** (a + 1)
    if with_eps:
        cc = _ou_cell_cov(xi, rho, n)
        c_eps = []
        for k in ks:
            if k == 1:
                v = _quad01(lambda x: math.exp(xi * (1 - x) * h), singular_at_one=a)
            else:
                v = _quad01(lambda x, k=k: math.exp(xi * (1 - x) * h) * (k - x) ** a)
            c_eps.append(rho * v * h ** (a + 1))
        cwc = np.column_stack([c_dw, c_eps])
    else:
        cc = np.array([[h]])
        cwc = c_dw[:, None]
    coef = linalg.solve(cc, cwc.T, assume_a="pos").T
    resid = cww - coef @ cwc.T
    resid = 0.5 * (resid + resid.T)
    try:
        Lr = linalg.cholesky(resid, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(resid)
        Lr = V * np.sqrt(np.clip(w, 0.0, None))
    return coef, Lr


@lru_cache(maxsize=64)
def _riemann_weights(alpha: float, lam: float, n: int, N: int, kappa: int) -> np.ndarray:
    """Kernel weights g(b*_k / n) for k = kappa+1..N, zero below; reversed
    so that a window ending at cell i-1 dots straight into X-hat_i."""
    k = np.arange(N + 1, dtype=float)
    w = np.zeros(N + 1)
    tail = k[kappa + 1 :]
    if tail.size:
        pts = tail if alpha == 0 else optimal_point(alpha, tail)
        w[kappa + 1 :] = GammaKernel(alpha, lam)(pts / n)
    w = w[::-1].copy()
    w.setflags(write=False)
    return w


def _model_ou(model: VolatilityModel):
    if isinstance(model, SV1F):
        return model.xi, model.rho
    if isinstance(model, SV2F):
        return model.xi1, model.rho1
    return None, 0.0


def simulate_bss_hybrid(
    kernel: GammaKernel,
    model: VolatilityModel,
    n: int,
    cfg: Optional[HybridConfig] = None,
    seed: int = 0,
) -> BssPath:
    """Hybrid-scheme sample of ``X`` on ``{0, 1/n, ..., 1}``.

    History before ``-N/n`` with ``N = floor(n^(1+delta))`` is dropped. For
    ``alpha = 0`` the kernel has no singularity and the Riemann sum is
    evaluated at ``k/n``.
    """
    if n < 5:
        raise ValueError("n must be >= 5")
    cfg = cfg or HybridConfig.default(kernel.alpha)
    N = cfg.horizon(n)
    kappa = min(cfg.kappa, N)
    a, lam = kernel.alpha, kernel.lam

    vol = simulate_volatility(model, n, seed, history=N)
    sigma, dw = vol.sigma, vol.dw  # sigma[p] at time (p - N)/n, dw[p] over cell p
    cells = dw.size

    if kappa > 0:
        if a == 0:
            wint = np.repeat(dw[:, None], kappa, axis=1)
        else:
            xi, rho = _model_ou(model)
            coef, Lr = _hybrid_noise(a, kappa, n, xi, rho)
            cond = dw[:, None] if vol.innovations is None else np.column_stack([dw, vol.innovations])
            z = rng_from(seed, "wiener").standard_normal((cells, kappa))
            wint = cond @ coef.T + z @ Lr.T
    else:
        wint = np.empty((cells, 0))

    weights = _riemann_weights(a, lam, n, N, kappa)
    y = np.append(sigma[:-1] * dw, 0.0)  # the pad only meets the zero weight at k = 0
    if (n + 1) * (N + 1) <= _DIRECT_RIEMANN_LIMIT:
        riemann = sliding_window_view(y, N + 1) @ weights
    else:
        riemann = signal.fftconvolve(y, weights[::-1], mode="valid")

    exact = np.zeros(n + 1)
    i = np.arange(n + 1)
    for kk in range(1, kappa + 1):
        p = i + N - kk  # cell index (i - kk) shifted by N
        exact += math.exp(-lam * kk / n) * sigma[p] * wint[p, kk - 1]

    return BssPath(
        values=exact + riemann,
        volatility=sigma[N:].copy(),
        kernel=kernel,
        model=model,
        scheme="hybrid",
        seed=int(seed),
    )


def simulate_bss(
    kernel: GammaKernel,
    model: VolatilityModel,
    n: int,
    seed: int,
    scheme: str = "auto",
    cfg: Optional[HybridConfig] = None,
) -> BssPath:
    """Dispatch: ``exact`` (NoSV only), ``hybrid``, or ``auto`` (exact for
    NoSV, hybrid otherwise)."""
    if scheme == "auto":
        scheme = "exact" if isinstance(model, NoSV) else "hybrid"
    if scheme == "exact":
        return simulate_bss_exact_gaussian(kernel, n, seed, model)
    if scheme == "hybrid":
        return simulate_bss_hybrid(kernel, model, n, cfg, seed)
    raise ValueError(f"unknown scheme {scheme!r}")
