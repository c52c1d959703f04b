"""Roughness estimation and local fractional bootstrap tests for Brownian
semistationary processes."""

__version__ = "0.1.0"

from .bss_sim import SV1F, SV2F, GammaKernel, HybridConfig, NoSV, simulate_bss, volatility_model
from .fgn import HurstIndex, exact_pv_moments, lambda_asymptotic, simulate_fbm
from .harness import CellResult, ExperimentPlan, run_power_experiment, run_size_experiment
from .inference import TestResult, TestSpec, bootstrap_quantiles, clt_test, lfb_test
from .powervar import DegenerateSeriesError, TimeSeries, estimate_alpha, power_variation

__all__ = [
    "__version__",
    "GammaKernel",
    "NoSV",
    "SV1F",
    "SV2F",
    "HybridConfig",
    "simulate_bss",
    "volatility_model",
    "HurstIndex",
    "exact_pv_moments",
    "lambda_asymptotic",
    "simulate_fbm",
    "ExperimentPlan",
    "CellResult",
    "run_size_experiment",
    "run_power_experiment",
    "TestSpec",
    "TestResult",
    "clt_test",
    "lfb_test",
    "bootstrap_quantiles",
    "TimeSeries",
    "DegenerateSeriesError",
    "estimate_alpha",
    "power_variation",
]
