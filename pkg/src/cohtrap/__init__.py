"""Coherence trapping of a dissipative two-level system in a thermal bath."""

__version__ = "0.1.0"

from .spectral import BathSpec, ModelConfig, SpectrumKind, effective_spectrum, vacuum_spectrum
from .kernels import (
    LambShiftResult,
    QuadratureConfig,
    QuadratureError,
    decay_rate,
    decay_rate_infinity,
    kernel_cos,
    kernel_sin,
    lamb_shift,
    lamb_shift_infinity,
    pv_integral,
    rwa_coefficients,
)
from .dynamics import BlochXY, CoefficientTable, Flavor, Regime, build_coefficient_table, classify_regime, evolve
from .trapping import TrapResult, lambda_curve, solve_lambda
