"""Coupling constant that makes the long-time Lamb shift equal to -Omega.

The long-time shift is quadratic in the coupling, so the trapping condition
inverts in closed form: lambda* = 1 / (2 sqrt(I)) with I the principal-value
integral of J_eff / (w^2 - Omega^2).  No solution exists when I <= 0.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .kernels import QuadratureConfig, QuadratureError, pv_integral
from .spectral import BathSpec, ModelConfig

# |I| must exceed this many error estimates for a definite feasibility verdict
FEASIBILITY_MARGIN = 10.0


@dataclass(frozen=True)
class TrapResult:
    pv_integral: float
    feasible: bool
    lambda_star: Optional[float]
    error_estimate: float  # on lambda_star when feasible, else on pv_integral
    pv_error: float = math.nan
    indeterminate: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "pv_integral": self.pv_integral,
            "feasible": self.feasible,
            "lambda_star": self.lambda_star,
            "error_estimate": self.error_estimate,
            "pv_error": self.pv_error,
            "indeterminate": self.indeterminate,
            "error": self.error,
        }


def solve_lambda(
    bath: BathSpec, model_omega: float = 1.0, q: QuadratureConfig | None = None
) -> TrapResult:
    pv = pv_integral(ModelConfig(lam=0.0, omega=model_omega), bath, q)
    i_val, i_err = pv.value, pv.error_estimate
    indeterminate = abs(i_val) <= FEASIBILITY_MARGIN * i_err
    if i_val > 0:
        lam = 1.0 / (2.0 * math.sqrt(i_val))
        # d lambda / d I = -lambda / (2 I)
        lam_err = lam * i_err / (2.0 * i_val)
        return TrapResult(i_val, True, lam, lam_err, i_err, indeterminate)
    return TrapResult(i_val, False, None, i_err, i_err, indeterminate)


def _solve_point(args):
    bath, omega, q = args
    try:
        return solve_lambda(bath, omega, q)
    except (QuadratureError, ValueError) as exc:
        return TrapResult(math.nan, False, None, math.nan, error=str(exc))


def lambda_curve(
    bath_template: BathSpec,
    temperatures: Sequence[float],
    q: QuadratureConfig | None = None,
    model_omega: float = 1.0,
    workers: int = 1,
) -> list[tuple[float, TrapResult]]:
    """Trapping coupling over a temperature range; failed points are kept."""
    temps = [float(T) for T in temperatures]
    if any(T <= 0 for T in temps):
        raise ValueError("temperatures must be positive")
    if any(b < a for a, b in zip(temps, temps[1:])):
        raise ValueError("temperatures must be sorted")
    jobs = [(bath_template.replace(temperature=T), model_omega, q) for T in temps]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_point, jobs))
    else:
        results = [_solve_point(j) for j in jobs]
    return list(zip(temps, results))


def nonmonotonic_turning_point(curve: Sequence[tuple[float, TrapResult]]) -> Optional[float]:
    """Temperature of an interior maximum of lambda*(T), if any."""
    pts = [(T, r.lambda_star) for T, r in curve if r.feasible and r.lambda_star is not None]
    if len(pts) < 3:
        raise ValueError("need at least 3 feasible points")
    i_max = max(range(len(pts)), key=lambda i: pts[i][1])
    if i_max == 0 or i_max == len(pts) - 1:
        return None
    return pts[i_max][0]


def feasibility_boundary(curve: Sequence[tuple[float, TrapResult]]) -> Optional[tuple[float, float]]:
    """First bracket (T_feasible, T_infeasible) where feasibility is lost."""
    for (t_a, r_a), (t_b, r_b) in zip(curve, curve[1:]):
        if r_a.feasible and not r_b.feasible and r_b.error is None:
            return t_a, t_b
    return None
