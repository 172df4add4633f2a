"""Transverse Bloch-vector dynamics under the time-local generator."""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .kernels import QuadratureConfig, coefficients, decay_rate_infinity
from .spectral import BathSpec, ModelConfig

STEADY_DERIVATIVE_TOL = 1e-8
STEADY_WINDOW_RATES = 5.0
MEMORY_TIMES_FINE = 20.0
ABS_TOL_FLOOR = 1e-12


class Flavor(str, Enum):
    FULL = "full"
    RWA = "rwa"


class Regime(str, Enum):
    BIEXPONENTIAL = "biexponential"
    OSCILLATORY = "oscillatory"


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class BlochXY:
    x: float
    y: float

    def __post_init__(self):
        if self.x * self.x + self.y * self.y > 1.0 + 1e-12:
            raise ValueError(f"unphysical state: x^2 + y^2 > 1 for ({self.x}, {self.y})")

    def __neg__(self) -> "BlochXY":
        return BlochXY(-self.x, -self.y)

    @property
    def coherence(self) -> float:
        return math.hypot(self.x, self.y)


class _ScalarSpline:
    """Scalar evaluation of a cubic PPoly without numpy call overhead."""

    def __init__(self, spline: CubicSpline):
        self.x = spline.x.tolist()
        self.c = [row.tolist() for row in spline.c]
        self.n = len(self.x) - 1

    def __call__(self, t: float) -> float:
        i = bisect.bisect_right(self.x, t) - 1
        if i < 0:
            i = 0
        elif i >= self.n:
            i = self.n - 1
        d = t - self.x[i]
        c = self.c
        return ((c[0][i] * d + c[1][i]) * d + c[2][i]) * d + c[3][i]


@dataclass
class CoefficientTable:
    times: np.ndarray
    delta: np.ndarray
    gamma_rate: np.ndarray
    flavor: Flavor
    model: ModelConfig
    bath: BathSpec
    quadrature: QuadratureConfig = field(default_factory=QuadratureConfig)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.gamma_rate = np.asarray(self.gamma_rate, dtype=float)
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ValueError("table times must start at 0 and be strictly increasing")
        self._delta_spline = CubicSpline(self.times, self.delta)
        self._gamma_spline = CubicSpline(self.times, self.gamma_rate)
        self.delta_at = _ScalarSpline(self._delta_spline)
        self.gamma_at = _ScalarSpline(self._gamma_spline)

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def interpolate(self, t) -> tuple[np.ndarray, np.ndarray]:
        return self._delta_spline(t), self._gamma_spline(t)

    def matrix(self, t: float) -> np.ndarray:
        """Generator of d[x, y]/dt at time t."""
        om = self.model.omega
        d, g = self.delta_at(t), self.gamma_at(t)
        if self.flavor is Flavor.FULL:
            return np.array([[0.0, -om], [om + d, -g]])
        w = om + 0.5 * d
        return np.array([[-0.5 * g, -w], [w, -0.5 * g]])

    def rhs(self) -> Callable[[float, np.ndarray], np.ndarray]:
        om = self.model.omega
        delta_at, gamma_at = self.delta_at, self.gamma_at
        if self.flavor is Flavor.FULL:

            def f(t, r):
                x, y = r
                return np.array([-om * y, (om + delta_at(t)) * x - gamma_at(t) * y])

        else:

            def f(t, r):
                x, y = r
                w = om + 0.5 * delta_at(t)
                hg = 0.5 * gamma_at(t)
                return np.array([-hg * x - w * y, w * x - hg * y])

        return f

    @property
    def gamma_infinity(self) -> float:
        return decay_rate_infinity(self.model, self.bath)


def table_grid(bath: BathSpec, model: ModelConfig, t_end: float) -> np.ndarray:
    """Fine spacing over the bath memory, ten times coarser afterwards."""
    h = min(1.0 / bath.gamma, 2.0 * math.pi / model.omega) / 50.0
    t_fine = min(t_end, MEMORY_TIMES_FINE / bath.gamma)
    n_fine = max(1, int(math.ceil(t_fine / h - 1e-9)))
    fine = np.linspace(0.0, t_fine, n_fine + 1)
    if t_end <= t_fine:
        return fine
    n_coarse = max(1, int(math.ceil((t_end - t_fine) / (10.0 * h) - 1e-9)))
    coarse = np.linspace(t_fine, t_end, n_coarse + 1)[1:]
    return np.concatenate([fine, coarse])


def _coeff_row(args):
    model, bath, t, q, rwa = args
    c = coefficients(model, bath, t, q, rwa=rwa)
    return c.delta, c.gamma_rate


def build_coefficient_table(
    model: ModelConfig,
    bath: BathSpec,
    t_end: float,
    q: QuadratureConfig | None = None,
    flavor: Flavor = Flavor.FULL,
    workers: int = 1,
) -> CoefficientTable:
    if not t_end > 0:
        raise ValueError(f"t_end must be > 0, got {t_end}")
    q = q or QuadratureConfig()
    flavor = Flavor(flavor)
    times = table_grid(bath, model, t_end)
    rwa = flavor is Flavor.RWA
    jobs = [(model, bath, float(t), q, rwa) for t in times]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_coeff_row, jobs, chunksize=32))
    else:
        rows = [_coeff_row(j) for j in jobs]
    delta = np.array([r[0] for r in rows])
    gamma = np.array([r[1] for r in rows])
    return CoefficientTable(times, delta, gamma, flavor, model, bath, q)


@dataclass
class SteadyState:
    t_detect: float
    x_inf: float
    y_inf: float


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    steady: Optional[SteadyState] = None
    tau_s: Optional[float] = None
    tau_b: Optional[float] = None
    dense: Optional[Callable] = field(default=None, repr=False)

    @property
    def coherence(self) -> np.ndarray:
        return np.sqrt(self.x * self.x + self.y * self.y)

    @property
    def states(self) -> list[BlochXY]:
        return [BlochXY(float(a), float(b)) for a, b in zip(self.x, self.y)]

    @property
    def final(self) -> tuple[float, float]:
        return float(self.x[-1]), float(self.y[-1])

    def state_at(self, t: float) -> tuple[float, float]:
        if not (self.times[0] <= t <= self.times[-1]):
            raise ContractError(f"t={t} outside trajectory [{self.times[0]}, {self.times[-1]}]")
        if self.dense is not None:
            x, y = self.dense(t)
            return float(x), float(y)
        return float(np.interp(t, self.times, self.x)), float(np.interp(t, self.times, self.y))


def derivative_norm(table: CoefficientTable, times, x, y) -> np.ndarray:
    """max(|dx/dt|, |dy/dt|) along sampled states (vectorised)."""
    om = table.model.omega
    d, g = table.interpolate(np.asarray(times))
    if table.flavor is Flavor.FULL:
        dx = -om * y
        dy = (om + d) * x - g * y
    else:
        w = om + 0.5 * d
        dx = -0.5 * g * x - w * y
        dy = w * x - 0.5 * g * y
    return np.maximum(np.abs(dx), np.abs(dy))


def detect_steady(table: CoefficientTable, times, x, y) -> Optional[SteadyState]:
    gamma_inf = table.gamma_infinity
    if not gamma_inf > 0:
        return None
    window = STEADY_WINDOW_RATES / gamma_inf
    quiet = derivative_norm(table, times, x, y) < STEADY_DERIVATIVE_TOL * table.model.omega
    # earliest start of a quiet run that lasts at least `window`
    run_start = None
    for i, ok in enumerate(quiet):
        if not ok:
            run_start = None
            continue
        if run_start is None:
            run_start = i
        if times[i] - times[run_start] >= window:
            return SteadyState(float(times[run_start]), float(x[i]), float(y[i]))
    return None


def _uniform_segments(times: np.ndarray) -> list[tuple[int, int, float]]:
    """Split the table into runs of (nearly) constant spacing: (i_start, i_end, h)."""
    h = np.diff(times)
    out = []
    start = 0
    for i in range(1, len(h) + 1):
        if i == len(h) or abs(h[i] - h[start]) > 1e-6 * h[start]:
            out.append((start, i, float(np.max(h[start:i]))))
            start = i
    return out


class _PiecewiseDense:
    """Dense output stitched from consecutive solver segments."""

    def __init__(self):
        self.bounds: list[float] = []
        self.sols: list = []

    def add(self, t_hi: float, sol) -> None:
        self.bounds.append(t_hi)
        self.sols.append(sol)

    def __call__(self, t: float) -> np.ndarray:
        k = min(bisect.bisect_left(self.bounds, t), len(self.sols) - 1)
        return self.sols[k](t)


def evolve(
    initial: BlochXY,
    table: CoefficientTable,
    t_end: float | None = None,
    ode_tol: float = 1e-10,
    method: str = "DOP853",
) -> Trajectory:
    """Integrate d[x, y]/dt = M(t) [x, y] with an embedded Runge-Kutta pair.

    ``ode_tol`` is the relative local tolerance; the absolute floor sits
    far below it so decaying solutions keep their relative accuracy.
    The interpolated coefficients are only C2 across table knots, which a
    high-order error estimator cannot see, so steps are capped at the local
    knot spacing.  Output is sampled on the table nodes up to ``t_end``.
    """
    if t_end is None:
        t_end = table.t_end
    if t_end > table.t_end * (1 + 1e-12):
        raise ContractError(f"t_end={t_end} beyond coefficient table coverage {table.t_end}")
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    t_end = min(t_end, table.t_end)
    rhs = table.rhs()
    dense = _PiecewiseDense()
    ts, xs, ys = [np.array([0.0])], [np.array([initial.x])], [np.array([initial.y])]
    state = [initial.x, initial.y]
    for i0, i1, h in _uniform_segments(table.times):
        lo = float(table.times[i0])
        if lo >= t_end:
            break
        hi = min(float(table.times[i1]), t_end)
        nodes = table.times[(table.times > lo) & (table.times < hi)]
        t_eval = np.append(nodes, hi)
        sol = solve_ivp(
            rhs,
            (lo, hi),
            state,
            method=method,
            t_eval=t_eval,
            rtol=ode_tol,
            atol=ode_tol * ABS_TOL_FLOOR,
            max_step=h,
            dense_output=True,
        )
        if not sol.success:
            raise RuntimeError(f"ODE integration failed on [{lo}, {hi}]: {sol.message}")
        dense.add(hi, sol.sol)
        ts.append(sol.t)
        xs.append(sol.y[0])
        ys.append(sol.y[1])
        state = [sol.y[0, -1], sol.y[1, -1]]
    t, x, y = np.concatenate(ts), np.concatenate(xs), np.concatenate(ys)
    g_inf = table.gamma_infinity
    steady = detect_steady(table, t, x, y)
    return Trajectory(
        times=t,
        x=x,
        y=y,
        steady=steady,
        tau_s=1.0 / g_inf if g_inf > 0 else None,
        tau_b=1.0 / table.bath.gamma,
        dense=dense,
    )


@dataclass(frozen=True)
class RegimeReport:
    regime: Regime
    discriminant: float
    degenerate: bool = False


def classify_regime(table: CoefficientTable, t: float) -> RegimeReport:
    """Real (biexponential) vs complex (oscillatory) eigenvalues of M(t)."""
    if not (0.0 <= t <= table.t_end):
        raise ContractError(f"t={t} outside table coverage [0, {table.t_end}]")
    m = table.matrix(t)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc > 0:
        return RegimeReport(Regime.BIEXPONENTIAL, disc)
    return RegimeReport(Regime.OSCILLATORY, disc, degenerate=disc == 0)


def discriminant(gamma_rate: float, delta: float, omega: float = 1.0) -> float:
    return gamma_rate * gamma_rate - 4.0 * omega * (omega + delta)


def residue_estimate(
    traj: Trajectory, table: CoefficientTable, t0: float, model: ModelConfig, bath: BathSpec
) -> float:
    """Two-stage estimate |x(t0) - Omega y(t0) tau_S| of the residue coherence."""
    x0, y0 = traj.state_at(t0)
    tau_s = 1.0 / decay_rate_infinity(model, bath)
    return abs(x0 - model.omega * y0 * tau_s)


def stationary_stage_model(
    traj: Trajectory, t0: float, model: ModelConfig, bath: BathSpec
) -> tuple[Callable[[float], float], Callable[[float], float]]:
    """Closed-form second-stage predictors (y(t), x(t)) for t >= t0."""
    x0, y0 = traj.state_at(t0)
    tau_s = 1.0 / decay_rate_infinity(model, bath)
    om = model.omega

    def y_of(t):
        return y0 * np.exp(-(np.asarray(t) - t0) / tau_s)

    def x_of(t):
        return x0 - om * (y0 - y_of(t)) * tau_s

    return y_of, x_of
