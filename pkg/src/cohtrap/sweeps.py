"""Batch drivers for the figure data products and their file formats.

Column schemas (CSV header order, JSON record keys):

    coefficients  t, delta, gamma_rate
    trajectory    t, x, y, coherence
    grid          x0, y0, c_inf          (c_inf empty / null outside the unit disk)
    curve         T, lambda, feasible, pv_integral, error
                  (error: on lambda when feasible, on pv_integral otherwise)

JSON files use the envelope ``{"schema_version", "kind", "metadata", "data"}``
with ``data`` a list of records.  CSV files carry their metadata in a sidecar
``<name>.meta.json``.  Floats are written with 9 significant digits.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .dynamics import (
    BlochXY,
    CoefficientTable,
    Flavor,
    Trajectory,
    detect_steady,
    build_coefficient_table,
    evolve,
)
from .kernels import QuadratureConfig, decay_rate_infinity
from .spectral import BathSpec, ModelConfig
from .trapping import TrapResult

SCHEMA_VERSION = 1

COLUMNS = {
    "coefficients": ["t", "delta", "gamma_rate"],
    "trajectory": ["t", "x", "y", "coherence"],
    "grid": ["x0", "y0", "c_inf"],
    "curve": ["T", "lambda", "feasible", "pv_integral", "error"],
}

DEFAULT_INITIALS = (BlochXY(0.8, 0.4), BlochXY(0.6, 0.4), BlochXY(0.8, 0.2))


@dataclass
class Series:
    """A tabular data product: one of the kinds in COLUMNS."""

    kind: str
    rows: list[list[Any]]
    metadata: dict = field(default_factory=dict)

    @property
    def columns(self) -> list[str]:
        return COLUMNS[self.kind]


@dataclass
class GridScanResult:
    x0_axis: np.ndarray
    y0_axis: np.ndarray
    c_inf: np.ndarray  # NaN marks cells outside the unit disk or failed points
    x_inf: np.ndarray
    metadata: dict = field(default_factory=dict)

    def to_series(self) -> Series:
        rows = []
        for i, x0 in enumerate(self.x0_axis):
            for j, y0 in enumerate(self.y0_axis):
                c = self.c_inf[i, j]
                rows.append([float(x0), float(y0), None if math.isnan(c) else float(c)])
        return Series("grid", rows, dict(self.metadata))

    def argmax(self) -> tuple[float, float, float]:
        i, j = np.unravel_index(np.nanargmax(self.c_inf), self.c_inf.shape)
        return float(self.x0_axis[i]), float(self.y0_axis[j]), float(self.c_inf[i, j])


def default_t_end(model: ModelConfig, bath: BathSpec, n_relax: float = 50.0) -> float:
    """n_relax golden-rule relaxation times, never shorter than the bath memory."""
    g = decay_rate_infinity(model, bath)
    memory = 20.0 / bath.gamma
    if g <= 0:
        return memory
    return max(n_relax / g, memory)


def base_metadata(model: ModelConfig, bath: BathSpec, **extra) -> dict:
    meta = {
        "code_version": __version__,
        "model": {"omega": model.omega, "lambda": model.lam},
        "bath": bath.to_dict(),
    }
    meta.update(extra)
    return meta


# ---------------------------------------------------------------------------
# products


def coefficient_series(
    model: ModelConfig,
    bath: BathSpec,
    t_end: float,
    q: QuadratureConfig | None = None,
    flavor: Flavor = Flavor.FULL,
    workers: int = 1,
    table: CoefficientTable | None = None,
) -> Series:
    q = q or QuadratureConfig()
    if table is None:
        table = build_coefficient_table(model, bath, t_end, q, flavor, workers)
    rows = [[float(t), float(d), float(g)] for t, d, g in zip(table.times, table.delta, table.gamma_rate)]
    meta = base_metadata(model, bath, quadrature=q.to_dict(), flavor=Flavor(flavor).value, t_end=t_end)
    return Series("coefficients", rows, meta)


def trajectory_series(
    model: ModelConfig,
    bath: BathSpec,
    initials: Sequence[BlochXY] = DEFAULT_INITIALS,
    t_end: float | None = None,
    q: QuadratureConfig | None = None,
    ode_tol: float = 1e-10,
    flavor: Flavor = Flavor.FULL,
    table: CoefficientTable | None = None,
) -> list[Series]:
    q = q or QuadratureConfig()
    if t_end is None:
        t_end = default_t_end(model, bath)
    if table is None:
        table = build_coefficient_table(model, bath, t_end, q, flavor)
    out = []
    for ini in initials:
        traj = evolve(ini, table, t_end, ode_tol)
        rows = [
            [float(t), float(a), float(b), float(c)]
            for t, a, b, c in zip(traj.times, traj.x, traj.y, traj.coherence)
        ]
        steady = None
        if traj.steady is not None:
            steady = {"t_detect": traj.steady.t_detect, "x_inf": traj.steady.x_inf, "y_inf": traj.steady.y_inf}
        meta = base_metadata(
            model,
            bath,
            quadrature=q.to_dict(),
            flavor=Flavor(flavor).value,
            initial={"x": ini.x, "y": ini.y},
            t_end=t_end,
            ode_tol=ode_tol,
            tau_s=traj.tau_s,
            tau_b=traj.tau_b,
            steady=steady,
        )
        out.append(Series("trajectory", rows, meta))
    return out


def converged_coherence(traj) -> tuple[float, float]:
    """(C_inf, x_inf): the detected steady state, else the final sample."""
    if traj.steady is not None:
        x, y = traj.steady.x_inf, traj.steady.y_inf
    else:
        x, y = traj.final
    return math.hypot(x, y), x


def _scan_chunk(args):
    table, t_end, ode_tol, points = args
    out = []
    for x0, y0 in points:
        try:
            traj = evolve(BlochXY(x0, y0), table, t_end, ode_tol)
            out.append(converged_coherence(traj) + (None,))
        except Exception as exc:  # recorded per point, scan continues
            out.append((math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
    return out


def _propagator_scan(table, t_end, ode_tol, points):
    """Superpose two basis trajectories: r(t) = x0 r_(1,0)(t) + y0 r_(0,1)(t)."""
    e1 = evolve(BlochXY(1.0, 0.0), table, t_end, ode_tol)
    e2 = evolve(BlochXY(0.0, 1.0), table, t_end, ode_tol)
    out = []
    for x0, y0 in points:
        x = x0 * e1.x + y0 * e2.x
        y = x0 * e1.y + y0 * e2.y
        traj = Trajectory(e1.times, x, y, steady=detect_steady(table, e1.times, x, y))
        out.append(converged_coherence(traj) + (None,))
    return out


def grid_axis(grid_n: int) -> np.ndarray:
    # exact symmetric nodes: k / m for k = -m..m
    m = (grid_n - 1) // 2
    return np.array([k / m for k in range(-m, m + 1)])


def scan_initial_states(
    model: ModelConfig,
    bath: BathSpec,
    grid_n: int = 41,
    t_end: float | None = None,
    ode_tol: float = 1e-10,
    q: QuadratureConfig | None = None,
    workers: int = 1,
    table: CoefficientTable | None = None,
    mode: str = "propagator",
) -> GridScanResult:
    """Residue coherence for every physical initial state on a grid_n^2 grid.

    ``mode="propagator"`` integrates the two unit initial states and
    superposes them (the equation of motion is linear), which is exact up to
    the ODE tolerance and costs two integrations.  ``mode="direct"`` integrates
    every grid point on its own, fanned out over ``workers`` processes.
    """
    if mode not in ("propagator", "direct"):
        raise ValueError(f"mode must be 'propagator' or 'direct', got {mode!r}")
    if grid_n < 3 or grid_n % 2 == 0:
        raise ValueError(f"grid_n must be odd and >= 3, got {grid_n}")
    q = q or QuadratureConfig()
    if t_end is None:
        t_end = default_t_end(model, bath)
    if table is None:
        table = build_coefficient_table(model, bath, t_end, q, Flavor.FULL, workers)
    axis = grid_axis(grid_n)
    cells = [
        (i, j)
        for i in range(grid_n)
        for j in range(grid_n)
        if axis[i] ** 2 + axis[j] ** 2 <= 1.0 + 1e-12
    ]
    points = [(float(axis[i]), float(axis[j])) for i, j in cells]
    if mode == "propagator":
        try:
            results = _propagator_scan(table, t_end, ode_tol, points)
        except Exception as exc:  # the basis runs failed: every point is absent
            msg = f"{type(exc).__name__}: {exc}"
            results = [(math.nan, math.nan, msg)] * len(points)
    else:
        n_chunks = max(1, workers) * 4
        size = max(1, math.ceil(len(points) / n_chunks))
        chunks = [(table, t_end, ode_tol, points[k : k + size]) for k in range(0, len(points), size)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_scan_chunk, chunks))
        else:
            parts = [_scan_chunk(c) for c in chunks]
        results = [r for part in parts for r in part]

    c_inf = np.full((grid_n, grid_n), np.nan)
    x_inf = np.full((grid_n, grid_n), np.nan)
    failures = []
    for (i, j), (c, x, err) in zip(cells, results):
        if err is not None:
            failures.append({"x0": float(axis[i]), "y0": float(axis[j]), "error": err})
            continue
        c_inf[i, j] = c
        x_inf[i, j] = x

    mirrored = c_inf[::-1, ::-1]
    both = ~np.isnan(c_inf) & ~np.isnan(mirrored)
    asym = float(np.max(np.abs(c_inf[both] - mirrored[both]))) if both.any() else 0.0

    meta = base_metadata(
        model,
        bath,
        quadrature=q.to_dict(),
        grid_n=grid_n,
        mode=mode,
        t_end=t_end,
        ode_tol=ode_tol,
        n_points=len(points),
        failures=failures,
        max_asymmetry=asym,
        symmetry_axis_slope=symmetry_axis_slope(axis, x_inf),
    )
    return GridScanResult(axis, axis.copy(), c_inf, x_inf, meta)


def symmetry_axis_slope(axis: np.ndarray, x_inf: np.ndarray) -> Optional[float]:
    """Slope dy0/dx0 of the zero-coherence line through the centre.

    The long-time x is linear in the initial state, x_inf = a x0 + b y0; the
    map |x_inf| is mirror symmetric about the line a x0 + b y0 = 0.  a and b
    come from a least-squares fit over the scanned points.
    """
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    ok = ~np.isnan(x_inf)
    if ok.sum() < 2:
        return None
    A = np.column_stack([xx[ok], yy[ok]])
    (a, b), *_ = np.linalg.lstsq(A, x_inf[ok], rcond=None)
    if b == 0:
        return math.inf
    return float(-a / b)


def curve_series(curve: Sequence[tuple[float, TrapResult]], metadata: dict | None = None) -> Series:
    rows = []
    for T, r in curve:
        err = None if r.error_estimate is None or math.isnan(r.error_estimate) else r.error_estimate
        pv = None if math.isnan(r.pv_integral) else r.pv_integral
        rows.append([float(T), r.lambda_star, bool(r.feasible), pv, err])
    meta = dict(metadata or {})
    meta["points"] = [{"T": T, "indeterminate": r.indeterminate, "error": r.error} for T, r in curve]
    return Series("curve", rows, meta)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.9g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return None
        return float(f"{v:.9g}")
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if hasattr(v, "value"):
        return v.value
    return str(v)


def dumps_json(series: Series) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": series.kind,
        "metadata": _jsonable(series.metadata),
        "data": [dict(zip(series.columns, _jsonable(row))) for row in series.rows],
    }
    return json.dumps(doc, indent=1, sort_keys=False, allow_nan=False) + "\n"


def read_json(path) -> Series:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    cols = COLUMNS[doc["kind"]]
    rows = [[rec[c] for c in cols] for rec in doc["data"]]
    return Series(doc["kind"], rows, doc["metadata"])


def write_results(series: Series, path, fmt: str = "csv") -> Path:
    """Write a data product as CSV (plus metadata sidecar) or JSON."""
    path = Path(path)
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    if not path.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {path.parent}")
    try:
        if fmt == "json":
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(dumps_json(series))
        else:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(series.columns)
                for row in series.rows:
                    w.writerow([_fmt(v) for v in row])
            meta_path = path.with_name(path.name + ".meta.json")
            with open(meta_path, "w", encoding="utf-8", newline="\n") as fh:
                json.dump(
                    {"schema_version": SCHEMA_VERSION, "kind": series.kind, "metadata": _jsonable(series.metadata)},
                    fh,
                    indent=1,
                )
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def indexed_path(path, index: int, total: int) -> Path:
    """``out.csv`` -> ``out_1.csv`` when several files share one target."""
    path = Path(path)
    if total == 1:
        return path
    return path.with_name(f"{path.stem}_{index}{path.suffix}")


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def env_workers(default: int | None = None) -> int:
    val = os.environ.get("COHTRAP_WORKERS")
    if val:
        return max(1, int(val))
    return default if default is not None else (os.cpu_count() or 1)
