"""Run configuration: flat ``section.key = value`` files plus overrides.

Example::

    # reference bath, trapping coupling solved on the fly
    bath.gamma = 5
    bath.omega0 = 10
    bath.temperature = 100
    model.lambda = auto

Precedence is overrides > file > defaults.  Every problem found is
collected and reported at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .kernels import QuadratureConfig
from .spectral import BathSpec, ModelConfig, SpectrumKind

DEFAULTS: dict[str, Any] = {
    "bath.gamma": 5.0,
    "bath.omega0": 10.0,
    "bath.temperature": 100.0,
    "bath.kind": "exact_coth",
    "model.omega": 1.0,
    "model.lambda": "auto",
    "quadrature.rel_tol": 1e-8,
    "quadrature.abs_tol": 1e-12,
    "quadrature.omega_max": None,
    "quadrature.max_subdivisions": 2000,
    "run.ode_tol": 1e-10,
    "run.t_end": "auto",
    "run.t0": None,
    "run.grid_n": 41,
    "run.scan_mode": "propagator",
    "run.rwa": False,
    "run.initials": "0.8,0.4; 0.6,0.4; 0.8,0.2",
    "curve.t_min": 0.01,
    "curve.t_max": 100.0,
    "curve.n_points": 41,
    "output.path": None,
    "output.format": "csv",
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in problems))


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        values[key] = value
    if problems:
        raise ConfigError(problems)
    return values


def load_config_file(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"cannot read config file {path}: {exc.strerror or exc}"]) from exc
    return parse_config_text(text, str(path))


@dataclass
class RunConfig:
    bath: BathSpec
    lam: Optional[float]  # None means solve for the trapping coupling
    omega: float
    quadrature: QuadratureConfig
    ode_tol: float
    t_end: Optional[float]  # None means automatic
    t0: Optional[float]
    grid_n: int
    scan_mode: str
    rwa: bool
    initials: list[tuple[float, float]]
    curve_t_min: float
    curve_t_max: float
    curve_n_points: int
    out: Optional[str]
    fmt: str
    raw: dict = field(default_factory=dict)

    @property
    def lambda_auto(self) -> bool:
        return self.lam is None

    def model(self, lam: float) -> ModelConfig:
        return ModelConfig(lam=lam, omega=self.omega)

    def to_dict(self) -> dict:
        return dict(self.raw)


def _is_auto(v) -> bool:
    return v is None or (isinstance(v, str) and v.strip().lower() in ("auto", "none", ""))


def _float(key, v, problems, positive=False, nonneg=False, allow_auto=False):
    if allow_auto and _is_auto(v):
        return None
    try:
        x = float(v)
    except (TypeError, ValueError):
        problems.append(f"{key}: expected a number, got {v!r}")
        return None
    if not math.isfinite(x):
        problems.append(f"{key}: must be finite, got {v!r}")
    elif positive and not x > 0:
        problems.append(f"{key}: must be > 0, got {x}")
    elif nonneg and not x >= 0:
        problems.append(f"{key}: must be >= 0, got {x}")
    return x


def _int(key, v, problems):
    try:
        f = float(v)
        if f != int(f):
            raise ValueError
        return int(f)
    except (TypeError, ValueError):
        problems.append(f"{key}: expected an integer, got {v!r}")
        return None


def _bool(key, v, problems):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    problems.append(f"{key}: expected a boolean, got {v!r}")
    return False


def parse_initials(text: str) -> list[tuple[float, float]]:
    out = []
    for part in str(text).split(";"):
        part = part.strip()
        if not part:
            continue
        x, y = (float(s) for s in part.split(","))
        out.append((x, y))
    return out


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, file values and overrides, then validate everything."""
    merged = dict(DEFAULTS)
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    p: list[str] = []

    gamma = _float("bath.gamma", merged["bath.gamma"], p, positive=True)
    omega0 = _float("bath.omega0", merged["bath.omega0"], p, nonneg=True)
    temp = _float("bath.temperature", merged["bath.temperature"], p, nonneg=True)
    kind = str(merged["bath.kind"]).strip().lower()
    if kind not in {k.value for k in SpectrumKind}:
        p.append(f"bath.kind: expected one of {[k.value for k in SpectrumKind]}, got {kind!r}")
    elif kind == SpectrumKind.HIGH_TEMPERATURE.value and temp is not None and temp <= 0:
        p.append("bath.kind: high_temperature requires bath.temperature > 0")

    omega = _float("model.omega", merged["model.omega"], p, positive=True)
    lam = _float("model.lambda", merged["model.lambda"], p, nonneg=True, allow_auto=True)

    rel_tol = _float("quadrature.rel_tol", merged["quadrature.rel_tol"], p, positive=True)
    abs_tol = _float("quadrature.abs_tol", merged["quadrature.abs_tol"], p, positive=True)
    omega_max = _float("quadrature.omega_max", merged["quadrature.omega_max"], p, positive=True, allow_auto=True)
    max_sub = _int("quadrature.max_subdivisions", merged["quadrature.max_subdivisions"], p)
    if max_sub is not None and max_sub < 10:
        p.append(f"quadrature.max_subdivisions: must be >= 10, got {max_sub}")
    if omega_max is not None and omega is not None and omega0 is not None:
        if omega_max <= max(2 * omega, omega0):
            p.append(f"quadrature.omega_max: must exceed max(2*omega, omega0), got {omega_max}")

    ode_tol = _float("run.ode_tol", merged["run.ode_tol"], p, positive=True)
    t_end = _float("run.t_end", merged["run.t_end"], p, positive=True, allow_auto=True)
    t0 = _float("run.t0", merged["run.t0"], p, positive=True, allow_auto=True)
    grid_n = _int("run.grid_n", merged["run.grid_n"], p)
    if grid_n is not None and (grid_n < 3 or grid_n % 2 == 0):
        p.append(f"run.grid_n: must be odd and >= 3, got {grid_n}")
    scan_mode = str(merged["run.scan_mode"]).strip().lower()
    if scan_mode not in ("propagator", "direct"):
        p.append(f"run.scan_mode: expected propagator or direct, got {scan_mode!r}")
    rwa = _bool("run.rwa", merged["run.rwa"], p)
    try:
        initials = parse_initials(merged["run.initials"])
        for x, y in initials:
            if x * x + y * y > 1 + 1e-12:
                p.append(f"run.initials: ({x}, {y}) lies outside the unit disk")
        if not initials:
            p.append("run.initials: at least one initial state is required")
    except ValueError:
        p.append(f"run.initials: expected 'x,y; x,y; ...', got {merged['run.initials']!r}")
        initials = []

    t_min = _float("curve.t_min", merged["curve.t_min"], p, positive=True)
    t_max = _float("curve.t_max", merged["curve.t_max"], p, positive=True)
    n_pts = _int("curve.n_points", merged["curve.n_points"], p)
    if t_min is not None and t_max is not None and t_min > t_max:
        p.append(f"curve.t_min ({t_min}) exceeds curve.t_max ({t_max})")
    if n_pts is not None and n_pts < 1:
        p.append(f"curve.n_points: must be >= 1, got {n_pts}")

    fmt = str(merged["output.format"]).strip().lower()
    if fmt not in ("csv", "json"):
        p.append(f"output.format: expected csv or json, got {fmt!r}")
    out = merged["output.path"]
    out = None if _is_auto(out) else str(out)

    if p:
        raise ConfigError(p)

    bath = BathSpec(gamma, omega0, temp, SpectrumKind(kind))
    quad = QuadratureConfig(rel_tol, abs_tol, omega_max, max_sub)
    raw = {k: merged[k] for k in DEFAULTS}
    return RunConfig(
        bath=bath,
        lam=lam,
        omega=omega,
        quadrature=quad,
        ode_tol=ode_tol,
        t_end=t_end,
        t0=t0,
        grid_n=grid_n,
        scan_mode=scan_mode,
        rwa=rwa,
        initials=initials,
        curve_t_min=t_min,
        curve_t_max=t_max,
        curve_n_points=n_pts,
        out=out,
        fmt=fmt,
        raw=raw,
    )
