"""Ohmic-Lorentzian spectral densities of the bosonic bath.

All frequencies and temperatures are in units of the system frequency
(hbar = k_B = 1).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum


class SpectrumKind(str, Enum):
    EXACT_COTH = "exact_coth"
    HIGH_TEMPERATURE = "high_temperature"


@dataclass(frozen=True)
class BathSpec:
    gamma: float
    omega0: float
    temperature: float
    kind: SpectrumKind = SpectrumKind.EXACT_COTH

    def __post_init__(self):
        object.__setattr__(self, "kind", SpectrumKind(self.kind))
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if not self.omega0 >= 0:
            raise ValueError(f"omega0 must be >= 0, got {self.omega0}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.kind is SpectrumKind.HIGH_TEMPERATURE and self.temperature <= 0:
            raise ValueError("high_temperature spectrum requires temperature > 0")

    def replace(self, **changes) -> "BathSpec":
        data = asdict(self)
        data.update(changes)
        return BathSpec(**data)

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "omega0": self.omega0,
            "temperature": self.temperature,
            "kind": self.kind.value,
        }


@dataclass(frozen=True)
class ModelConfig:
    lam: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"omega must be > 0, got {self.omega}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    def with_lambda(self, lam: float) -> "ModelConfig":
        return ModelConfig(lam=lam, omega=self.omega)


def _lorentzian(bath: BathSpec, w: float) -> float:
    g2 = bath.gamma * bath.gamma
    dw = w - bath.omega0
    return g2 / (dw * dw + g2)


def vacuum_spectrum(bath: BathSpec, w: float) -> float:
    """J(w) = w gamma^2 / ((w - w0)^2 + gamma^2)."""
    if w < 0:
        raise ValueError(f"frequency must be >= 0, got {w}")
    return w * _lorentzian(bath, w)


def effective_spectrum(bath: BathSpec, w: float) -> float:
    """Thermal spectrum J(w) coth(w / 2T), or its high-temperature form.

    At w = 0 with T > 0 the removable limit 2T gamma^2 / (w0^2 + gamma^2)
    is returned.
    """
    if w < 0:
        raise ValueError(f"frequency must be >= 0, got {w}")
    T = bath.temperature
    if bath.kind is SpectrumKind.HIGH_TEMPERATURE:
        return 2.0 * T * _lorentzian(bath, w)
    if T == 0.0:
        return w * _lorentzian(bath, w)
    x = w / (2.0 * T)
    if x < 1e-8:
        # w coth(w/2T) -> 2T (1 + x^2/3)
        return 2.0 * T * (1.0 + x * x / 3.0) * _lorentzian(bath, w)
    return w * _lorentzian(bath, w) / math.tanh(x)
