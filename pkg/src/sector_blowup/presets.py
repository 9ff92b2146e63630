"""Named initial data and sector sources."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .angular_field import AngularGrid, ThetaField


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str  # "1d" or "sector"
    description: str
    g0: Callable | None = None
    P0: Callable | None = None
    source: Callable | None = None  # f(r, theta, beta) for sector presets

    def fields(self, grid: AngularGrid) -> tuple[ThetaField, ThetaField]:
        if self.kind != "1d":
            raise ValueError(f"preset {self.name!r} is a sector source, not 1D data")
        return (
            ThetaField.from_function(grid, self.g0, "odd"),
            ThetaField.from_function(grid, self.P0, "even"),
        )

    def sector_source(self, beta: float) -> Callable:
        """f(x1, x2) for the sector of aperture beta*pi."""
        if self.kind != "sector":
            raise ValueError(f"preset {self.name!r} is 1D data, not a sector source")
        src = self.source

        def f(x1, x2):
            x1 = np.asarray(x1, dtype=float)
            x2 = np.asarray(x2, dtype=float)
            return src(np.hypot(x1, x2), np.arctan2(x2, x1), beta)

        return f


def _zero(theta):
    return np.zeros_like(np.asarray(theta, dtype=float))


def smooth_cutoff(r, r0: float = 0.5, r1: float = 1.0):
    """C-infinity cutoff equal to 1 on r <= r0 and 0 on r >= r1."""
    r = np.asarray(r, dtype=float)
    s = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)

    def bump(x):
        return np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)

    a, b = bump(1 - s), bump(s)
    return a / (a + b)


def _critical_source(r, theta, beta):
    a = 1.0 / beta
    return 2 * a * np.power(r, a - 2) * np.sin(a * theta) * smooth_cutoff(r)


PRESETS: dict[str, Preset] = {
    "zero": Preset("zero", "1d", "g0 = 0, P0 = 0 (stationary)", _zero, _zero),
    "blowup_quadratic": Preset(
        "blowup_quadratic", "1d", "g0 = 0, P0 = theta^2 (finite-time blow-up data)", _zero, lambda t: np.asarray(t) ** 2
    ),
    "euler_sin2theta": Preset(
        "euler_sin2theta", "1d", "g0 = sin 2theta, P0 = 0 (pure transport)", lambda t: np.sin(2 * np.asarray(t)), _zero
    ),
    "constant_one": Preset(
        "constant_one", "sector", "f = 1 on the sector", source=lambda r, th, beta: np.ones_like(r * th)
    ),
    "critical_source": Preset(
        "critical_source",
        "sector",
        "f = (2/beta) r^(1/beta - 2) sin(theta/beta), cut off smoothly at r = 1",
        source=_critical_source,
    ),
}


def preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; valid presets: {', '.join(sorted(PRESETS))}") from None


def critical_exponent(beta: float) -> float:
    """alpha = 1/beta - 2, the borderline Hölder exponent on the sector."""
    return 1.0 / beta - 2.0


__all__ = ["Preset", "PRESETS", "preset", "smooth_cutoff", "critical_exponent"]
