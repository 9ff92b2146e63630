"""The angular elliptic problem 4G + G'' = g, G(+-L) = 0, for odd g."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .angular_field import ThetaField, cumulative_simpson, simpson_weights

QUARTER_PI = math.pi / 4


def is_quarter_pi(L: float) -> bool:
    return abs(L - QUARTER_PI) <= 1e-12


@dataclass(frozen=True)
class StreamSolution:
    G: ThetaField
    Gp: ThetaField
    Gpp: ThetaField
    source: ThetaField

    @property
    def L(self) -> float:
        return self.G.grid.L

    def residual(self) -> float:
        """sup |4G + G'' - g| over the grid."""
        return float(np.max(np.abs(4 * self.G.values + self.Gpp.values - self.source.values)))

    def boundary_derivatives(self) -> tuple[float, float]:
        return float(self.Gp.values[0]), float(self.Gp.values[-1])

    def _splines(self):
        cached = getattr(self, "_spl", None)
        if cached is None:
            th, G = self.G.full()
            _, Gp = self.Gp.full()
            cached = (CubicSpline(th, G), CubicSpline(th, Gp))
            object.__setattr__(self, "_spl", cached)
        return cached

    def evaluate(self, theta) -> tuple[np.ndarray, np.ndarray]:
        """(G, G') at arbitrary angles in [-L, L]."""
        theta = np.asarray(theta, dtype=float)
        if np.any(np.abs(theta) > self.L * (1 + 1e-12)):
            raise ValueError(f"angle outside [-L, L] with L={self.L}")
        sG, sGp = self._splines()
        return sG(theta), sGp(theta)


def _check_odd(g: ThetaField) -> None:
    if g.parity != "odd":
        raise ValueError("the source g must be an odd field")


def solve_stream_kernel(g: ThetaField) -> StreamSolution:
    """Closed-form kernel solve, valid on [-pi/4, pi/4] only.

    The kernel (|sin(2t - 2s)| - |sin(2t + 2s)|)/4 has a kink at s = t, so the
    integral is split there into two smooth running integrals.
    """
    _check_odd(g)
    grid = g.grid
    if not is_quarter_pi(grid.L):
        raise ValueError(f"kernel solver requires L = pi/4 (got {grid.L}); use solve_stream_fd")
    th, h = grid.nodes, grid.h
    s2, c2 = np.sin(2 * th), np.cos(2 * th)
    # S(t) = int_0^t g sin 2s, C(t) = int_t^L g cos 2s
    S = cumulative_simpson(g.values * s2, h)
    Ccum = cumulative_simpson(g.values * c2, h)
    C = Ccum[-1] - Ccum
    G = -0.5 * (c2 * S + s2 * C)
    G[0] = 0.0
    G[-1] = 0.0
    Gp = s2 * S - c2 * C
    Gpp = g.values - 4 * G
    return StreamSolution(
        ThetaField(grid, G, "odd"),
        ThetaField(grid, Gp, "even"),
        ThetaField(grid, Gpp, "odd"),
        g,
    )


def thomas(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Tridiagonal solve without pivoting; raises on a vanishing pivot."""
    n = diag.size
    c = np.empty(n)
    d = np.empty(n)
    piv = diag[0]
    if piv == 0.0:
        raise np.linalg.LinAlgError("singular tridiagonal system (zero pivot at row 0)")
    c[0] = upper[0] / piv if n > 1 else 0.0
    d[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - lower[i - 1] * c[i - 1]
        if abs(piv) < 1e-14 * (abs(diag[i]) + abs(lower[i - 1])):
            raise np.linalg.LinAlgError(f"singular tridiagonal system (zero pivot at row {i})")
        c[i] = upper[i] / piv if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / piv
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def solve_stream_fd(g: ThetaField, L: float | None = None) -> StreamSolution:
    """Second-order centered discretization on [0, L] with G(0) = G(L) = 0."""
    _check_odd(g)
    grid = g.grid
    if L is not None and abs(L - grid.L) > 1e-12:
        raise ValueError(f"L={L} does not match the grid half angle {grid.L}")
    if not (0 < grid.L < math.pi / 2):
        raise ValueError("need 0 < L < pi/2")
    h, n = grid.h, grid.n
    m = n - 2
    G = np.zeros(n)
    if m > 0:
        off = np.full(m - 1, 1.0 / h**2)
        diag = np.full(m, -2.0 / h**2 + 4.0)
        G[1:-1] = thomas(off, diag, off, g.values[1:-1].copy())
    Gpp = g.values - 4 * G
    Gp = np.empty(n)
    Gp[1:-1] = (G[2:] - G[:-2]) / (2 * h)
    # one-sided second-order ends; G(0) = 0 and oddness give G(-h) = -G(h)
    Gp[0] = G[1] / h
    Gp[-1] = (3 * G[-1] - 4 * G[-2] + G[-3]) / (2 * h)
    return StreamSolution(
        ThetaField(grid, G, "odd"),
        ThetaField(grid, Gp, "even"),
        ThetaField(grid, Gpp, "odd"),
        g,
    )


def solve_stream(g: ThetaField) -> StreamSolution:
    """Kernel solve at L = pi/4, finite differences otherwise."""
    if is_quarter_pi(g.grid.L):
        return solve_stream_kernel(g)
    return solve_stream_fd(g)


def gprime_boundary(g: ThetaField, L: float | None = None) -> tuple[float, float]:
    """(G'(0), G'(L)) from the sin 2t / cos 2t moment identities."""
    grid = g.grid
    if L is not None and abs(L - grid.L) > 1e-12:
        raise ValueError(f"L={L} does not match the grid half angle {grid.L}")
    L = grid.L
    w = simpson_weights(grid.n, grid.h)
    th = grid.nodes
    ms = float(w @ (g.values * np.sin(2 * th)))
    mc = float(w @ (g.values * np.cos(2 * th)))
    gp_L = ms / math.sin(2 * L)
    gp_0 = math.cos(2 * L) / math.sin(2 * L) * ms - mc
    return gp_0, gp_L


def mass_constant(L: float, samples: int = 4097) -> float:
    """c(L) with G'(L) >= c(L) int_0^L g for g, g' >= 0.

    Half the mass of a nondecreasing g sits in [L/2, L], where
    sin(2t)/sin(2L) is bounded below.
    """
    t = np.linspace(L / 2, L, samples)
    return 0.5 * float(np.min(np.sin(2 * t))) / math.sin(2 * L)


def velocity_from_g(sol: StreamSolution, r: float, theta: float) -> np.ndarray:
    """Cartesian velocity u = 2 r G(theta) e_theta - r G'(theta) e_r."""
    if r < 0:
        raise ValueError("radius must be non-negative")
    G, Gp = sol.evaluate(theta)
    G, Gp = float(G), float(Gp)
    e_r = np.array([math.cos(theta), math.sin(theta)])
    e_t = np.array([-math.sin(theta), math.cos(theta)])
    return 2 * r * G * e_t - r * Gp * e_r
