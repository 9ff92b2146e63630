"""Green's-function calculus on the sector {0 < theta < beta*pi}.

The conformal map z -> Z = z^(1/beta) sends the sector onto the upper half
plane, which gives closed forms for the Dirichlet Green's function and its
z-derivatives. Poisson solves are done by direct quadrature of these kernels.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .angular_field import PlanarSample, ThetaField, holder_seminorm, make_grid, ring_holder_norm
from .elliptic_1d import solve_stream_fd
from .presets import smooth_cutoff

TWO_PI = 2 * math.pi

# d/dx1 = 2 Re(d/dz), d/dx2 = -2 Im(d/dz) for the Wirtinger derivative
# d/dz = (d/dx1 - i d/dx2)/2; confirmed by calibrate_gradient_convention.
GRADIENT_CONVENTION = (2.0, -2.0)


# ---------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class SectorSpec:
    beta: float

    def __post_init__(self):
        if not (0 < self.beta <= 0.5):
            raise ValueError(f"beta must lie in (0, 1/2], got {self.beta!r}")

    @property
    def a(self) -> float:
        """Exponent 1/beta of the conformal map."""
        return 1.0 / self.beta

    @property
    def aperture(self) -> float:
        return self.beta * math.pi

    def require_decay(self) -> None:
        if not self.beta < 0.5:
            raise ValueError("Poisson quadrature needs beta < 1/2 so that the kernels decay fast enough")

    def contains(self, z, closed: bool = True, tol: float = 1e-12) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        th = np.angle(z)
        if closed:
            return (th >= -tol) & (th <= self.aperture + tol)
        return (np.abs(z) > 0) & (th > tol) & (th < self.aperture - tol)

    def boundary_distance(self, z: complex) -> float:
        r, th = abs(z), math.atan2(z.imag, z.real)
        d0 = r * math.sin(th) if th < math.pi / 2 else r
        d1 = r * math.sin(self.aperture - th) if self.aperture - th < math.pi / 2 else r
        return max(0.0, min(d0, d1, r))


@dataclass(frozen=True)
class SectorPoint:
    x1: float
    x2: float

    @classmethod
    def polar(cls, r: float, theta: float) -> "SectorPoint":
        return cls(r * math.cos(theta), r * math.sin(theta))

    @classmethod
    def from_complex(cls, z: complex) -> "SectorPoint":
        return cls(float(z.real), float(z.imag))

    @property
    def r(self) -> float:
        return math.hypot(self.x1, self.x2)

    @property
    def theta(self) -> float:
        return math.atan2(self.x2, self.x1)

    @property
    def z(self) -> complex:
        return complex(self.x1, self.x2)

    def check(self, spec: SectorSpec) -> "SectorPoint":
        if not spec.contains(self.z):
            raise ValueError(f"point ({self.x1}, {self.x2}) lies outside the closed sector")
        return self


def _as_complex(p) -> np.ndarray | complex:
    if isinstance(p, SectorPoint):
        return p.z
    if isinstance(p, (list, tuple)) and p and isinstance(p[0], SectorPoint):
        return np.array([q.z for q in p])
    if isinstance(p, tuple) and len(p) == 2 and all(np.isscalar(v) for v in p):
        return complex(p[0], p[1])
    return np.asarray(p, dtype=complex) if not np.isscalar(p) else complex(p)


def _pow(z, a: float):
    """Principal power z^a = r^a e^{i a theta}."""
    return np.power(np.asarray(z, dtype=complex), a)


# ---------------------------------------------------------------------------
# kernels


def _check_distinct(z, w) -> None:
    if np.any(np.asarray(z) == np.asarray(w)):
        raise ValueError("z = w: the kernel is singular on the diagonal")


def green(spec: SectorSpec, z, w):
    """(1/2pi) ln(|Z - W| / |conj(Z) - W|) with Z = z^(1/beta), W = w^(1/beta)."""
    z, w = _as_complex(z), _as_complex(w)
    _check_distinct(z, w)
    Z, W = _pow(z, spec.a), _pow(w, spec.a)
    val = (np.log(np.abs(Z - W)) - np.log(np.abs(np.conj(Z) - W))) / TWO_PI
    return float(val) if np.ndim(val) == 0 else val


def green_disk(spec: SectorSpec, R: float, z, w):
    """Dirichlet Green's function of the sector truncated at |z| = R."""
    z, w = _as_complex(z), _as_complex(w)
    if np.any(np.abs(z) > R) or np.any(np.abs(w) > R):
        raise ValueError("both points must satisfy |z|, |w| <= R")
    _check_distinct(z, w)
    Z, W = _pow(z, spec.a), _pow(w, spec.a)
    rho2 = R ** (2 * spec.a)  # squared radius of the image half disk
    val = (
        np.log(np.abs(Z - W))
        - np.log(np.abs(np.conj(Z) - W))
        + np.log(np.abs(rho2 - Z * W))
        - np.log(np.abs(rho2 - np.conj(Z) * W))
    ) / TWO_PI
    return float(val) if np.ndim(val) == 0 else val


def kernel_K(spec: SectorSpec, z, w):
    """K = d/dz G (Wirtinger derivative in the first argument)."""
    z, w = _as_complex(z), _as_complex(w)
    _check_distinct(z, w)
    a, beta = spec.a, spec.beta
    Z, W = _pow(z, a), _pow(w, a)
    Wb = np.conj(W)
    val = -_pow(z, a - 1) / (4 * math.pi * beta) * (Wb - W) / ((Z - Wb) * (Z - W))
    return complex(val) if np.ndim(val) == 0 else val


def kernel_P(spec: SectorSpec, z, w):
    """P = d/dz K; its integral against f gives d^2/dz^2 of the potential."""
    z, w = _as_complex(z), _as_complex(w)
    _check_distinct(z, w)
    a, beta = spec.a, spec.beta
    Z, W = _pow(z, a), _pow(w, a)
    Wb = np.conj(W)
    D = (Z - Wb) * (Z - W)
    bracket = (1 - beta) * D - Z * (2 * Z - W - Wb)
    val = -(Wb - W) / (4 * math.pi * beta**2) * _pow(z, a - 2) / D**2 * bracket
    return complex(val) if np.ndim(val) == 0 else val


# ---------------------------------------------------------------------------
# sources and quadrature


@dataclass(frozen=True)
class SectorSource:
    """A bounded source f(x1, x2) on the sector with quadrature hints."""

    func: Callable
    sup_norm: float
    radial_breaks: tuple[float, ...] = ()
    support_radius: float = math.inf
    name: str = "custom"

    def __call__(self, x1, x2):
        return self.func(x1, x2)

    def at(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        return np.asarray(self.func(w.real, w.imag), dtype=float) * np.ones(w.shape)


def as_source(f, spec: SectorSpec | None = None) -> SectorSource:
    if isinstance(f, SectorSource):
        return f
    if np.isscalar(f):
        c = float(f)
        return SectorSource(lambda x1, x2: np.full(np.shape(x1), c), abs(c), name=f"constant {c:g}")
    if callable(f):
        aperture = spec.aperture if spec is not None else math.pi / 2
        r = np.geomspace(1e-4, 1e4, 161)
        th = np.linspace(0, aperture, 33)
        R, T = np.meshgrid(r, th)
        vals = np.asarray(f(R * np.cos(T), R * np.sin(T)), dtype=float)
        return SectorSource(f, float(np.max(np.abs(vals))), name="sampled callable")
    raise TypeError("source must be a SectorSource, a callable or a number")


def constant_source(c: float = 1.0) -> SectorSource:
    return SectorSource(lambda x1, x2: np.full(np.shape(np.asarray(x1)), float(c)), abs(c), name=f"constant {c:g}")


def homogeneous_source(spec: SectorSpec, profile: Callable, sup_norm: float) -> SectorSource:
    """Degree-0 homogeneous f(r, theta) = profile(theta)."""

    def f(x1, x2):
        return profile(np.arctan2(x2, x1))

    return SectorSource(f, sup_norm, name="homogeneous profile")


def bump_source(center: complex, width: float, amplitude: float = 1.0) -> SectorSource:
    """Smooth bump amplitude*exp(1 - 1/(1 - s^2)), s = |w - center|/width."""
    c = complex(center)

    def f(x1, x2):
        s2 = ((np.asarray(x1) - c.real) ** 2 + (np.asarray(x2) - c.imag) ** 2) / width**2
        inside = s2 < 1
        out = np.zeros(np.shape(s2))
        out[inside] = amplitude * np.exp(1 - 1 / (1 - s2[inside]))
        return out

    return SectorSource(
        f,
        abs(amplitude),
        radial_breaks=(max(abs(c) - width, 0.0), abs(c) + width),
        support_radius=abs(c) + width,
        name="bump",
    )


@dataclass(frozen=True)
class QuadratureSpec:
    R_max: float | None = None  # None: chosen per target from the tail bound
    n_radial: int = 12  # Gauss points per radial panel
    n_angular: int = 12  # Gauss points per angular panel
    refine_depth: int = 14  # geometric levels of the local disk around w = z
    local_angular: int = 48  # periodic trapezoid points on each local circle
    angular_panels: int = 4
    tol: float = 1e-8  # relative truncation target for the radial tail
    workers: int = 1

    def __post_init__(self):
        if min(self.n_radial, self.n_angular, self.refine_depth, self.angular_panels) < 4:
            raise ValueError("panel counts must be at least 4")
        if self.local_angular < 8:
            raise ValueError("local_angular must be at least 8")


@lru_cache(maxsize=32)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel_nodes(breaks: Sequence[float], n: int) -> tuple[np.ndarray, np.ndarray]:
    b = np.unique(np.asarray(breaks, dtype=float))
    x, w = _gauss(n)
    lo, hi = b[:-1], b[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * w[None, :]
    return nodes.ravel(), weights.ravel()


def _tail_radius(spec: SectorSpec, r: float, order: int, rel_tol: float) -> float:
    """Smallest R (doubling from 4r) whose kernel tail bound is below rel_tol.

    With x = (r/R)^a the tail over |w| > R of the order-m kernel is at most
    const * sup|f| * r^(a-m) R^(2-a) / (a - 2) * M(x); the result is relative
    to the natural size r^(2-m) of the order-m integral.
    """
    a, beta = spec.a, spec.beta
    R = 4.0 * r
    for _ in range(400):
        x = (r / R) ** a
        q = (r / R) ** (a - 2) * beta * math.pi / (a - 2)
        if order == 0:
            bound = q / math.pi * 1.0 / (1 - x * x)
        elif order == 1:
            bound = q * a / (2 * math.pi) / (1 - x) ** 2
        else:
            bound = q / (2 * math.pi * beta**2) * ((1 - beta) * (1 + x) ** 2 + 2 * x * (1 + x)) / (1 - x) ** 4
        if bound <= rel_tol:
            return R
        R *= 1.5
    raise RuntimeError("tail bound did not converge; is beta < 1/2?")


def _sector_integral(
    spec: SectorSpec,
    quad: QuadratureSpec,
    z: complex,
    F: Callable[[np.ndarray], np.ndarray],
    R: float,
    breaks: Sequence[float] = (),
    singular: bool = True,
):
    """Integral of F(w) dw over the sector truncated at |w| = R.

    A smooth cutoff chi(|w - z| / rho0) splits F into a local part, done in
    polar coordinates about z (Gauss in rho on geometric panels, periodic
    trapezoid in angle, which is exact for the principal-value part), and a
    global part done on polar panels about the origin.
    """
    r = abs(z)
    th = math.atan2(z.imag, z.real)
    ap = spec.aperture
    total = 0.0 + 0.0j
    if singular:
        rho0 = 0.5 * spec.boundary_distance(z)
        if rho0 <= 0:
            raise ValueError("singular integrals need a target in the open sector")
        depth = quad.refine_depth
        rb = [0.0] + [rho0 * 2.0 ** (-k) for k in range(depth, -1, -1)]
        rho, wr = _panel_nodes(rb, quad.n_radial)
        m = quad.local_angular
        phi = TWO_PI * np.arange(m) / m
        w = z + rho[:, None] * np.exp(1j * phi)[None, :]
        wt = (wr * rho * smooth_cutoff(rho / rho0))[:, None] * (TWO_PI / m)
        total += np.sum(F(w) * wt)
    else:
        rho0 = 0.0
    # global polar panels
    rbreaks = {0.0, R}
    if r > 0:
        rbreaks |= {r * 2.0 ** (-j) for j in range(1, 16)}
        k = 1
        while r * 2.0**k < R:
            rbreaks.add(r * 2.0**k)
            k += 1
        if singular:
            rbreaks |= {r + s * rho0 for s in (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)}
            # grade toward z, whose mirror image sits 4 rho0 away across the boundary
            k = 1
            while rho0 * 2.0**k < r:
                rbreaks |= {r - rho0 * 2.0**k, r + rho0 * 2.0**k}
                k += 1
    rbreaks |= {b for b in breaks if 0 < b < R}
    rb = sorted(b for b in rbreaks if 0 <= b <= R)
    tb = set(np.linspace(0.0, ap, quad.angular_panels + 1))
    if singular and r > 0:
        dth = rho0 / r
        tb |= {th + s * dth for s in (-1.0, -0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75, 1.0)}
        k = 1
        while dth * 2.0**k < ap:
            tb |= {th - dth * 2.0**k, th + dth * 2.0**k}
            k += 1
    tb = sorted(t for t in tb if 0 <= t <= ap)
    rn, rw = _panel_nodes(rb, quad.n_radial)
    tn, tw = _panel_nodes(tb, quad.n_angular)
    w = rn[:, None] * np.exp(1j * tn)[None, :]
    wt = (rw * rn)[:, None] * tw[None, :]
    if singular:
        dist = np.abs(w - z)
        wt = wt * (1.0 - smooth_cutoff(dist / rho0))
        mask = dist > 0.5 * rho0 * (1 - 1e-12)
        vals = np.zeros(w.shape, dtype=complex)
        vals[mask] = F(w[mask])
        total += np.sum(vals * wt)
    else:
        total += np.sum(F(w) * wt)
    return total


def _radius_for(spec: SectorSpec, quad: QuadratureSpec, src: SectorSource, r: float, order: int) -> float:
    if quad.R_max is not None:
        if quad.R_max < 4 * r:
            raise ValueError(f"R_max={quad.R_max} must be at least 4|z| = {4 * r}")
        R = quad.R_max
    else:
        R = _tail_radius(spec, r, order, quad.tol)
    if math.isfinite(src.support_radius):
        R = min(R, max(src.support_radius, 4 * r)) if quad.R_max is None else R
    return R


def _map_targets(targets, quad: QuadratureSpec, fn):
    zs = [complex(_as_complex(t)) for t in targets]
    if quad.workers > 1 and len(zs) > 1:
        with ThreadPoolExecutor(max_workers=quad.workers) as ex:
            return list(ex.map(fn, zs))
    return [fn(z) for z in zs]


def _targets_list(targets):
    if isinstance(targets, (SectorPoint, complex)) or (isinstance(targets, tuple) and len(targets) == 2 and np.isscalar(targets[0])):
        return [targets], True
    return list(targets), False


# ---------------------------------------------------------------------------
# Poisson solve, gradient, Hessian


def poisson_solve(spec: SectorSpec, f, quad: QuadratureSpec | None = None, targets=()) -> np.ndarray:
    """Psi(z) = int G(z, w) f(w) dw at each target (0 on the boundary)."""
    spec.require_decay()
    quad = quad or QuadratureSpec()
    src = as_source(f, spec)
    tl, single = _targets_list(targets)

    def one(z: complex) -> float:
        if not spec.contains(z):
            raise ValueError(f"target {z} lies outside the sector")
        if spec.boundary_distance(z) <= 1e-14 * max(1.0, abs(z)):
            return 0.0
        if src.sup_norm == 0:
            return 0.0
        R = _radius_for(spec, quad, src, abs(z), 0)
        Z = _pow(z, spec.a)
        Zb = np.conj(Z)

        def F(w):
            W = _pow(w, spec.a)
            return (np.log(np.abs(Z - W)) - np.log(np.abs(Zb - W))) / TWO_PI * src.at(w)

        return float(_sector_integral(spec, quad, z, F, R, src.radial_breaks).real)

    out = np.array(_map_targets(tl, quad, one))
    return out[0] if single else out


def _dz_psi(spec: SectorSpec, src: SectorSource, quad: QuadratureSpec, z: complex) -> complex:
    if src.sup_norm == 0:
        return 0.0j
    R = _radius_for(spec, quad, src, abs(z), 1)
    a, beta = spec.a, spec.beta
    Z = _pow(z, a)
    pref = -_pow(z, a - 1) / (4 * math.pi * beta)

    def F(w):
        W = _pow(w, a)
        Wb = np.conj(W)
        return pref * (Wb - W) / ((Z - Wb) * (Z - W)) * src.at(w)

    return complex(_sector_integral(spec, quad, z, F, R, src.radial_breaks))


def grad_psi(spec: SectorSpec, f, quad: QuadratureSpec | None = None, targets=()) -> np.ndarray:
    """(d Psi/dx1, d Psi/dx2) from the K-integral and the calibrated convention."""
    spec.require_decay()
    quad = quad or QuadratureSpec()
    src = as_source(f, spec)
    tl, single = _targets_list(targets)
    sx, sy = GRADIENT_CONVENTION

    def one(z):
        if spec.boundary_distance(z) <= 0:
            raise ValueError("gradient targets must lie in the open sector")
        k = _dz_psi(spec, src, quad, z)
        return (sx * k.real, sy * k.imag)

    out = np.array(_map_targets(tl, quad, one))
    return out[0] if single else out


def pv_integral_P(spec: SectorSpec, z, quad: QuadratureSpec | None = None) -> complex:
    """Principal value of int P(z, w) dw over the sector, by quadrature."""
    spec.require_decay()
    quad = quad or QuadratureSpec()
    z = complex(_as_complex(z))
    R = _radius_for(spec, quad, constant_source(1.0), abs(z), 2)
    return complex(_sector_integral(spec, quad, z, lambda w: kernel_P(spec, z, w), R))


def pv_integral_P_exact(spec: SectorSpec) -> complex:
    """d^2/dz^2 of the f = 1 solution (x2^2 - tan(beta pi) x1 x2)/2."""
    return complex(-1.0, math.tan(spec.aperture)) / 4


def _dzz_psi(spec: SectorSpec, src: SectorSource, quad: QuadratureSpec, z: complex) -> tuple[complex, float]:
    fz = float(src.at(np.array([z]))[0])
    if src.sup_norm == 0:
        return 0.0j, fz
    if fz == 0:
        R = _radius_for(spec, quad, src, abs(z), 2)
    else:
        # f - f(z) does not vanish outside a finite support
        R = quad.R_max if quad.R_max is not None else _tail_radius(spec, abs(z), 2, quad.tol)
    breaks = tuple(src.radial_breaks) + ((src.support_radius,) if math.isfinite(src.support_radius) else ())

    def F(w):
        return kernel_P(spec, z, w) * (src.at(w) - fz)

    regular = complex(_sector_integral(spec, quad, z, F, R, breaks))
    pv = pv_integral_P(spec, z, quad) if fz != 0 else 0.0j
    return regular + fz * pv, fz


@dataclass(frozen=True)
class Hessian:
    h11: float
    h12: float
    h22: float

    @property
    def trace(self) -> float:
        return self.h11 + self.h22

    def matrix(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h12, self.h22]])


def hessian_psi(spec: SectorSpec, f, quad: QuadratureSpec | None = None, targets=()):
    """Hessian of Psi from the principal-value P-integral plus f(z).

    With d^2 Psi/dz^2 = (h11 - h22 - 2i h12)/4 and h11 + h22 = f(z):
    h11 = (f + 4 Re)/2, h22 = (f - 4 Re)/2, h12 = -2 Im.
    """
    spec.require_decay()
    quad = quad or QuadratureSpec()
    src = as_source(f, spec)
    tl, single = _targets_list(targets)

    def one(z):
        if spec.boundary_distance(z) <= 1e-14 * max(1.0, abs(z)):
            raise ValueError("Hessian targets must lie in the open sector (no one-sided stencils)")
        q, fz = _dzz_psi(spec, src, quad, z)
        return Hessian((fz + 4 * q.real) / 2, -2 * q.imag, (fz - 4 * q.real) / 2)

    out = _map_targets(tl, quad, one)
    return out[0] if single else out


def calibrate_gradient_convention(spec: SectorSpec | None = None, z: complex = complex(1.0, 0.3)) -> tuple[float, float]:
    """Find (s1, s2) with grad Psi = (s1 Re, s2 Im) of K * f from the f = 1 case."""
    spec = spec or SectorSpec(0.25)
    k = _dz_psi(spec, constant_source(1.0), QuadratureSpec(), z)
    t = math.tan(spec.aperture)
    exact = (-t * z.imag / 2, z.imag - t * z.real / 2)
    best, err = None, math.inf
    for s1 in (1.0, -1.0, 2.0, -2.0):
        for s2 in (1.0, -1.0, 2.0, -2.0):
            e = abs(s1 * k.real - exact[0]) + abs(s2 * k.imag - exact[1])
            if e < err:
                best, err = (s1, s2), e
    if err > 1e-6 * (1 + abs(z) ** 2):
        raise RuntimeError(f"no convention reproduces the f = 1 gradient (best error {err:.2e})")
    return best


def psi_constant_source(spec: SectorSpec, x1, x2):
    """Closed-form solution for f = 1: (x2^2 - tan(beta pi) x1 x2)/2."""
    return (np.asarray(x2) ** 2 - math.tan(spec.aperture) * np.asarray(x1) * np.asarray(x2)) / 2


def laplacian_fd(spec: SectorSpec, f, quad: QuadratureSpec, z: complex, h: float) -> float:
    """5-point Laplacian of poisson_solve output around z."""
    pts = [z + h, z - h, z + 1j * h, z - 1j * h, z]
    v = poisson_solve(spec, f, quad, pts)
    return float((v[0] + v[1] + v[2] + v[3] - 4 * v[4]) / h**2)


@dataclass
class PoissonRecord:
    x1: float
    x2: float
    psi: float
    du1: float
    du2: float
    h11: float
    h12: float
    h22: float


def solve_at_targets(spec: SectorSpec, f, quad: QuadratureSpec, targets) -> list[PoissonRecord]:
    """Psi, grad Psi and Hessian at each target (open sector)."""
    tl = [complex(_as_complex(t)) for t in targets]
    psi = np.atleast_1d(poisson_solve(spec, f, quad, tl))
    g = np.atleast_2d(grad_psi(spec, f, quad, tl))
    H = hessian_psi(spec, f, quad, tl)
    return [PoissonRecord(z.real, z.imag, float(p), float(d[0]), float(d[1]), h.h11, h.h12, h.h22) for z, p, d, h in zip(tl, psi, g, H)]


POISSON_COLUMNS = ("x1", "x2", "psi", "du1", "du2", "h11", "h12", "h22")


def write_poisson_csv(records: Sequence[PoissonRecord], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POISSON_COLUMNS)
        for rec in records:
            w.writerow([f"{getattr(rec, c):.17g}" for c in POISSON_COLUMNS])


def read_sector_csv(path) -> SectorSource:
    """Source from a CSV `r,theta,value` on a tensor grid; bilinear in (r, theta), 0 outside."""
    from scipy.interpolate import RegularGridInterpolator

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    r, th, v = data[:, 0], data[:, 1], data[:, 2]
    ru, tu = np.unique(r), np.unique(th)
    if ru.size * tu.size != v.size:
        raise ValueError("sector CSV must sample a full (r, theta) tensor grid")
    grid = np.full((ru.size, tu.size), np.nan)
    grid[np.searchsorted(ru, r), np.searchsorted(tu, th)] = v
    interp = RegularGridInterpolator((ru, tu), grid, bounds_error=False, fill_value=0.0)

    def f(x1, x2):
        x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
        pts = np.stack([np.hypot(x1, x2).ravel(), np.arctan2(x2, x1).ravel()], axis=1)
        return interp(pts).reshape(x1.shape)

    return SectorSource(f, float(np.max(np.abs(v))), radial_breaks=tuple(ru), support_radius=float(ru.max()), name=str(path))


# ---------------------------------------------------------------------------
# scale-invariant route: f = profile(theta) gives Psi = r^2 G(theta)


def homogeneous_hessian(spec: SectorSpec, profile: Callable, z: complex, n: int = 2049) -> Hessian:
    """Hessian of r^2 G(theta) with 4G + G'' = profile on (0, beta pi).

    The profile must be odd about the bisector; the 1D problem is then the
    angular one on [-L, L] with L = beta*pi/2.
    """
    L = spec.aperture / 2
    grid = make_grid(L, n)
    vals = profile(grid.nodes + L)
    if abs(float(profile(L))) > 1e-12:
        raise ValueError("profile must vanish on the bisector (odd about it)")
    g = ThetaField(grid, np.where(np.abs(grid.nodes) < 1e-15, 0.0, vals), "odd")
    sol = solve_stream_fd(g)
    r, th = abs(z), math.atan2(z.imag, z.real)
    G, Gp = sol.evaluate(th - L)
    G, Gp = float(G), float(Gp)
    Gpp = float(profile(th)) - 4 * G
    c, s = math.cos(th), math.sin(th)
    # polar second derivatives of r^2 G: rr = 2G, r/r = 2G, tt/r^2 = G'', rt/r = 2G', t/r^2 = G'
    prr, pr_r, ptt, prt, pt = 2 * G, 2 * G, Gpp, 2 * Gp, Gp
    h11 = c * c * prr + s * s * (pr_r + ptt) - 2 * s * c * (prt - pt)
    h22 = s * s * prr + c * c * (pr_r + ptt) + 2 * s * c * (prt - pt)
    h12 = s * c * (prr - pr_r - ptt) + (c * c - s * s) * (prt - pt)
    return Hessian(h11, h12, h22)


# ---------------------------------------------------------------------------
# corner Taylor probe


@dataclass
class TaylorReport:
    omega0: float
    hessian_sector_frame: np.ndarray
    fit_residual: float
    gradients: dict  # (frame, convention) -> 2x2 grad u
    predicted: dict
    matches: dict
    diagonal_zero: dict


def _rot(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def taylor_corner_probe(
    spec: SectorSpec,
    omega,
    quad: QuadratureSpec | None = None,
    radii: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
    n_angles: int = 7,
    tol: float = 1e-3,
) -> TaylorReport:
    """Fit the quadratic part of Psi near the corner and read off grad u(0).

    The fit (quadratic plus cubic monomials) is done in the sector frame; the
    Hessian is then rotated into the two bisector-aligned frames and grad u is
    reported for both perp conventions u = (-d2 Psi, d1 Psi) and
    u = (d2 Psi, -d1 Psi).
    """
    spec.require_decay()
    quad = quad or QuadratureSpec()
    src = as_source(omega, spec)
    if min(radii) < 1e-6:
        raise ValueError("fit radii too close to the corner for a well-conditioned fit")
    ang = spec.aperture * (np.arange(n_angles) + 0.5) / n_angles
    pts = np.array([r * np.exp(1j * t) for r in radii for t in ang])
    psi = np.atleast_1d(poisson_solve(spec, src, quad, list(pts)))
    x, y = pts.real, pts.imag
    M = np.stack([x * x, x * y, y * y, x**3, x * x * y, x * y * y, y**3], axis=1)
    if np.linalg.cond(M) > 1e12:
        raise ValueError("ill-conditioned Taylor fit")
    coef, *_ = np.linalg.lstsq(M, psi, rcond=None)
    resid = float(np.max(np.abs(M @ coef - psi)))
    H = np.array([[2 * coef[0], coef[1]], [coef[1], 2 * coef[2]]])
    omega0 = float(src.at(np.array([1e-12 * np.exp(0.5j * spec.aperture)]))[0])
    frames = {
        "sector": 0.0,
        "bisector_x1": spec.aperture / 2,  # sector symmetric about the x1 axis
        "bisector_x2": spec.aperture / 2 - math.pi / 2,  # symmetric about the x2 axis
    }
    grads, diag0, matches = {}, {}, {}
    b2 = spec.beta**2
    pred = {"d1u1": 0.0, "d2u2": 0.0, "d1u2": omega0 / (1 - b2), "d2u1": b2 * omega0 / (1 - b2)}
    for fname, phi in frames.items():
        Q = _rot(phi)
        Hf = Q.T @ H @ Q  # Hessian in coordinates rotated by -phi
        for conv, sgn in (("u=(-d2,d1)", 1.0), ("u=(d2,-d1)", -1.0)):
            # grad u[i, j] = d_j u_i
            gu = sgn * np.array([[-Hf[1, 0], -Hf[1, 1]], [Hf[0, 0], Hf[0, 1]]])
            grads[(fname, conv)] = gu
            scale = max(1.0, abs(omega0))
            diag0[(fname, conv)] = bool(abs(gu[0, 0]) <= tol * scale and abs(gu[1, 1]) <= tol * scale)
            matches[(fname, conv)] = bool(
                diag0[(fname, conv)]
                and abs(gu[1, 0] - pred["d1u2"]) <= tol * scale
                and abs(gu[0, 1] - pred["d2u1"]) <= tol * scale
            )
    return TaylorReport(omega0, H, resid, grads, pred, matches, diag0)


# ---------------------------------------------------------------------------
# critical counterexample


def counterexample_psi_xy(beta: float, x1, x2):
    """d^2/dx1dx2 of r^(1/beta) ln(r) sin(theta/beta) (0 at the origin)."""
    a = 1.0 / beta
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    r = np.hypot(x1, x2)
    th = np.arctan2(x2, x1)
    with np.errstate(divide="ignore", invalid="ignore"):
        L = np.log(r)
        val = np.power(r, a - 2) * (
            np.sin(th) * np.cos(th) * 2 * (a - 1) * (a * L + 1) * np.sin(a * th)
            + np.cos(2 * th) * a * ((a - 1) * L + 1) * np.cos(a * th)
        )
    return np.where(r > 0, val, 0.0)


def counterexample_source(beta: float, x1, x2):
    """Laplacian of the counterexample near the corner: (2/beta) r^(1/beta-2) sin(theta/beta)."""
    a = 1.0 / beta
    r = np.hypot(x1, x2)
    th = np.arctan2(x2, x1)
    return 2 * a * np.power(r, a - 2) * np.sin(a * th)


def sector_lattice(spec: SectorSpec, h: float, radius: float) -> np.ndarray:
    """Cartesian lattice points of spacing h in the closed sector, |x| <= radius."""
    n = int(math.ceil(radius / h))
    i, j = np.meshgrid(np.arange(0, n + 1), np.arange(0, n + 1), indexing="ij")
    x, y = (i * h).ravel(), (j * h).ravel()
    th = np.arctan2(y, x)
    keep = (np.hypot(x, y) <= radius + 1e-12) & (th <= spec.aperture + 1e-12)
    return np.stack([x[keep], y[keep]], axis=1)


@dataclass
class CounterexampleReport:
    beta: float
    alpha: float
    spacings: list[float]
    critical: list[float]
    subcritical: list[float]
    source: list[float]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.critical)


def critical_counterexample_probe(
    beta: float = 0.4, refinements: int = 3, h0: float = 1.0 / 16, radius: float = 0.5
) -> CounterexampleReport:
    """C^alpha seminorms of psi_xy at alpha = 1/beta - 2 on lattices h0, h0/2, ...

    Also returns the seminorm of the source and of psi_xy at alpha/2.
    """
    alpha = 1.0 / beta - 2.0
    if not (0 < alpha < 1):
        raise ValueError("need 1/beta - 2 in (0, 1)")
    spec = SectorSpec(beta)
    crit, sub, srcs, hs = [], [], [], []
    for k in range(refinements):
        h = h0 / 2**k
        pts = sector_lattice(spec, h, radius)
        F = counterexample_psi_xy(beta, pts[:, 0], pts[:, 1])
        S = counterexample_source(beta, pts[:, 0], pts[:, 1])
        crit.append(holder_seminorm(pts, F, alpha))
        sub.append(holder_seminorm(pts, F, alpha / 2))
        srcs.append(holder_seminorm(pts, S, alpha))
        hs.append(h)
    return CounterexampleReport(beta, alpha, hs, crit, sub, srcs)


# ---------------------------------------------------------------------------
# symmetrized Biot-Savart on the quadrant {|theta| < pi/4}

_QUAD = SectorSpec(0.5)
_ROT_IN = np.exp(-0.25j * math.pi)  # sector frame (0, pi/2) -> quadrant frame


def biot_savart(x: complex, y):
    """K(x, y) = (x - y)^perp / (2 pi |x - y|^2) as u1 + i u2; perp(a, b) = (-b, a)."""
    d = x - np.asarray(y, dtype=complex)
    return 1j / (TWO_PI * np.conj(d))


def symmetrized_kernel(x: complex, y):
    """(K(x,y) + K(x,y^perp) + K(x,-y) + K(x,-y^perp))/4."""
    y = np.asarray(y, dtype=complex)
    return 0.25 * (biot_savart(x, y) + biot_savart(x, 1j * y) + biot_savart(x, -y) + biot_savart(x, -1j * y))


@dataclass(frozen=True)
class QuadrantVorticity:
    """Vorticity on {|theta| < pi/4}, extended 4-fold symmetrically to the plane."""

    func: Callable  # f(x1, x2) on the quadrant
    support_radius: float
    radial_breaks: tuple[float, ...] = ()
    name: str = "custom"

    def at(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        return np.asarray(self.func(y.real, y.imag), dtype=float) * np.ones(y.shape)

    def scaled(self, lam: float) -> "QuadrantVorticity":
        f = self.func
        return QuadrantVorticity(lambda x1, x2: lam * f(x1, x2), self.support_radius, self.radial_breaks, self.name)


def symmetric_velocity(omega: QuadrantVorticity, x, quad: QuadratureSpec | None = None) -> np.ndarray:
    """u(x) = 4 int_quadrant Ktilde(x, y) omega(y) dy at points x in the open quadrant."""
    quad = quad or QuadratureSpec(n_radial=10, n_angular=10, refine_depth=10, local_angular=32)
    xs = np.atleast_1d(np.asarray(x, dtype=complex))
    out = np.empty((xs.size, 2))
    for k, xk in enumerate(xs):
        zs = xk / _ROT_IN  # target in the sector frame

        def F(w):
            y = w * _ROT_IN
            return 4 * symmetrized_kernel(xk, y) * omega.at(y)

        breaks = tuple(omega.radial_breaks) + (omega.support_radius,)
        R = max(omega.support_radius, 4 * abs(zs))
        u = complex(_sector_integral(_QUAD, quad, zs, F, R, breaks))
        out[k] = (u.real, u.imag)
    return out


def dyadic_targets(levels: Sequence[float], theta: float = math.pi / 8) -> np.ndarray:
    return np.array([r * np.exp(1j * theta) for r in levels])


@dataclass
class DecayReport:
    radii: np.ndarray
    ratios: np.ndarray  # |u(x)| / |x|^(1+alpha)
    certified_constant: float  # sup |omega(y)| / |y|^alpha on samples

    @property
    def sup_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    def loglog_slope(self) -> float:
        """Slope of log ratio against log |x| (about -alpha when unbounded)."""
        good = self.ratios > 0
        if good.sum() < 2:
            return 0.0
        return float(np.polyfit(np.log(self.radii[good]), np.log(self.ratios[good]), 1)[0])


def _sample_quadrant(support: float, n: int = 64) -> np.ndarray:
    r = np.geomspace(1e-4 * support, support, n)
    t = np.linspace(-math.pi / 4, math.pi / 4, n)
    R, T = np.meshgrid(r, t)
    return (R * np.exp(1j * T)).ravel()


def decay_probe(
    alpha: float,
    omega: QuadrantVorticity,
    levels: Sequence[float] = tuple(2.0 ** (-k) for k in range(4, -1, -1)),
    theta: float = math.pi / 8,
    quad: QuadratureSpec | None = None,
) -> DecayReport:
    """sup over dyadic targets of |u(x)| / |x|^(1+alpha) for the quadrant flow."""
    ys = _sample_quadrant(omega.support_radius)
    cert = float(np.max(np.abs(omega.at(ys)) / np.abs(ys) ** alpha))
    xs = dyadic_targets(levels, theta)
    u = symmetric_velocity(omega, xs, quad)
    ratios = np.hypot(u[:, 0], u[:, 1]) / np.abs(xs) ** (1 + alpha)
    return DecayReport(np.abs(xs), ratios, cert)


def symmetrized_velocity_bound(
    omega: QuadrantVorticity,
    quad: QuadratureSpec | None = None,
    n_r: int = 12,
    n_theta: int = 5,
) -> float:
    """max |u(x)| / sup |y| |omega(y)| over a polar grid of targets in the quadrant."""
    ys = _sample_quadrant(omega.support_radius, 128)
    ys = np.concatenate([ys, np.linspace(0, omega.support_radius, 2001)[1:] * np.exp(0.2j)])
    weight = float(np.max(np.abs(ys) * np.abs(omega.at(ys))))
    if weight == 0:
        return 0.0
    r = np.geomspace(0.02 * omega.support_radius, 2.0 * omega.support_radius, n_r)
    t = (np.arange(n_theta) + 0.5) / n_theta * (math.pi / 2) - math.pi / 4
    xs = (r[:, None] * np.exp(1j * t)[None, :]).ravel()
    u = symmetric_velocity(omega, xs, quad)
    return float(np.max(np.hypot(u[:, 0], u[:, 1])) / weight)


def kernel_weight_constant(theta: float, quad: QuadratureSpec | None = None, R: float = 1e4) -> float:
    """int over the plane of |Ktilde(e, y)| / |y| dy for the unit vector e at angle theta.

    This bounds |u(x)| / sup |y| |omega(y)| over all vorticities.
    """
    quad = quad or QuadratureSpec()
    e = complex(math.cos(theta), math.sin(theta))

    # integrate over the plane as 4 rotated copies of the quadrant; |Ktilde| is 4-fold symmetric in y
    def F(w):
        y = w * _ROT_IN
        return 4 * np.abs(symmetrized_kernel(e, y)) / np.abs(y)

    zs = e / _ROT_IN
    return float(_sector_integral(_QUAD, quad, zs, F, R).real)


# ---------------------------------------------------------------------------
# elliptic estimate probe


def sector_targets(spec: SectorSpec, n_r: int, n_theta: int, r_min: float = 0.1, r_max: float = 1.0) -> np.ndarray:
    r = np.geomspace(r_min, r_max, n_r)
    t = spec.aperture * (np.arange(n_theta) + 0.5) / n_theta
    return (r[:, None] * np.exp(1j * t)[None, :]).ravel()


@dataclass
class EllipticProbeReport:
    names: list[str]
    levels: list[int]
    ratios: dict  # name -> list of ratios per level
    log_constants: dict  # name -> list of sup-norm constants per level


def elliptic_estimate_probe(
    spec: SectorSpec,
    alpha: float,
    sources: dict[str, SectorSource],
    levels: Sequence[tuple[int, int]] = ((3, 3), (5, 5), (9, 9)),
    quad: QuadratureSpec | None = None,
    r_min: float = 0.1,
    r_max: float = 1.0,
) -> EllipticProbeReport:
    """Measured |Hess Psi|_{ring C^alpha} / |f|_{ring C^alpha} on refining target grids.

    Also reports |Hess Psi|_inf / (|f|_inf (1 + ln(1 + |f|_ring / |f|_inf))).
    """
    quad = quad or QuadratureSpec(n_radial=10, n_angular=10)
    ratios, logc = {}, {}
    for name, src in sources.items():
        ratios[name], logc[name] = [], []
        for n_r, n_t in levels:
            zs = sector_targets(spec, n_r, n_t, r_min, r_max)
            H = hessian_psi(spec, src, quad, list(zs))
            hv = np.array([[h.h11, h.h12, h.h22] for h in H])
            fv = src.at(zs)
            pts = np.stack([zs.real, zs.imag], axis=1)
            nh = ring_holder_norm(PlanarSample(pts, hv, alpha))
            nf = ring_holder_norm(PlanarSample(pts, fv, alpha))
            ratios[name].append(nh / nf if nf > 0 else 0.0)
            finf = float(np.max(np.abs(fv)))
            hinf = float(np.max(np.linalg.norm(hv, axis=1)))
            logc[name].append(hinf / (finf * (1 + math.log(1 + nf / finf))) if finf > 0 else 0.0)
    return EllipticProbeReport(list(sources), [n_r * n_t for n_r, n_t in levels], ratios, logc)


