"""Angular grids, parity-tagged fields and discrete Hölder norms.

Fields live on the half interval [0, L]; values on [-L, 0] are recovered
from the parity tag. Hölder quantities are computed by an exhaustive scan
over point pairs, which is the definition itself and serves as its own
oracle.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

PARITIES = ("odd", "even")


@dataclass(frozen=True)
class AngularGrid:
    half_angle: float
    n: int
    nodes: np.ndarray = field(repr=False, compare=False)

    @property
    def L(self) -> float:
        return self.half_angle

    @property
    def h(self) -> float:
        return self.half_angle / (self.n - 1)

    def full_nodes(self) -> np.ndarray:
        """Nodes on [-L, L] (2n - 1 points)."""
        return np.concatenate([-self.nodes[:0:-1], self.nodes])


def make_grid(L: float, n: int) -> AngularGrid:
    L = float(L)
    if not (0.0 < L < math.pi / 2):
        raise ValueError(
            f"half angle must satisfy 0 < L < pi/2 (coercivity of 4 + d^2/dtheta^2 is lost at pi/2); got {L!r}"
        )
    if int(n) != n or n < 3:
        raise ValueError(f"grid needs at least 3 points, got {n!r}")
    n = int(n)
    nodes = np.linspace(0.0, L, n)
    nodes.setflags(write=False)
    return AngularGrid(L, n, nodes)


@dataclass(frozen=True)
class ThetaField:
    grid: AngularGrid
    values: np.ndarray
    parity: str

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {vals.shape}")
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be 'odd' or 'even', got {self.parity!r}")
        if self.parity == "odd":
            scale = max(1.0, float(np.max(np.abs(vals))))
            if abs(vals[0]) > 1e-12 * scale:
                raise ValueError(f"odd field must vanish at theta=0, got {vals[0]!r}")
            vals[0] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: AngularGrid, func, parity: str) -> "ThetaField":
        return cls(grid, np.asarray(func(grid.nodes), dtype=float) * np.ones(grid.n), parity)

    @property
    def sign(self) -> float:
        return -1.0 if self.parity == "odd" else 1.0

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """(theta, values) on [-L, L], reconstructed by parity."""
        left = self.sign * self.values[:0:-1]
        return self.grid.full_nodes(), np.concatenate([left, self.values])

    def with_values(self, values) -> "ThetaField":
        return ThetaField(self.grid, values, self.parity)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def integral(self) -> float:
        """Integral over [0, L]."""
        return float(simpson_weights(self.grid.n, self.grid.h) @ self.values)

    def derivative(self, order: int = 1) -> np.ndarray:
        return theta_derivative(self.values, self.grid.h, self.parity, order)


# ---------------------------------------------------------------------------
# quadrature and differencing on uniform grids


@lru_cache(maxsize=64)
def _simpson_weights_unit(n: int) -> np.ndarray:
    if n < 2:
        raise ValueError("need at least two nodes")
    w = np.zeros(n)
    m = n - 1
    if m == 1:
        w[:] = 0.5
    elif m % 2 == 0:
        w[0:m:2] += 1 / 3
        w[1:m:2] += 4 / 3
        w[2 : m + 1 : 2] += 1 / 3
    elif m == 3:
        w[:] = np.array([3, 9, 9, 3]) / 8
    else:
        # Simpson on the first m-3 intervals, 3/8 rule on the last three
        k = m - 3
        w[0:k:2] += 1 / 3
        w[1:k:2] += 4 / 3
        w[2 : k + 1 : 2] += 1 / 3
        w[k : k + 4] += np.array([3, 9, 9, 3]) / 8
    w.setflags(write=False)
    return w


def simpson_weights(n: int, h: float) -> np.ndarray:
    """Composite Simpson weights, with a 3/8 tail when n-1 is odd."""
    return h * _simpson_weights_unit(n)


def cumulative_simpson(y: np.ndarray, h: float) -> np.ndarray:
    """Running integral I[i] = int_0^{x_i} y, fourth order at every node."""
    y = np.asarray(y, dtype=float)
    n = y.size
    if n < 4:
        raise ValueError("cumulative_simpson needs at least 4 nodes")
    out = np.zeros(n)
    # even nodes: composite Simpson
    pair = h / 3 * (y[0:-2:2] + 4 * y[1:-1:2] + y[2::2])
    out[2::2] = np.cumsum(pair)
    # first interval from the cubic through the first four nodes
    out[1] = h * (9 * y[0] + 19 * y[1] - 5 * y[2] + y[3]) / 24
    # odd nodes >= 3: even node three back, then a 3/8 panel
    idx = np.arange(3, n, 2)
    out[idx] = out[idx - 3] + 3 * h / 8 * (y[idx - 3] + 3 * y[idx - 2] + 3 * y[idx - 1] + y[idx])
    return out


@lru_cache(maxsize=64)
def fd_weights(offsets: tuple[int, ...], order: int) -> np.ndarray:
    """Finite-difference weights on integer offsets (unit spacing)."""
    k = np.asarray(offsets, dtype=float)
    m = len(offsets)
    A = np.vander(k, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[order] = math.factorial(order)
    w = np.linalg.solve(A, rhs)
    w.setflags(write=False)
    return w


def theta_derivative(values: np.ndarray, h: float, parity: str, order: int = 1) -> np.ndarray:
    """Fourth-order derivative on [0, L].

    Centered stencils everywhere except the last two nodes; ghost values at
    theta < 0 come from the parity, the right end uses one-sided stencils.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    v = np.asarray(values, dtype=float)
    n = v.size
    if n < 7:
        raise ValueError("need at least 7 nodes for fourth-order stencils")
    s = -1.0 if parity == "odd" else 1.0
    ext = np.concatenate([s * v[2:0:-1], v])  # two ghost values
    center = fd_weights((-2, -1, 0, 1, 2), order)
    out = np.empty(n)
    out[: n - 2] = (
        center[0] * ext[0 : n - 2]
        + center[1] * ext[1 : n - 1]
        + center[2] * ext[2:n]
        + center[3] * ext[3 : n + 1]
        + center[4] * ext[4 : n + 2]
    )
    width = 5 if order == 1 else 6
    for i in (n - 2, n - 1):
        offs = tuple(range(n - width - i, n - i))
        w = fd_weights(offs, order)
        out[i] = w @ v[i + np.array(offs)]
    return out / h**order


# ---------------------------------------------------------------------------
# planar samples and Hölder norms


@dataclass(frozen=True)
class PlanarSample:
    points: np.ndarray
    values: np.ndarray
    alpha: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            pts = np.array([[p.x1, p.x2] for p in self.points], dtype=float)
        vals = np.array(self.values, dtype=float)
        if vals.shape[0] != pts.shape[0]:
            raise ValueError("points and values must have the same length")
        if pts.shape[0] < 2:
            raise ValueError("a planar sample needs at least 2 points")
        if not (0.0 < self.alpha <= 1.0):
            raise ValueError(f"Hölder exponent must lie in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.points[:, 0], self.points[:, 1])

    def with_values(self, values) -> "PlanarSample":
        return PlanarSample(self.points, values, self.alpha)


def holder_seminorm(points: np.ndarray, values: np.ndarray, alpha: float, block: int = 1024) -> float:
    """sup_{x != x'} |v(x) - v(x')| / |x - x'|^alpha by exhaustive pair scan.

    ``points`` may be (N,) for samples on a line or (N, d); ``values`` may be
    vector valued (N, m), in which case the Euclidean norm of the difference
    is used.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    V = np.asarray(values, dtype=float)
    if V.ndim == 1:
        V = V[:, None]
    n = X.shape[0]
    best = 0.0
    for start in range(0, n, block):
        stop = min(n, start + block)
        dx = X[start:stop, None, :] - X[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", dx, dx))
        dv = V[start:stop, None, :] - V[None, :, :]
        diff = np.sqrt(np.einsum("ijk,ijk->ij", dv, dv))
        rows = np.arange(start, stop)[:, None]
        upper = np.arange(n)[None, :] > rows
        coincident = upper & (dist == 0.0)
        if np.any(coincident & (diff > 0.0)):
            raise ValueError("coincident points carry different values; the Hölder quotient is undefined")
        mask = upper & (dist > 0.0)
        if np.any(mask):
            q = diff[mask] / dist[mask] ** alpha
            best = max(best, float(np.max(q)))
    return best


def holder_norm(sample: PlanarSample) -> float:
    """Plain C^alpha norm: sup |f| + Hölder seminorm."""
    vals = sample.values
    sup = float(np.max(np.abs(vals))) if vals.size else 0.0
    return sup + holder_seminorm(sample.points, vals, sample.alpha)


def _weighted(radii: np.ndarray, values: np.ndarray, power: float) -> np.ndarray:
    w = radii**power
    vals = np.asarray(values, dtype=float)
    if vals.ndim == 1:
        out = np.where(radii > 0, w * np.where(radii > 0, vals, 0.0), 0.0)
    else:
        safe = np.where((radii > 0)[:, None], vals, 0.0)
        out = w[:, None] * safe
    return out


def _ring_norm(points, radii, values, derivatives, k, alpha) -> float:
    if k == 0:
        sup = float(np.max(np.abs(values)))
        return sup + holder_seminorm(points, _weighted(radii, values, alpha), alpha)
    lower = _ring_norm(points, radii, values, derivatives, k - 1, 1.0)
    d = np.asarray(derivatives[k - 1], dtype=float)
    return lower + holder_seminorm(points, _weighted(radii, d, k + alpha), alpha)


def ring_holder_norm(sample: PlanarSample, k: int = 0, derivatives: Sequence[np.ndarray] | None = None) -> float:
    """Scale-invariant norm weighting the k-th derivative quotient by |x|^(k+alpha).

    ``derivatives[j-1]`` holds all j-th order partials at the sample points,
    shape (N, m_j), for j = 1..k. Samples at the origin get weight zero in
    the derivative terms.
    """
    if k < 0:
        raise ValueError("order k must be non-negative")
    if k > 0 and (derivatives is None or len(derivatives) < k):
        raise ValueError(f"order {k} needs derivative samples up to order {k}")
    return _ring_norm(sample.points, sample.radii, sample.values, derivatives, k, sample.alpha)


def product_rule_probe(f: PlanarSample, h: PlanarSample, alpha: float | None = None) -> float:
    """Measured ratio ||f h||_{C^a} / (||h||_ring * ||f||_{C^a}) on a shared point set."""
    if f.points.shape != h.points.shape or not np.array_equal(f.points, h.points):
        raise ValueError("f and h must be sampled on the same points")
    a = f.alpha if alpha is None else float(alpha)
    origin = f.radii == 0.0
    if np.any(origin) and np.any(f.values[origin] != 0.0):
        raise ValueError("f must vanish at the origin")
    fs = PlanarSample(f.points, f.values, a)
    hs = PlanarSample(h.points, h.values, a)
    denom = ring_holder_norm(hs) * holder_norm(fs)
    if denom == 0.0:
        return 0.0
    return holder_norm(fs.with_values(f.values * h.values)) / denom


# ---------------------------------------------------------------------------
# file formats


def write_field_csv(fld: ThetaField, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# parity={fld.parity}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "value"])
        for t, v in zip(fld.grid.nodes, fld.values):
            w.writerow([repr(float(t)), repr(float(v))])


def read_field_csv(path) -> ThetaField:
    path = Path(path)
    parity = None
    rows = []
    with path.open() as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "parity":
                    parity = val.strip()
                continue
            if line.startswith("theta"):
                continue
            t, v = line.split(",")
            rows.append((float(t), float(v)))
    if parity is None:
        raise ValueError(f"{path}: missing '# parity=odd|even' header")
    arr = np.array(rows)
    grid = make_grid(arr[-1, 0], len(arr))
    if not np.allclose(arr[:, 0], grid.nodes, rtol=0, atol=1e-12 * max(1.0, grid.L)):
        raise ValueError(f"{path}: theta column is not a uniform grid starting at 0")
    return ThetaField(grid, arr[:, 1], parity)


def write_planar_csv(sample: PlanarSample, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "value"])
        for (x1, x2), v in zip(sample.points, sample.values):
            w.writerow([repr(float(x1)), repr(float(x2)), repr(float(v))])


def read_planar_csv(path, alpha: float) -> PlanarSample:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return PlanarSample(data[:, :2], data[:, 2], alpha)
