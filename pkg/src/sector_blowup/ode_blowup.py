"""The Riccati comparison system and the acute-corner system.

Riccati:  A' = c B,  B' = c A B                  (first integral B - A^2/2)
Corner:   A' = C,  B' = -A C / k,  C' = -b^2 A B / k,  k = 1 - b^2
          (first integrals b^2 B^2 - C^2 and B + A^2 / (2k))
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

HALT_NORM = 1e12
Infinite = math.inf


@dataclass(frozen=True)
class RiccatiState:
    t: float
    A: float
    B: float
    c: float

    def vector(self) -> np.ndarray:
        return np.array([self.A, self.B], dtype=float)


@dataclass(frozen=True)
class CornerState:
    t: float
    A: float
    B: float
    C: float
    beta: float

    def vector(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C], dtype=float)


@dataclass
class OdeTrajectory:
    names: tuple[str, ...]
    t: np.ndarray
    y: np.ndarray  # shape (steps, dim)
    status: str  # "Completed" or "BlowupDetected"
    t_star: float  # inf unless blow-up was detected
    params: dict
    invariants: Callable[[np.ndarray], np.ndarray] | None = None

    def component(self, name: str) -> np.ndarray:
        return self.y[:, self.names.index(name)]

    def invariant_values(self) -> np.ndarray:
        return self.invariants(self.y)

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        drift = _drift_columns(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *self.names, *[f"drift{i + 1}" for i in range(drift.shape[1])]])
            for k in range(self.t.size):
                w.writerow([f"{v:.17g}" for v in (self.t[k], *self.y[k], *drift[k])])


# ---------------------------------------------------------------------------
# generic adaptive RK4


def _rk4(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _norm(y) -> float:
    return float(np.sum(np.abs(y)))


def integrate_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    t_end: float,
    rtol: float = 1e-8,
    invariants: Callable[[np.ndarray], np.ndarray] | None = None,
    invariant_scale: Callable[[np.ndarray], np.ndarray] | None = None,
    halt: float = HALT_NORM,
    h0: float | None = None,
    max_steps: int = 2_000_000,
) -> tuple[np.ndarray, np.ndarray, str, float]:
    """Step-halving RK4 for an autonomous system.

    A step is accepted when the Richardson error |y_half - y_full|/15 is below
    rtol*max(1, |y|) componentwise and, if invariants are supplied, their
    change over the step is below rtol*h*max(1, scale). When |y|_1 passes
    `halt` the final interval is bisected to the crossing and the remaining
    time to blow-up is extrapolated from the local power law of |y|_1.
    """
    y = np.array(y0, dtype=float)
    t = 0.0
    ts, ys = [t], [y.copy()]
    if _norm(y) == 0.0 or t_end <= 0:
        if t_end > 0:
            ts.append(t_end)
            ys.append(y.copy())
        return np.array(ts), np.array(ys), "Completed", Infinite
    fy = f(y)
    h = h0 if h0 is not None else min(t_end, 0.1 * max(1.0, _norm(y)) / max(_norm(fy), 1e-300))
    h = min(h, t_end)
    for _ in range(max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t)
        full = _rk4(f, y, h)
        half = _rk4(f, _rk4(f, y, 0.5 * h), 0.5 * h)
        if not (np.all(np.isfinite(half)) and np.all(np.isfinite(full))):
            h *= 0.25
            continue
        err = float(np.max(np.abs(half - full) / (15 * rtol * np.maximum(1.0, np.abs(half)))))
        ok = err <= 1.0
        if ok and invariants is not None:
            dI = np.abs(invariants(half[None, :])[0] - invariants(y[None, :])[0])
            sc = np.maximum(1.0, invariant_scale(half[None, :])[0]) if invariant_scale else 1.0
            ok = bool(np.all(dI <= rtol * max(h, 1e-3) * sc + 64 * np.finfo(float).eps * sc))
        if not ok:
            h *= max(0.2, 0.9 * err ** (-0.2)) if err > 1 else 0.5
            if h < 1e-300:
                raise FloatingPointError("step size underflow")
            continue
        # accepted
        if _norm(half) > halt:
            t_cross, y_cross, y_prev, t_prev = _bisect_crossing(f, y, t, h, halt)
            ts.append(t_cross)
            ys.append(y_cross)
            return np.array(ts), np.array(ys), "BlowupDetected", t_cross + _remaining_time(f, y_cross)
        t += h
        y = half
        ts.append(t)
        ys.append(y.copy())
        grow = 0.9 * err ** (-0.2) if err > 0 else 4.0
        h *= min(4.0, max(1.0, grow))
    else:
        raise RuntimeError("max_steps exceeded")
    return np.array(ts), np.array(ys), "Completed", Infinite


def _bisect_crossing(f, y, t, h, halt, iters: int = 60):
    lo, hi = 0.0, h
    ylo = y
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ym = _rk4(f, _rk4(f, y, 0.5 * mid), 0.5 * mid)
        if np.all(np.isfinite(ym)) and _norm(ym) <= halt:
            lo, ylo = mid, ym
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, t):
            break
    return t + lo, ylo, y, t


def _remaining_time(f, y) -> float:
    """T - t for |y| ~ K (T - t)^(-p), from q = N/N' and dq/dt = -1/p."""
    n = _norm(y)
    fy = f(y)
    dn = float(np.sign(y) @ fy)
    if dn <= 0:
        return 0.0
    q = n / dn
    # dq/dt = 1 - N N'' / N'^2, N'' by a short RK4 probe
    dt = 1e-4 * q
    y2 = _rk4(f, y, dt)
    q2 = _norm(y2) / float(np.sign(y2) @ f(y2))
    slope = (q2 - q) / dt
    if slope >= 0:
        return q
    return -q / slope


# ---------------------------------------------------------------------------
# Riccati comparison system


def riccati_rhs(c: float):
    def f(y):
        return np.array([c * y[1], c * y[0] * y[1]])

    return f


def riccati_invariant(y: np.ndarray) -> np.ndarray:
    y = np.atleast_2d(y)
    return (y[:, 1] - 0.5 * y[:, 0] ** 2)[:, None]


def _riccati_scale(y: np.ndarray) -> np.ndarray:
    y = np.atleast_2d(y)
    return (np.abs(y[:, 1]) + 0.5 * y[:, 0] ** 2)[:, None]


def integrate_riccati(s0: RiccatiState, t_end: float, rtol: float = 1e-8) -> OdeTrajectory:
    if not s0.c > 0:
        raise ValueError("the comparison constant c must be positive")
    t, y, status, t_star = integrate_adaptive(
        riccati_rhs(s0.c), s0.vector(), t_end, rtol, riccati_invariant, _riccati_scale
    )
    return OdeTrajectory(("A", "B"), t + s0.t, y, status, t_star + s0.t, {"c": s0.c}, riccati_invariant)


def riccati_blowup_time(c: float, A0: float, B0: float) -> float:
    """Closed-form blow-up time of A' = c B, B' = c A B (math.inf if none).

    On trajectories B = K + A^2/2 with K = B0 - A0^2/2, so A' = c(K + A^2/2).
    """
    if c == 0:
        return Infinite
    if c < 0:
        # A -> -A maps the system with c < 0 to the one with |c|
        c, A0 = -c, -A0
    K = B0 - 0.5 * A0**2
    if K > 0:
        s = math.sqrt(2 * K)
        return (1.0 / c) * (2.0 / s) * (math.pi / 2 - math.atan(A0 / s))
    if K == 0:
        return 2.0 / (c * A0) if A0 > 0 else Infinite
    s = math.sqrt(-2 * K)
    if A0 > s:
        return (1.0 / (c * s)) * math.log((A0 + s) / (A0 - s))
    return Infinite


# ---------------------------------------------------------------------------
# corner system


def corner_rhs(beta: float):
    k = 1.0 - beta**2
    b2 = beta**2

    def f(y):
        A, B, C = y
        return np.array([C, -A * C / k, -b2 * A * B / k])

    return f


def corner_invariant_fn(beta: float):
    k = 1.0 - beta**2

    def inv(y):
        y = np.atleast_2d(y)
        A, B, C = y[:, 0], y[:, 1], y[:, 2]
        return np.stack([beta**2 * B**2 - C**2, B + A**2 / (2 * k)], axis=1)

    def scale(y):
        y = np.atleast_2d(y)
        A, B, C = y[:, 0], y[:, 1], y[:, 2]
        return np.stack([beta**2 * B**2 + C**2, np.abs(B) + A**2 / (2 * k)], axis=1)

    return inv, scale


def integrate_corner(s0: CornerState, t_end: float, rtol: float = 1e-8) -> OdeTrajectory:
    if not (0 < s0.beta < 0.5):
        raise ValueError("beta must lie in (0, 1/2)")
    inv, scale = corner_invariant_fn(s0.beta)
    t, y, status, t_star = integrate_adaptive(corner_rhs(s0.beta), s0.vector(), t_end, rtol, inv, scale)
    return OdeTrajectory(("A", "B", "C"), t + s0.t, y, status, t_star + s0.t, {"beta": s0.beta}, inv)


def corner_blowup_time_quadrature(beta: float, A0: float, B0: float, C0: float) -> float:
    """Independent T* for C0 > 0: integrate dA / C(A) from A0 to infinity.

    Both first integrals express C as a function of A along the orbit; valid
    while C stays positive, which holds for A0, C0 >= 0 and B0 <= 0.
    """
    from scipy.integrate import quad

    k = 1.0 - beta**2
    I1 = beta**2 * B0**2 - C0**2
    I2 = B0 + A0**2 / (2 * k)

    def inv_speed(A):
        B = I2 - A**2 / (2 * k)
        return 1.0 / math.sqrt(beta**2 * B**2 - I1)

    val, _ = quad(inv_speed, A0, math.inf, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# invariant drift


def _drift_columns(traj: OdeTrajectory) -> np.ndarray:
    if traj.invariants is None:
        return np.zeros((traj.t.size, 0))
    I = traj.invariants(traj.y)
    if "C" in traj.names:
        _, scale = corner_invariant_fn(traj.params["beta"])
        sc = scale(traj.y)
    else:
        sc = _riccati_scale(traj.y)
    return np.abs(I - I[0]) / np.maximum(1.0, sc)


def invariant_drift(traj: OdeTrajectory) -> tuple[float, ...]:
    """Max drift of each first integral along the trajectory.

    The drift of I at time t is |I(t) - I(0)| / max(1, S(t)), with S the sum
    of the magnitudes of the terms in I. On O(1) states this is the absolute
    drift; near blow-up it accounts for cancellation between large terms.
    """
    if traj.t.size < 2:
        raise ValueError("need a trajectory of at least 2 points")
    d = _drift_columns(traj)
    return tuple(float(v) for v in d.max(axis=0))


def corner_invariants(traj: OdeTrajectory) -> tuple[float, float]:
    if "C" not in traj.names:
        raise ValueError("not a corner trajectory")
    d1, d2 = invariant_drift(traj)
    return d1, d2


# ---------------------------------------------------------------------------
# comparison with a PDE trajectory


def riccati_solution(c: float, A0: float, B0: float, t) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form (A, B)(t) of A' = c B, B' = c A B; inf past the blow-up time."""
    t = np.asarray(t, dtype=float)
    if c == 0:
        return np.full_like(t, A0), np.full_like(t, B0)
    flip = c < 0
    if flip:
        c, A0 = -c, -A0
    K = B0 - 0.5 * A0**2
    tau = c * t
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        if K > 0:
            s = math.sqrt(2 * K)
            arg = 0.5 * s * tau + math.atan(A0 / s)
            A = np.where(arg < math.pi / 2, s * np.tan(arg), np.inf)
        elif K == 0:
            den = 1 - 0.5 * A0 * tau
            A = np.where(den > 0, A0 / den, np.inf)
        else:
            s = math.sqrt(-2 * K)
            if A0 == -s:
                A = np.full_like(t, A0)
            else:
                v = (A0 - s) / (A0 + s) * np.exp(s * tau)
                A = np.where(v < 1, s * (1 + v) / (1 - v), np.inf)
    B = K + 0.5 * A**2
    return (-A if flip else A), B


def riccati_domination(t, A, B, c: float) -> tuple[float, float]:
    """Smallest relative margins min (A - A_ode) and min (B - B_ode) over t.

    The comparison trajectory starts from (A[0], B[0]) at t[0]; margins are
    scaled by max(1, |A_ode|) and max(1, |B_ode|). Non-negative margins mean
    the supplied trajectory dominates.
    """
    t, A, B = (np.asarray(v, dtype=float) for v in (t, A, B))
    Ao, Bo = riccati_solution(c, float(A[0]), float(B[0]), t - t[0])
    if not (np.all(np.isfinite(Ao)) and np.all(np.isfinite(Bo))):
        raise ValueError("the comparison trajectory blows up inside the time range")
    mA = (A - Ao) / np.maximum(1.0, np.abs(Ao))
    mB = (B - Bo) / np.maximum(1.0, np.abs(Bo))
    return float(mA.min()), float(mB.min())
