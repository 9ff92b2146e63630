"""Method-of-lines integration of the scale-invariant angular system

    g_t + 2 G g' = sin(theta) P + cos(theta) P'
    P_t + 2 G P' = P G'

with 4G + G'' = g, g odd and P even on [-L, L].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .angular_field import ThetaField, make_grid, simpson_weights, theta_derivative, write_field_csv
from .elliptic_1d import StreamSolution, gprime_boundary, mass_constant, solve_stream
from .presets import preset as get_preset


class RunStatus(str, Enum):
    COMPLETED = "Completed"
    BLOWUP_DETECTED = "BlowupDetected"
    STEP_COLLAPSE = "StepCollapse"


class BlowupSuspected(RuntimeError):
    """Non-finite values appeared during a step; carries the last valid state."""

    def __init__(self, state: "State1D", msg: str = "non-finite values during step"):
        super().__init__(msg)
        self.state = state


class NoFit(ValueError):
    """Blow-up time extrapolation is not possible for this record."""


class Inconclusive(RuntimeError):
    """A stability twin run blew up inside the comparison window."""


@dataclass(frozen=True)
class State1D:
    t: float
    g: ThetaField
    P: ThetaField
    stream: StreamSolution

    @property
    def grid(self):
        return self.g.grid

    def scale(self) -> float:
        """max(1, |g|, |P|, |P'|): the size used for tolerances and caps."""
        Pp = theta_derivative(self.P.values, self.grid.h, "even", 1)
        return max(1.0, self.g.sup(), self.P.sup(), float(np.max(np.abs(Pp))))

    def hypotheses(self) -> dict[str, bool]:
        """Discrete check of the blow-up hypotheses on [0, L] at this state."""
        h = self.grid.h
        g, P = self.g.values, self.P.values
        gp = theta_derivative(g, h, "odd", 1)
        Pp = theta_derivative(P, h, "even", 1)
        Ppp = theta_derivative(P, h, "even", 2)
        tol = 1e-10 * self.scale()
        return {
            "g_and_gprime_nonnegative": bool(g.min() >= -tol and gp.min() >= -tol),
            "P_Pprime_PplusPpp_nonnegative": bool(P.min() >= -tol and Pp.min() >= -tol and (P + Ppp).min() >= -tol),
            "P_at_L_exceeds_sqrt2_P_at_0": bool(P[-1] > math.sqrt(2) * P[0]),
        }


@dataclass(frozen=True)
class Sim1DConfig:
    L: float = math.pi / 4
    n: int = 513
    t_end: float = 10.0
    cfl: float = 0.5
    dt_init: float | None = None
    dt_min: float = 1e-10
    blowup_cap: float = 1e6  # multiple of the initial scale
    output_stride: int = 1
    max_steps: int = 10_000_000
    preset: str | None = "blowup_quadratic"
    snapshot_stride: int = 0  # keep every k-th output state (0 keeps none)


@dataclass
class DiagnosticRow:
    t: float
    dt: float
    g_linf: float
    g_l1: float
    g_int: float
    P_at_L: float
    P_at_0: float
    Gp_at_L: float
    Gp_at_0: float
    blowup_functional: float
    min_g: float
    min_gp: float
    min_P: float
    min_Pp: float
    min_PplusPpp: float
    balance_residual: float
    scale: float


CSV_COLUMNS = (
    "t",
    "dt",
    "g_linf",
    "g_l1",
    "P_at_L",
    "P_at_0",
    "Gp_at_L",
    "Gp_at_0",
    "blowup_functional",
    "min_g",
    "min_gp",
    "min_P",
    "min_Pp",
    "min_PplusPpp",
    "balance_residual",
)


@dataclass
class RunDiagnostics:
    rows: list[DiagnosticRow] = field(default_factory=list)
    status: RunStatus | None = None

    def append(self, row: DiagnosticRow) -> None:
        if self.rows and row.t <= self.rows[-1].t:
            raise ValueError("diagnostic rows must be strictly increasing in t")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([f"{getattr(r, c):.17g}" for c in CSV_COLUMNS])


@dataclass
class RunResult:
    status: RunStatus
    state: State1D
    diagnostics: RunDiagnostics
    snapshots: list[State1D]
    steps: int
    message: str = ""

    @property
    def t_final(self) -> float:
        return self.state.t


# ---------------------------------------------------------------------------
# state construction and right-hand side


def _as_field(obj, grid, parity: str, which: str) -> ThetaField:
    if isinstance(obj, ThetaField):
        if obj.parity != parity:
            raise ValueError(f"{which} must be {parity}, got a field tagged {obj.parity}")
        if obj.grid != grid:
            raise ValueError(f"{which} lives on a different grid")
        return obj
    if callable(obj):
        return ThetaField.from_function(grid, obj, parity)
    raise TypeError(f"{which} must be a ThetaField or a callable")


def init_state(g0, P0, L: float | None = None, n: int | None = None) -> State1D:
    """Initial state from fields, callables, or a preset name (passed as g0)."""
    if isinstance(g0, str):
        if P0 is not None:
            raise ValueError("pass a preset name alone, with P0=None")
        if L is None or n is None:
            raise ValueError("a preset needs L and n")
        g0, P0 = get_preset(g0).fields(make_grid(L, n))
    if isinstance(g0, ThetaField):
        grid = g0.grid
        if (L is not None and abs(L - grid.L) > 1e-12) or (n is not None and n != grid.n):
            raise ValueError("L, n disagree with the grid of g0")
    elif isinstance(P0, ThetaField):
        grid = P0.grid
    else:
        if L is None or n is None:
            raise ValueError("callables need L and n")
        grid = make_grid(L, n)
    g = _as_field(g0, grid, "odd", "g0")
    P = _as_field(P0, grid, "even", "P0")
    return State1D(0.0, g, P, solve_stream(g))


def _rhs(grid, g: np.ndarray, P: np.ndarray, stream: StreamSolution | None = None):
    """Semi-discrete time derivatives (g_t, P_t) and the stream used."""
    if stream is None:
        stream = solve_stream(ThetaField(grid, g, "odd"))
    h, th = grid.h, grid.nodes
    G, Gp = stream.G.values, stream.Gp.values
    gth = theta_derivative(g, h, "odd", 1)
    Pth = theta_derivative(P, h, "even", 1)
    gt = -2 * G * gth + np.sin(th) * P + np.cos(th) * Pth
    Pt = -2 * G * Pth + P * Gp
    gt[0] = 0.0  # oddness
    return gt, Pt, stream


def time_derivative(s: State1D) -> tuple[np.ndarray, np.ndarray]:
    gt, Pt, _ = _rhs(s.grid, s.g.values, s.P.values, s.stream)
    return gt, Pt


def stable_dt(s: State1D, cfl: float = 0.5) -> float:
    """Transport limit cfl*h/max(1, 2|G|) and a reaction limit cfl/|G'|."""
    transport = cfl * s.grid.h / max(1.0, 2 * s.stream.G.sup())
    gp = s.stream.Gp.sup()
    reaction = cfl / gp if gp > 0 else math.inf
    return min(transport, reaction)


def step(s: State1D, dt: float) -> State1D:
    """One classical RK4 step; the stream is re-solved at each stage."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    grid = s.grid
    g, P = s.g.values, s.P.values
    with np.errstate(over="ignore", invalid="ignore"):
        k1g, k1P, _ = _rhs(grid, g, P, s.stream)
        k2g, k2P, _ = _rhs(grid, g + 0.5 * dt * k1g, P + 0.5 * dt * k1P)
        k3g, k3P, _ = _rhs(grid, g + 0.5 * dt * k2g, P + 0.5 * dt * k2P)
        k4g, k4P, _ = _rhs(grid, g + dt * k3g, P + dt * k3P)
        gn = g + dt / 6 * (k1g + 2 * k2g + 2 * k3g + k4g)
        Pn = P + dt / 6 * (k1P + 2 * k2P + 2 * k3P + k4P)
    if not (np.all(np.isfinite(gn)) and np.all(np.isfinite(Pn))):
        raise BlowupSuspected(s)
    gn[0] = 0.0
    gf = ThetaField(grid, gn, "odd")
    stream = solve_stream(gf)
    if not np.all(np.isfinite(stream.G.values)):
        raise BlowupSuspected(s)
    return State1D(s.t + dt, gf, ThetaField(grid, Pn, "even"), stream)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass(frozen=True)
class SignReport:
    min_g: float
    min_gp: float
    min_P: float
    min_Pp: float
    min_PplusPpp: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.min_g, self.min_gp, self.min_P, self.min_Pp, self.min_PplusPpp)

    def ok(self, tol: float) -> bool:
        return min(self.as_tuple()) >= -tol


def check_signs(s: State1D) -> SignReport:
    """Minima over [0, L] of g, g', P, P', P + P''."""
    h = s.grid.h
    g, P = s.g.values, s.P.values
    gp = theta_derivative(g, h, "odd", 1)
    Pp = theta_derivative(P, h, "even", 1)
    Ppp = theta_derivative(P, h, "even", 2)
    return SignReport(float(g.min()), float(gp.min()), float(P.min()), float(Pp.min()), float((P + Ppp).min()))


def balance_rhs(s: State1D) -> float:
    """2 int sin P + cos(L) P(L) - P(0) + G'(L)^2 - G'(0)^2."""
    grid = s.grid
    w = simpson_weights(grid.n, grid.h)
    P = s.P.values
    gp0, gpL = gprime_boundary(s.g)
    return float(2 * w @ (np.sin(grid.nodes) * P) + math.cos(grid.L) * P[-1] - P[0] + gpL**2 - gp0**2)


def balance_residual(s: State1D, dA_dt: float | None = None) -> float:
    """|d/dt int_0^L g - balance_rhs(s)|.

    dA_dt defaults to the semi-discrete derivative, i.e. the exact time
    derivative of the method-of-lines system at this state.
    """
    if dA_dt is None:
        gt, _ = time_derivative(s)
        dA_dt = float(simpson_weights(s.grid.n, s.grid.h) @ gt)
    return abs(dA_dt - balance_rhs(s))


def _row(s: State1D, dt: float) -> DiagnosticRow:
    grid = s.grid
    w = simpson_weights(grid.n, grid.h)
    g, P = s.g.values, s.P.values
    A = float(w @ g)
    signs = check_signs(s)
    gp0, gpL = s.stream.boundary_derivatives()
    gt, _ = time_derivative(s)
    bal = abs(float(w @ gt) - balance_rhs(s))
    return DiagnosticRow(
        t=s.t,
        dt=dt,
        g_linf=s.g.sup(),
        g_l1=float(w @ np.abs(g)),
        g_int=A,
        P_at_L=float(P[-1]),
        P_at_0=float(P[0]),
        Gp_at_L=gpL,
        Gp_at_0=gp0,
        blowup_functional=A * math.sqrt(max(P[-1], 0.0)),
        min_g=signs.min_g,
        min_gp=signs.min_gp,
        min_P=signs.min_P,
        min_Pp=signs.min_Pp,
        min_PplusPpp=signs.min_PplusPpp,
        balance_residual=bal,
        scale=s.scale(),
    )


# ---------------------------------------------------------------------------
# driver


def run(config: Sim1DConfig, state: State1D | None = None) -> RunResult:
    """Integrate until t_end or until a stopping rule fires.

    BlowupDetected: |g| exceeds blowup_cap times the initial scale, or a step
    produced non-finite values. StepCollapse: the stable step fell below dt_min.
    """
    if state is None:
        if config.preset is None:
            raise ValueError("need either an initial state or a preset name")
        state = init_state(config.preset, None, config.L, config.n)
    if config.output_stride < 1:
        raise ValueError("output_stride must be >= 1")
    cap = config.blowup_cap * state.scale()
    diag = RunDiagnostics()
    snaps: list[State1D] = []
    s = state
    dt_prev = 0.0
    diag.append(_row(s, dt_prev))
    if config.snapshot_stride:
        snaps.append(s)
    status, message = RunStatus.COMPLETED, ""
    steps = 0
    outputs = 0
    while s.t < config.t_end:
        if steps >= config.max_steps:
            message = "max_steps reached"
            break
        dt = stable_dt(s, config.cfl)
        if steps == 0 and config.dt_init is not None:
            dt = min(dt, config.dt_init)
        if dt < config.dt_min:
            status, message = RunStatus.STEP_COLLAPSE, f"dt={dt:.3e} below dt_min"
            break
        last = config.t_end - s.t <= dt * (1 + 1e-12)
        if last:
            dt = config.t_end - s.t
        try:
            s_new = step(s, dt)
        except BlowupSuspected as exc:
            s = exc.state
            status, message = RunStatus.BLOWUP_DETECTED, "non-finite values"
            break
        if last:
            s_new = replace(s_new, t=config.t_end)
        s, dt_prev = s_new, dt
        steps += 1
        blown = s.g.sup() > cap
        if steps % config.output_stride == 0 or blown or last:
            diag.append(_row(s, dt_prev))
            outputs += 1
            if config.snapshot_stride and outputs % config.snapshot_stride == 0:
                snaps.append(s)
        if blown:
            status, message = RunStatus.BLOWUP_DETECTED, f"|g| = {s.g.sup():.3e} above cap {cap:.3e}"
            break
    if diag.rows[-1].t < s.t:
        diag.append(_row(s, dt_prev))
    diag.status = status
    return RunResult(status, s, diag, snaps, steps, message)


def write_snapshots(result: RunResult, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, s in enumerate(result.snapshots):
        pg = directory / f"g_{i:05d}.csv"
        pP = directory / f"P_{i:05d}.csv"
        write_field_csv(s.g, pg)
        write_field_csv(s.P, pP)
        paths += [pg, pP]
    return paths


# ---------------------------------------------------------------------------
# post-processing


def _time_derivative_nonuniform(t: np.ndarray, y: np.ndarray, width: int = 5) -> np.ndarray:
    """Derivative at every sample from a sliding width-point stencil."""
    n = t.size
    out = np.empty(n)
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        idx = np.arange(lo, lo + width)
        tau = (t[idx] - t[i]) / max(t[idx[-1]] - t[idx[0]], 1e-300)
        V = np.vander(tau, width, increasing=True).T
        rhs = np.zeros(width)
        rhs[1] = 1.0
        wts = np.linalg.solve(V, rhs)
        out[i] = wts @ y[idx] / max(t[idx[-1]] - t[idx[0]], 1e-300)
    return out


def boundary_ode_residual(diag: RunDiagnostics, fraction: float = 1.0) -> tuple[float, float]:
    """Max deviation of d/dt P(L), d/dt P(0) from G'(L)P(L), G'(0)P(0).

    Time derivatives use 5-point (4th order) differences over the output
    times. fraction < 1 restricts the check to the first part of the run.
    """
    if len(diag) < 3:
        raise ValueError("need at least 3 output rows")
    t = diag.column("t")
    PL, P0 = diag.column("P_at_L"), diag.column("P_at_0")
    GL, G0 = diag.column("Gp_at_L"), diag.column("Gp_at_0")
    width = min(5, t.size)
    dPL = _time_derivative_nonuniform(t, PL, width)
    dP0 = _time_derivative_nonuniform(t, P0, width)
    keep = t <= t[0] + fraction * (t[-1] - t[0])
    rL = np.abs(dPL - GL * PL)[keep]
    r0 = np.abs(dP0 - G0 * P0)[keep]
    return float(rL.max()), float(r0.max())


@dataclass(frozen=True)
class BlowupEstimate:
    t_star: float
    width: float
    residual: float
    samples: int


def estimate_blowup_time(diag: RunDiagnostics, min_samples: int = 10) -> BlowupEstimate:
    """Extrapolate 1/|g| -> 0 linearly over the last decade of growth."""
    if diag.status is not None and diag.status != RunStatus.BLOWUP_DETECTED:
        raise NoFit(f"run ended with status {diag.status.value}")
    t = diag.column("t")
    m = diag.column("g_linf")
    if m.size == 0 or not np.all(np.isfinite(m)) or m.max() <= 0:
        raise NoFit("no growth recorded")
    tail = np.nonzero(m >= m.max() / 10)[0]
    start = tail[0]
    if np.any(np.diff(m[start:]) < 0):
        raise NoFit("non-monotone tail")
    if m.size - start < min_samples:
        raise NoFit(f"only {m.size - start} samples in the final decade (need {min_samples})")
    tt, y = t[start:], 1.0 / m[start:]
    A = np.vstack([tt, np.ones_like(tt)]).T
    (slope, icpt), res, *_ = np.linalg.lstsq(A, y, rcond=None)
    if slope >= 0:
        raise NoFit("reciprocal norm is not decreasing")
    t_star = -icpt / slope
    fit = A @ np.array([slope, icpt])
    resid = float(np.sqrt(np.mean((y - fit) ** 2)))
    # one-sigma propagation of the fit residual into the intercept of y = 0
    k = tt.size
    sxx = float(np.sum((tt - tt.mean()) ** 2))
    sig = resid * math.sqrt(k / max(k - 2, 1))
    width = abs(sig / slope) * math.sqrt(1.0 / k + (t_star - tt.mean()) ** 2 / sxx) if sxx > 0 else math.inf
    return BlowupEstimate(float(t_star), float(width), resid, int(k))


# ---------------------------------------------------------------------------
# stability


def _c_norm(values: np.ndarray, h: float, parity: str, k: int) -> float:
    """sum_{j<=k} sup |d^j f| on [0, L]."""
    total = float(np.max(np.abs(values)))
    if k >= 1:
        total += float(np.max(np.abs(theta_derivative(values, h, parity, 1))))
    if k >= 2:
        total += float(np.max(np.abs(theta_derivative(values, h, parity, 2))))
    return total


def stability_probe(base: State1D, eps: float, window: float = 0.1, cfl: float = 0.5) -> float:
    """Twin-run growth ratio for an eps-perturbation of the initial data.

    The perturbation has C^1 x C^2 size eps, split evenly between g and P.
    Returns max over the window of (|g - gb|_C0 + |P - Pb|_C1) / eps.
    """
    if eps < 0 or eps >= 0.5:
        raise ValueError("eps must lie in [0, 1/2)")
    if eps == 0:
        return 0.0
    grid = base.grid
    h, th = grid.h, grid.nodes
    dg = np.sin(th)
    dP = np.cos(th)
    dg *= 0.5 * eps / _c_norm(dg, h, "odd", 1)
    dP *= 0.5 * eps / _c_norm(dP, h, "even", 2)
    twin = init_state(base.g.with_values(base.g.values + dg), base.P.with_values(base.P.values + dP))
    twin = replace(twin, t=base.t)
    a, b = base, twin
    t_end = base.t + window
    ratio = 0.0
    cap = 1e6 * max(a.scale(), b.scale())
    while a.t < t_end - 1e-15:
        dt = min(stable_dt(a, cfl), stable_dt(b, cfl), t_end - a.t)
        try:
            a, b = step(a, dt), step(b, dt)
        except BlowupSuspected as exc:
            raise Inconclusive("twin run blew up inside the window") from exc
        if a.g.sup() > cap or b.g.sup() > cap:
            raise Inconclusive("twin run blew up inside the window")
        d = _c_norm(a.g.values - b.g.values, h, "odd", 0) + _c_norm(a.P.values - b.P.values, h, "even", 1)
        ratio = max(ratio, d / eps)
    return ratio


def riccati_constant(state: State1D) -> float:
    """c = min(cos L - P(0)/P(L), c(L)) from the initial data, for the comparison system.

    The first entry bounds d/dt int g from below by c P(L), the second
    bounds G'(L) by c int g; both use the monotonicity of P(0), P(L).
    """
    P = state.P.values
    if P[-1] <= 0:
        return 0.0
    c1 = math.cos(state.grid.L) - P[0] / P[-1]
    return min(c1, mass_constant(state.grid.L))
