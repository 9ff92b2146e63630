"""Quick self-check suites, one per module, each a few seconds to a minute."""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from . import angular_field as af
from . import elliptic_1d as el
from . import evolve_1d as ev
from . import ode_blowup as ode
from . import sector_green as sg


def _angular() -> dict:
    grid = af.make_grid(math.pi / 4, 5)
    nodes_ok = np.allclose(grid.nodes, np.arange(5) * math.pi / 16, atol=1e-15)
    pts = np.array([[0.0, 0.0], [0.25, 0.0], [1.0, 0.0]])
    sqrt_norm = af.holder_norm(af.PlanarSample(pts, np.sqrt(pts[:, 0]), 0.5))
    g = np.linspace(0, 1, 9)
    square = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    const_ring = af.ring_holder_norm(af.PlanarSample(square, np.full(len(square), 3.0), 0.5))
    return {
        "pass": bool(nodes_ok and abs(sqrt_norm - 2) < 1e-12 and abs(const_ring - 6) < 1e-12),
        "holder_sqrt": sqrt_norm,
        "ring_constant_3": const_ring,
    }


def _elliptic() -> dict:
    errs = []
    for n in (65, 129, 257):
        g = af.ThetaField.from_function(af.make_grid(math.pi / 4, n), lambda t: np.sin(2 * t), "odd")
        exact = -(g.grid.nodes / 4) * np.cos(2 * g.grid.nodes)
        errs.append(float(np.max(np.abs(el.solve_stream_fd(g).G.values - exact))))
        kern = float(np.max(np.abs(el.solve_stream_kernel(g).G.values - exact)))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    g0, gL = el.gprime_boundary(g)
    ok = min(orders) > 1.8 and kern < 1e-8 and abs(g0 + 0.25) < 1e-8 and abs(gL - math.pi / 8) < 1e-8
    return {"pass": bool(ok), "fd_orders": orders, "kernel_error": kern, "gprime_boundary": [g0, gL]}


def _evolve() -> dict:
    s = ev.init_state("blowup_quadratic", None, math.pi / 4, 257)
    hyp = s.hypotheses()
    rhs = ev.balance_rhs(s)
    res = ev.run(ev.Sim1DConfig(n=257, t_end=1.0))
    signs = min(min(r.min_g, r.min_gp, r.min_P, r.min_Pp, r.min_PplusPpp) + 1e-8 * r.scale for r in res.diagnostics.rows)
    tr = ev.run(ev.Sim1DConfig(n=257, t_end=1.0, preset="euler_sin2theta"))
    drift = abs(tr.state.g.sup() - 1.0)
    ok = all(hyp.values()) and abs(rhs / 0.61374 - 1) < 0.01 and signs >= 0 and drift < 1e-4 and res.status == ev.RunStatus.COMPLETED
    return {"pass": bool(ok), "hypotheses": hyp, "balance_rhs": rhs, "sign_margin": signs, "transport_drift": drift}


def _ode() -> dict:
    tr = ode.integrate_riccati(ode.RiccatiState(0.0, 0.0, 1.0, 1.0), 10.0, 1e-8)
    exact = ode.riccati_blowup_time(1.0, 0.0, 1.0)
    ct = ode.integrate_corner(ode.CornerState(0.0, 1.0, -1.0, 1.0, 0.25), 20.0, 1e-8)
    cq = ode.corner_blowup_time_quadrature(0.25, 1.0, -1.0, 1.0)
    d1, d2 = ode.corner_invariants(ct)
    ok = (
        tr.status == "BlowupDetected"
        and abs(tr.t_star - exact) / exact < 1e-5
        and max(ode.invariant_drift(tr)) <= 1e-7
        and abs(ct.t_star - cq) / cq < 1e-4
        and max(d1, d2) <= 1e-7
    )
    return {"pass": bool(ok), "riccati_t_star": tr.t_star, "riccati_exact": exact, "corner_t_star": ct.t_star, "corner_quadrature": cq}


def _sector() -> dict:
    half = sg.SectorSpec(0.5)
    gval = float(sg.green(half, np.exp(0.25j * math.pi), 2 * np.exp(0.25j * math.pi)))
    spec = sg.SectorSpec(0.25)
    quad = sg.QuadratureSpec()
    z = complex(1.0, 0.3)
    psi = float(sg.poisson_solve(spec, 1.0, quad, z))
    H = sg.hessian_psi(spec, 1.0, quad, z)
    conv = sg.calibrate_gradient_convention(spec)
    bump = sg.bump_source(complex(1.0, 0.3), 0.3)
    vort = sg.QuadrantVorticity(bump.func, bump.support_radius, bump.radial_breaks, "bump")
    ratio = sg.symmetrized_velocity_bound(vort)
    ok = (
        abs(gval - math.log(0.6) / (2 * math.pi)) < 1e-12
        and abs(psi - float(sg.psi_constant_source(spec, z.real, z.imag))) < 1e-3
        and abs(H.trace - 1) < 1e-3
        and conv == sg.GRADIENT_CONVENTION
        and ratio <= 1.05
    )
    return {"pass": bool(ok), "green_spot": gval, "psi": psi, "hessian_trace": H.trace, "velocity_ratio": ratio}


SUITES: dict[str, Callable[[], dict]] = {
    "angular": _angular,
    "elliptic": _elliptic,
    "evolve": _evolve,
    "ode": _ode,
    "sector": _sector,
}


def run_suites(names) -> dict[str, dict]:
    """Run the named suites; an exception counts as a failure with its message."""
    if "all" in names:
        names = list(SUITES)
    out = {}
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; valid suites: all, {', '.join(SUITES)}")
        t0 = time.perf_counter()
        try:
            rep = SUITES[name]()
        except Exception as exc:  # reported, not raised: one suite must not hide the others
            rep = {"pass": False, "error": f"{type(exc).__name__}: {exc}"}
        rep["seconds"] = round(time.perf_counter() - t0, 3)
        out[name] = rep
    return out
