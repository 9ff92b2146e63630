"""Command-line entry point: simulations, ODE runs, Poisson solves, probes and self-checks.

Exit codes: 0 success, 2 detected blow-up, 1 error or bad usage.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import evolve_1d as ev
from . import ode_blowup as ode
from . import sector_green as sg
from .angular_field import make_grid, read_field_csv
from .presets import PRESETS, preset
from .verify import SUITES, run_suites

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2
OUT_ENV = "SECTOR_BLOWUP_OUT"

_PI_RE = re.compile(r"^\s*(?:(\d+(?:\.\d+)?)\s*\*?\s*)?pi\s*(?:/\s*(\d+(?:\.\d+)?))?\s*$")


def parse_angle(text: str) -> float:
    """Angle from a literal ('0.6') or a fraction of pi ('pi/4', '3pi/8', '3*pi/8').

    Fractions of pi are reduced first, so 'pi/4' and '2pi/8' both give the
    float math.pi / 4 exactly.
    """
    m = _PI_RE.match(text.lower())
    if m:
        num = Fraction(m.group(1) or "1")
        den = Fraction(m.group(2) or "1")
        if den == 0:
            raise argparse.ArgumentTypeError(f"zero denominator in angle {text!r}")
        q = num / den
        return math.pi * q.numerator / q.denominator
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse angle {text!r}") from None


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


@dataclass
class RunConfig:
    subcommand: str
    out: Path
    threads: int = 1
    params: dict = field(default_factory=dict)

    def validate(self) -> None:
        p = self.params
        if self.subcommand == "sim1d":
            L, n = p["angle"], p["grid"]
            if not (0 < L < math.pi / 2):
                raise ValueError("angle must lie in (0, pi/2)")
            h = L / (n - 1)
            if p["dt_init"] is not None and p["dt_init"] > p["cfl"] * h:
                raise ValueError(f"dt_init={p['dt_init']} exceeds cfl*h={p['cfl'] * h:.3e}")
        self.out.mkdir(parents=True, exist_ok=True)
        if not os.access(self.out, os.W_OK):
            raise ValueError(f"output directory {self.out} is not writable")


def output_root(out: str) -> Path:
    """Relative --out paths are placed under $SECTOR_BLOWUP_OUT when it is set."""
    p = Path(out)
    env = os.environ.get(OUT_ENV)
    if env and not p.is_absolute():
        return Path(env) / p
    return p


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _finite(x):
    """JSON has no inf; report it as null."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def write_summary(out: Path, summary: dict) -> Path:
    path = out / "summary.json"
    text = json.dumps(summary, indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    path.write_text(text + "\n")
    print(text)
    return path


def _base_summary(cfg: RunConfig) -> dict:
    return {
        "subcommand": cfg.subcommand,
        "status": None,
        "t_final": None,
        "blowup_estimate": None,
        "invariant_maxdrift": None,
        "suites": {},
        "config": cfg.params,
    }


# ---------------------------------------------------------------------------
# subcommands


def _cmd_sim1d(cfg: RunConfig) -> int:
    p = cfg.params
    sim = ev.Sim1DConfig(
        L=p["angle"],
        n=p["grid"],
        t_end=p["t_end"],
        cfl=p["cfl"],
        dt_init=p["dt_init"],
        dt_min=p["dt_min"],
        blowup_cap=p["blowup_cap"],
        output_stride=p["output_stride"],
        preset=p["preset"],
        snapshot_stride=p["snapshot_stride"],
    )
    state = None
    if p["g0"] or p["P0"]:
        if not (p["g0"] and p["P0"]):
            raise ValueError("--g0 and --P0 must be given together")
        g0, P0 = read_field_csv(p["g0"]), read_field_csv(p["P0"])
        state = ev.init_state(g0, P0)
        sim = ev.Sim1DConfig(**{**asdict(sim), "L": g0.grid.L, "n": g0.grid.n, "preset": None})
    res = ev.run(sim, state)
    res.diagnostics.write_csv(cfg.out / "diagnostics.csv")
    if sim.snapshot_stride:
        ev.write_snapshots(res, cfg.out / "snapshots")
    s = _base_summary(cfg)
    s.update(status=res.status.value, t_final=res.t_final, steps=res.steps, message=res.message)
    s["hypotheses"] = (state or ev.init_state(sim.preset, None, sim.L, sim.n)).hypotheses()
    if res.status == ev.RunStatus.BLOWUP_DETECTED:
        try:
            est = ev.estimate_blowup_time(res.diagnostics)
            s["blowup_estimate"] = {"t_star": est.t_star, "width": est.width, "residual": est.residual, "samples": est.samples}
        except ev.NoFit as exc:
            s["blowup_estimate"] = None
            s["blowup_fit_error"] = str(exc)
    write_summary(cfg.out, s)
    return EXIT_BLOWUP if res.status == ev.RunStatus.BLOWUP_DETECTED else EXIT_OK


def _ode_summary(cfg: RunConfig, traj: ode.OdeTrajectory, closed_form: float | None) -> int:
    traj.write_csv(cfg.out / "trajectory.csv")
    s = _base_summary(cfg)
    s.update(status=traj.status, t_final=float(traj.t[-1]), invariant_maxdrift=max(ode.invariant_drift(traj)))
    s["blowup_estimate"] = _finite(traj.t_star)
    if closed_form is not None:
        s["blowup_time"] = _finite(closed_form)
    write_summary(cfg.out, s)
    return EXIT_BLOWUP if traj.status == "BlowupDetected" else EXIT_OK


def _cmd_riccati(cfg: RunConfig) -> int:
    p = cfg.params
    traj = ode.integrate_riccati(ode.RiccatiState(0.0, p["a0"], p["b0"], p["c"]), p["t_end"], p["rtol"])
    return _ode_summary(cfg, traj, ode.riccati_blowup_time(p["c"], p["a0"], p["b0"]))


def _cmd_corner(cfg: RunConfig) -> int:
    p = cfg.params
    traj = ode.integrate_corner(ode.CornerState(0.0, p["a0"], p["b0"], p["c0"], p["beta"]), p["t_end"], p["rtol"])
    qt = None
    if p["c0"] > 0 and p["a0"] >= 0 and p["b0"] <= 0:
        qt = ode.corner_blowup_time_quadrature(p["beta"], p["a0"], p["b0"], p["c0"])
    return _ode_summary(cfg, traj, qt)


def _quad(cfg: RunConfig) -> sg.QuadratureSpec:
    p = cfg.params
    return sg.QuadratureSpec(
        R_max=p["r_max"],
        n_radial=p["n_radial"],
        n_angular=p["n_angular"],
        refine_depth=p["refine_depth"],
        tol=p["tol"],
        workers=cfg.threads,
    )


def _source(cfg: RunConfig, spec: sg.SectorSpec) -> sg.SectorSource:
    p = cfg.params
    if p["source_csv"]:
        return sg.read_sector_csv(p["source_csv"])
    pr = preset(p["preset"])
    if pr.kind != "sector":
        raise ValueError(f"preset {pr.name!r} is 1D data; sector presets: " + ", ".join(k for k, v in PRESETS.items() if v.kind == "sector"))
    if pr.name == "constant_one":
        return sg.constant_source(1.0)
    return sg.as_source(pr.sector_source(spec.beta), spec)


def _targets(cfg: RunConfig, spec: sg.SectorSpec) -> list[complex]:
    p = cfg.params
    if p["targets"]:
        out = []
        for item in p["targets"].split(";"):
            x1, x2 = (float(v) for v in item.split(","))
            out.append(complex(x1, x2))
        return out
    n_r, n_t = p["target_grid"]
    return list(sg.sector_targets(spec, n_r, n_t, p["r_min"], p["r_max_target"]))


def _cmd_poisson(cfg: RunConfig) -> int:
    spec = sg.SectorSpec(cfg.params["beta"])
    recs = sg.solve_at_targets(spec, _source(cfg, spec), _quad(cfg), _targets(cfg, spec))
    sg.write_poisson_csv(recs, cfg.out / "poisson.csv")
    s = _base_summary(cfg)
    s.update(status="Completed", targets=len(recs), gradient_convention=list(sg.GRADIENT_CONVENTION))
    write_summary(cfg.out, s)
    return EXIT_OK


def _cmd_probe(cfg: RunConfig) -> int:
    p = cfg.params
    kind = p["kind"]
    s = _base_summary(cfg)
    s["status"] = "Completed"
    if kind == "taylor":
        spec = sg.SectorSpec(p["beta"])
        rep = sg.taylor_corner_probe(spec, p["omega0"])
        s["probe"] = {
            "omega0": rep.omega0,
            "predicted": rep.predicted,
            "fit_residual": rep.fit_residual,
            "frames": {f"{fr} {cv}": {"grad_u": rep.gradients[(fr, cv)], "diagonal_zero": rep.diagonal_zero[(fr, cv)], "matches_prediction": rep.matches[(fr, cv)]} for fr, cv in rep.gradients},
        }
    elif kind == "counterexample":
        rep = sg.critical_counterexample_probe(p["beta"], p["refinements"])
        s["probe"] = asdict(rep) | {"increments": rep.increments}
    elif kind == "decay":
        alpha = p["alpha"]

        def om(x1, x2):
            r = np.hypot(x1, x2)
            return np.minimum(r**alpha, 1.0) * np.sin(2 * np.arctan2(x2, x1)) * (r <= 4.0)

        rep = sg.decay_probe(alpha, sg.QuadrantVorticity(om, 4.0, (1.0,), "certified"), quad=None)
        s["probe"] = {"radii": rep.radii, "ratios": rep.ratios, "sup_ratio": rep.sup_ratio, "certified_constant": rep.certified_constant}
    elif kind == "symmetrized":
        b = sg.bump_source(complex(p["center_x1"], p["center_x2"]), p["width"])
        ratio = sg.symmetrized_velocity_bound(sg.QuadrantVorticity(b.func, b.support_radius, b.radial_breaks, "bump"))
        s["probe"] = {"ratio": ratio}
    elif kind == "stability":
        base = ev.init_state(p["preset"], None, p["angle"], p["grid"])
        s["probe"] = {"ratio": ev.stability_probe(base, p["eps"], p["window"])}
    else:  # elliptic
        spec = sg.SectorSpec(p["beta"])
        srcs = {"constant_one": sg.constant_source(1.0), "bump": sg.bump_source(0.4 * np.exp(0.5j * spec.aperture), 0.35)}
        rep = sg.elliptic_estimate_probe(spec, p["alpha"], srcs, quad=_quad(cfg))
        s["probe"] = {"levels": rep.levels, "ratios": rep.ratios, "log_constants": rep.log_constants}
    write_summary(cfg.out, s)
    return EXIT_OK


def _cmd_verify(cfg: RunConfig) -> int:
    res = run_suites(cfg.params["suite"])
    s = _base_summary(cfg)
    s["suites"] = {k: ("pass" if v["pass"] else "fail") for k, v in res.items()}
    s["details"] = res
    ok = all(v["pass"] for v in res.values())
    s["status"] = "Completed" if ok else "Failed"
    write_summary(cfg.out, s)
    return EXIT_OK if ok else EXIT_ERROR


COMMANDS = {
    "sim1d": _cmd_sim1d,
    "riccati": _cmd_riccati,
    "corner-ode": _cmd_corner,
    "poisson": _cmd_poisson,
    "probe": _cmd_probe,
    "verify": _cmd_verify,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 rather than argparse's 2, which means blow-up here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _add_quad_args(p: argparse.ArgumentParser) -> None:
    q = sg.QuadratureSpec()
    p.add_argument("--r-max", dest="r_max", type=float, default=None, help="radial truncation (default: from the tail bound)")
    p.add_argument("--n-radial", type=int, default=q.n_radial)
    p.add_argument("--n-angular", type=int, default=q.n_angular)
    p.add_argument("--refine-depth", type=int, default=q.refine_depth)
    p.add_argument("--tol", type=float, default=q.tol)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="sector-blowup", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=_positive_int, default=1, help="cap on worker threads for per-target quadrature")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--out", default=f"out/{name}", help=f"output directory (relative paths go under ${OUT_ENV} if set)")
        return p

    p = add("sim1d", "integrate the 1D angular system")
    p.add_argument("--angle", type=parse_angle, default=math.pi / 4, help="half angle L, e.g. pi/4 or 0.6")
    p.add_argument("--grid", type=int, default=513, help="points on [0, L]")
    p.add_argument("--preset", default="blowup_quadratic", choices=[k for k, v in PRESETS.items() if v.kind == "1d"])
    p.add_argument("--g0", default=None, help="field CSV for g0 (overrides --preset)")
    p.add_argument("--P0", default=None, help="field CSV for P0 (overrides --preset)")
    p.add_argument("--t-end", type=float, default=10.0)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--dt-init", type=float, default=None)
    p.add_argument("--dt-min", type=float, default=1e-10)
    p.add_argument("--blowup-cap", type=float, default=1e6)
    p.add_argument("--output-stride", type=_positive_int, default=1)
    p.add_argument("--snapshot-stride", type=int, default=0)

    p = add("riccati", "integrate A' = cB, B' = cAB")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--a0", type=float, required=True)
    p.add_argument("--b0", type=float, required=True)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--rtol", type=float, default=1e-8)

    p = add("corner-ode", "integrate the acute-corner system")
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--a0", type=float, required=True)
    p.add_argument("--b0", type=float, required=True)
    p.add_argument("--c0", type=float, required=True)
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--rtol", type=float, default=1e-8)

    p = add("poisson", "Poisson solve on a sector by Green's-function quadrature")
    p.add_argument("--beta", type=float, default=0.25)
    p.add_argument("--preset", default="constant_one", choices=[k for k, v in PRESETS.items() if v.kind == "sector"])
    p.add_argument("--source-csv", default=None, help="CSV r,theta,value (overrides --preset)")
    p.add_argument("--targets", default=None, help="'x1,x2;x1,x2;...'")
    p.add_argument("--target-grid", type=_positive_int, nargs=2, default=(4, 3), metavar=("NR", "NTHETA"))
    p.add_argument("--r-min", type=float, default=0.1)
    p.add_argument("--r-max-target", type=float, default=1.0)
    _add_quad_args(p)

    p = add("probe", "numerical probes of the estimates")
    p.add_argument("kind", choices=["taylor", "counterexample", "decay", "symmetrized", "stability", "elliptic"])
    p.add_argument("--beta", type=float, default=None, help="sector parameter (default: 1/4, or 2/5 for counterexample)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--omega0", type=float, default=1.0)
    p.add_argument("--refinements", type=_positive_int, default=3)
    p.add_argument("--center-x1", type=float, default=1.0)
    p.add_argument("--center-x2", type=float, default=0.3)
    p.add_argument("--width", type=float, default=0.3)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--window", type=float, default=0.1)
    p.add_argument("--preset", default="blowup_quadratic")
    p.add_argument("--angle", type=parse_angle, default=math.pi / 4)
    p.add_argument("--grid", type=int, default=513)
    _add_quad_args(p)

    p = add("verify", "run self-check suites")
    p.add_argument("--suite", nargs="+", default=["all"], choices=["all", *SUITES])
    return ap


def make_config(args: argparse.Namespace) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("subcommand", "out", "threads")}
    if args.subcommand == "probe" and params["beta"] is None:
        params["beta"] = 0.4 if args.kind == "counterexample" else 0.25
    if "target_grid" in params:
        params["target_grid"] = list(params["target_grid"])
    return RunConfig(args.subcommand, output_root(args.out), args.threads, params)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        cfg.validate()
        return COMMANDS[cfg.subcommand](cfg)
    except (ValueError, OSError, RuntimeError, ArithmeticError) as exc:
        print(f"sector-blowup: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
