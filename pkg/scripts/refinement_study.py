"""Blow-up time and sign margins for the quadratic preset under grid refinement."""

import argparse
import math

from sector_blowup.evolve_1d import NoFit, Sim1DConfig, estimate_blowup_time, run


def first_sign_violation(diag, tol=1e-8):
    names = ("min_g", "min_gp", "min_P", "min_Pp", "min_PplusPpp")
    for r in diag.rows:
        bad = [n for n in names if getattr(r, n) < -tol * r.scale]
        if bad:
            return r.t, bad
    return None


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grids", type=int, nargs="+", default=[257, 513, 1025])
    ap.add_argument("--preset", default="blowup_quadratic")
    args = ap.parse_args()
    print(f"{'n':>6} {'status':>16} {'t_final':>10} {'T*':>10} {'width':>9} {'sign violation':>22}")
    for n in args.grids:
        res = run(Sim1DConfig(L=math.pi / 4, n=n, preset=args.preset))
        try:
            est = estimate_blowup_time(res.diagnostics)
            ts, w = f"{est.t_star:.5f}", f"{est.width:.1e}"
        except NoFit:
            ts, w = "-", "-"
        v = first_sign_violation(res.diagnostics)
        vs = "none" if v is None else f"t={v[0]:.4f} {','.join(v[1])}"
        print(f"{n:>6} {res.status.value:>16} {res.t_final:>10.5f} {ts:>10} {w:>9} {vs:>22}")


if __name__ == "__main__":
    main()
