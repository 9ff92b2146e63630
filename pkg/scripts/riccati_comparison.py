"""Compare the PDE functionals with the Riccati lower bound along a 1D run."""

import argparse
import math

import numpy as np

from sector_blowup.evolve_1d import Sim1DConfig, init_state, riccati_constant, run
from sector_blowup.ode_blowup import riccati_blowup_time, riccati_solution


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--grid", type=int, default=513)
    ap.add_argument("--samples", type=int, default=12)
    args = ap.parse_args()
    s0 = init_state("blowup_quadratic", None, math.pi / 4, args.grid)
    c = riccati_constant(s0)
    res = run(Sim1DConfig(n=args.grid))
    d = res.diagnostics
    t, A, B = d.column("t"), d.column("g_int"), d.column("P_at_L")
    T_ode = riccati_blowup_time(c, A[0], B[0])
    print(f"c = {c:.6f}   PDE stops at t = {res.t_final:.5f}   comparison blows up at t = {T_ode:.5f}")
    Ar, Br = riccati_solution(c, A[0], B[0], t)
    print(f"{'t':>9} {'int g':>12} {'A_ode':>12} {'P(L)':>12} {'B_ode':>12}")
    for i in np.unique(np.linspace(0, t.size - 1, args.samples).astype(int)):
        print(f"{t[i]:>9.4f} {A[i]:>12.5g} {Ar[i]:>12.5g} {B[i]:>12.5g} {Br[i]:>12.5g}")


if __name__ == "__main__":
    main()
