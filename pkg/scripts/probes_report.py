"""Print the sector estimate probes: Taylor corner, counterexample, decay, symmetrized bound."""

import argparse

import numpy as np

from sector_blowup.sector_green import (
    QuadrantVorticity,
    SectorSpec,
    bump_source,
    critical_counterexample_probe,
    decay_probe,
    symmetrized_velocity_bound,
    taylor_corner_probe,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--beta", type=float, default=0.25)
    ap.add_argument("--refinements", type=int, default=3)
    args = ap.parse_args()

    rep = taylor_corner_probe(SectorSpec(args.beta), 1.0)
    print("Taylor corner gradients (omega0 = 1):")
    for key, g in rep.gradients.items():
        print(f"  {key}: {np.round(g, 6).tolist()}")
    print(f"  predicted: {rep.predicted}  matches: {rep.matches}")

    ce = critical_counterexample_probe(0.4, args.refinements)
    print("critical counterexample (beta = 2/5, alpha = 1/2):")
    print(f"  spacings {ce.spacings}\n  critical {np.round(ce.critical, 4).tolist()}")
    print(f"  subcritical {np.round(ce.subcritical, 4).tolist()}\n  source {np.round(ce.source, 4).tolist()}")

    b = bump_source(1 + 0.3j, 0.3)
    bump = QuadrantVorticity(b.func, b.support_radius, b.radial_breaks, "bump")
    print(f"symmetrized velocity bound (bump): {symmetrized_velocity_bound(bump):.4f}")

    const = QuadrantVorticity(lambda x1, x2: 1.0 * (np.hypot(x1, x2) <= 4.0), 4.0, (), "constant")
    dp = decay_probe(0.5, const)
    print(f"decay probe, constant vorticity: ratios {np.round(dp.ratios, 4).tolist()} slope {dp.loglog_slope():.3f}")


if __name__ == "__main__":
    main()
