#!/usr/bin/env python3
"""L2/Linf norm profiles of homogeneous chains under a braking step.

Reproduces the qualitative stable-vs-unstable comparison: a chain of calm
drivers attenuates a -1 m/s^2 braking pulse monotonically while an eager
low-acceleration chain amplifies it after a few vehicles.
"""

import argparse
from pathlib import Path

from stringstab import IdmParams, StepDisturbance, VehicleChain, norm_profile, simulate


def run(a: float, label: str, args, out: Path) -> None:
    p = IdmParams(a=a, b=1.1, T=1.5, s0=2.0, v_max=33.0)
    chain = VehicleChain([p] * args.vehicles, args.v_eq)
    traj = simulate(
        chain,
        StepDisturbance(1, args.amplitude, 5.0, 10.0),
        duration=args.duration,
        dt=args.dt,
    )
    profile = norm_profile(traj)
    profile.to_csv(out / f"norms_{label}.csv")
    print(
        f"{label} (a={a}): L2 first {profile.l2[0]:.3f} last {profile.l2[-1]:.3f}; "
        f"{len(traj.clamp_events)} zero-speed clamps"
    )


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--vehicles", type=int, default=30)
    ap.add_argument("--v-eq", type=float, default=16.5)
    ap.add_argument("--amplitude", type=float, default=-1.0)
    ap.add_argument("--duration", type=float, default=240.0)
    ap.add_argument("--dt", type=float, default=0.01)
    ap.add_argument("--out", type=Path, default=Path("out"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    run(0.87, "stable", args, args.out)
    run(0.47, "unstable", args, args.out)


if __name__ == "__main__":
    main()
