"""Peak speed, time-averaged speed and slow-time share of local trajectories against chi0.

Writes chi_sweep.csv with the measured values next to their closed forms.
"""

import argparse
import csv
import math
from pathlib import Path

import numpy as np

from semibohm.bohm import LocalMotionParams, fraction_of_time_below, integrate_local, local_integrator_options, time_averaged_velocity
from semibohm.integrate import peak_speed


def measure(chi0: float) -> list[float]:
    params = LocalMotionParams(chi0, 0.0, 1.0, 1.0)
    t_pass = 1.0 / params.mean_velocity
    traj = integrate_local(params, 1.02 * t_pass, local_integrator_options(params))
    _, v_peak = peak_speed(traj, params.velocity)
    v_bar = time_averaged_velocity(traj, 0.0, 1.0)
    slow = fraction_of_time_below(traj, params.mean_velocity, params.velocity, t_end=1.0 / v_bar)
    return [chi0, v_peak, params.peak_velocity, v_bar, params.mean_velocity, slow, 0.5 + 1 / (math.pi * math.cosh(chi0))]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--chi", type=float, nargs="+", default=list(np.geomspace(0.005, 3.0, 12)))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [measure(c) for c in args.chi]
    with open(args.out / "chi_sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chi0", "v_peak", "v_peak_closed", "v_bar", "v_bar_closed", "slow_fraction", "slow_fraction_closed"])
        w.writerows(rows)
    for r in rows:
        print(f"chi0={r[0]:.4g}  peak {r[1]:.6g} ({r[2]:.6g})  mean {r[3]:.6g} ({r[4]:.6g})  slow {r[5]:.4f} ({r[6]:.4f})")


if __name__ == "__main__":
    main()
