"""Husimi mean velocity against the Bohm velocity as the coherent-state width shrinks.

Evaluated at one (x, t) for the default n = 120 packet; writes bohm_limit_scan.csv.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from semibohm.eigensolver import ExactSuperposition, solve_band
from semibohm.husimi import bohm_limit_check, classical_window
from semibohm.wells import harmonic, solve_level
from semibohm.wkb import WKBState, coefficient_presets, make_spec, packet_phase


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--x", type=float, default=0.0)
    ap.add_argument("--t", type=float, default=0.0, help="time in units of the period")
    args = ap.parse_args()
    well = harmonic()
    level = solve_level(well, 120)
    c = coefficient_presets("gaussian_packet", 10, {"theta0": packet_phase(level, well, 0.0)})
    spec = make_spec(well, 120, 10, c)
    state = WKBState(spec, well)
    psi = ExactSuperposition(solve_band(well, list(spec.levels)), c)
    lam_minus = float(classical_window(state, None, np.array([args.x])).lambda_minus[0])
    lams = lam_minus * np.geomspace(20.0, 0.02, 14)
    t = args.t * level.period
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "bohm_limit_scan.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda_over_lambda_minus", "reference", "v_bar", "v_bohm", "relative_deviation"])
        for ref in ("wkb", "exact"):
            rep = bohm_limit_check(state, None, args.x, t, lams, reference=ref, psi=psi)
            for lam, v, d in zip(rep.lambdas, rep.mean_velocities, rep.relative):
                w.writerow([lam / lam_minus, ref, v, rep.v_bohm, d])
            print(f"{ref}: v_B = {rep.v_bohm:.6g}; deviation {rep.relative[0]:.2e} -> {rep.relative[-1]:.2e}")


if __name__ == "__main__":
    main()
