"""Nonclassical probability over one period for a Gaussian packet and a random-phase state.

Uses n = 1000 with 101 levels in a wide harmonic well; writes nonclassical_scan.csv.
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from semibohm.bohm import nonclassical_probability
from semibohm.wells import harmonic, solve_level
from semibohm.wkb import WKBState, coefficient_presets, make_spec, packet_phase


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("out"))
    ap.add_argument("--times", type=int, default=50)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    well = harmonic(half_width=80.0)
    level = solve_level(well, 1000)
    packet = coefficient_presets("gaussian_packet", 100, {"sigma_r": 10.0, "theta0": packet_phase(level, well, 0.0)})
    states = {
        "gaussian_packet": WKBState(make_spec(well, 1000, 100, packet), well),
        "uniform_random_phase": WKBState(make_spec(well, 1000, 100, coefficient_presets("uniform_random_phase", 100, seed=args.seed)), well),
    }
    times = np.linspace(0.0, level.period, args.times, endpoint=False)
    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "nonclassical_scan.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_over_T", "state", "probability", "excluded_fraction"])
        for name, state in states.items():
            probs = []
            for t in times:
                rep = nonclassical_probability(state, t=t)
                probs.append(rep.probability)
                w.writerow([t / level.period, name, rep.probability, rep.excluded_fraction])
            print(f"{name}: max {max(probs):.3f}, mean {np.mean(probs):.3f}")


if __name__ == "__main__":
    main()
