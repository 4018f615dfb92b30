"""Simulated wind-tunnel calibration and held-out evaluation.

Calibrates on the full speed/heading sweep, then scores held-out headings and
the slow ramp profile against the simulator's wind truth.

    python3 scripts/tunnel_experiment.py --offset-deg 5 --seed 0
"""

import argparse
import math
import time

from dobwind import plant
from dobwind.airmodel import HORIZONTAL_TERMS, REFERENCE_HORIZONTAL_COEFFS, calibrate
from dobwind.evaluation import evaluate, format_report
from dobwind.frames import UavParams
from dobwind.pipeline import estimate_log


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--offset-deg", type=float, default=5.0, help="heading offset of the held-out sweep")
    ap.add_argument("--min-speed", type=float, default=3.0, help="score only true speeds at or above this")
    args = ap.parse_args()

    params = UavParams()
    t0 = time.perf_counter()
    tunnel = plant.run_wind_tunnel_scenario(params, plant.barrel_airframe(rng_seed=args.seed))
    model = calibrate(tunnel, params, 20.0)
    print(f"calibration ({time.perf_counter() - t0:.1f} s), residual rms {model.horizontal_rms:.3f} m/s")
    for name, c, ref in zip(HORIZONTAL_TERMS, model.horizontal_coeffs, REFERENCE_HORIZONTAL_COEFFS):
        print(f"  c[{name:>4}] = {c:+.4f}   (physical platform: {ref:+.2f})")

    proto = plant.TunnelProtocol(heading_offset_rad=math.radians(args.offset_deg))
    held = plant.simulate_tunnel_cells(params, plant.barrel_airframe(rng_seed=args.seed + 1), proto).concat_lanes()
    print(f"\nheld-out headings (offset {args.offset_deg:g} deg)")
    print(format_report(evaluate(estimate_log(held, model, params), held, min_true_speed=args.min_speed)))

    wind = plant.ramp_wind_script()
    ramp = plant.run_flight_scenario(params, plant.barrel_airframe(rng_seed=args.seed + 2),
                                     plant.hover_script(wind.duration), wind)
    print("ramp profile")
    print(format_report(evaluate(estimate_log(ramp, model, params), ramp, min_true_speed=args.min_speed)))


if __name__ == "__main__":
    main()
