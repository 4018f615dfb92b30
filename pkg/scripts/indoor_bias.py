"""Zero-wind bias of the estimate while the vehicle manoeuvres.

    python3 scripts/indoor_bias.py --speed 2
"""

import argparse

import numpy as np

from dobwind import plant
from dobwind.airmodel import calibrate
from dobwind.frames import UavParams
from dobwind.pipeline import estimate_log


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--speed", type=float, default=2.0, help="leg speed in m/s")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-vertical", action="store_true", help="skip the vertical calibration legs")
    args = ap.parse_args()

    params = UavParams()
    airframe = plant.barrel_airframe(rng_seed=args.seed)
    tunnel = plant.run_wind_tunnel_scenario(params, airframe)
    vertical = None if args.no_vertical else plant.vertical_calibration_lanes(params, airframe)
    model = calibrate(tunnel, params, 20.0, vertical)

    script = plant.indoor_flight_script(speed=args.speed)
    calm = plant.WindScript([(1.0, np.zeros(3))])
    log = plant.run_flight_scenario(params, plant.barrel_airframe(rng_seed=args.seed + 3), script, calm)
    est = estimate_log(log, model, params)
    ref = np.array([script.value(t) for t in log.t])
    live = est.confidence != "warmup"
    print(f"{'segment':<12}{'samples':>8}{'mean |A_w|':>12}{'mean V_wh':>11}{'mean V_wv':>11}")
    for name, axis in (("hover", None), ("x legs", 0), ("y legs", 1), ("z legs", 2)):
        if axis is None:
            sel = live & (np.abs(ref).sum(axis=1) == 0)
        else:
            sel = live & (ref[:, axis] != 0)
        mag = np.linalg.norm(est.wind[sel], axis=1).mean()
        print(f"{name:<12}{sel.sum():>8}{mag:>12.3f}{est.vwh[sel].mean():>11.3f}{est.vwv[sel].mean():>+11.3f}")
    moving = live & (np.abs(ref).sum(axis=1) > 0)
    print(f"\nmean |A_w| over all manoeuvres: {np.linalg.norm(est.wind[moving], axis=1).mean():.3f} m/s")


if __name__ == "__main__":
    main()
