"""Lag of the gain-scheduled filter against fixed-cutoff filters on the wind ramp.

    python3 scripts/filter_comparison.py
"""

import argparse

import numpy as np

from dobwind import plant
from dobwind.airmodel import calibrate
from dobwind.frames import UavParams
from dobwind.pipeline import FilterSchedule, PipelineConfig, estimate_log


def rise_time(vwh, t, t0, level):
    hit = np.flatnonzero((t >= t0) & (vwh >= level))
    return float(t[hit[0]] - t0) if hit.size else float("inf")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--noise", type=float, default=0.5, help="force noise sigma in N for the spread column")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = UavParams()
    model = calibrate(plant.run_wind_tunnel_scenario(params, plant.barrel_airframe(rng_seed=args.seed)), params, 20.0)
    wind = plant.ramp_wind_script()
    hover = plant.hover_script(wind.duration)
    # timing on a noiseless run, output spread on a noisy one
    clean = plant.run_flight_scenario(params, plant.barrel_airframe(noise_sigma=0.0), hover, wind)
    noisy = plant.run_flight_scenario(params, plant.barrel_airframe(noise_sigma=args.noise, rng_seed=args.seed + 1),
                                      hover, wind)
    true_v = np.hypot(clean.wind[:, 0], clean.wind[:, 1])
    ramp = (clean.t > 15.0) & (clean.t < 110.0)
    hold = clean.t >= wind.duration - 15.0
    sched = FilterSchedule()
    variants = [("scheduled", sched), (f"fixed {sched.f_low:g} Hz", FilterSchedule.fixed(sched.f_low)),
                (f"fixed {sched.f_high:g} Hz", FilterSchedule.fixed(sched.f_high))]
    print(f"{'filter':<14}{'90% rise (s)':>13}{'ramp lag (m/s)':>16}{'hold std':>10}")
    for name, s in variants:
        cfg = PipelineConfig(schedule=s)
        est = estimate_log(clean, model, params, cfg)
        lag = np.mean(true_v[ramp] - est.vwh[ramp])
        spread = estimate_log(noisy, model, params, cfg).vwh[hold].std()
        print(f"{name:<14}{rise_time(est.vwh, clean.t, 10.0, 9.0):>13.2f}{lag:>16.4f}{spread:>10.3f}")


if __name__ == "__main__":
    main()
