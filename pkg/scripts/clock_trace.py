"""Per-epoch receiver clock and clock-check metric with the attack switched on
mid-run.

Writes one trace CSV per attack (time-targeted, relay, generation) with the
legitimate and attacked clock bias and check metric of every epoch, then one
relay trace per (onset, clock push) pair of the attack table.

    python scripts/clock_trace.py --out results/trace --onset 300
"""

import argparse
from pathlib import Path

import numpy as np

from gnssxa.attacks import PositionGeneration, PositionRelay, TimeTargeted
from gnssxa.harness import ExperimentConfig, run_experiment, target_at_distance, write_trace_csv
from gnssxa.pvt import PvtSolution
from gnssxa.scenario import NoiseModel, generate_scenario


# (onset in seconds, clock push in microseconds)
TABLE = ((60.0, 30.0), (100.0, 10.0), (150.0, 5.0))


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/trace"), help="output directory")
    p.add_argument("--onset", type=float, default=300.0, help="attack start (seconds)")
    p.add_argument("--gamma-us", type=float, default=10.0, help="position-attack clock push (microseconds)")
    p.add_argument("--distance-km", type=float, default=1.7, help="time-attack target distance (kilometers)")
    p.add_argument("--refine", type=int, default=1, help="time-attack re-linearization passes")
    p.add_argument("--epochs", type=int, default=600, help="scenario length (epochs)")
    return p.parse_args()


def main():
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    scenario = generate_scenario(3, 5, 2, n_epochs=args.epochs, geometry_seed=7)
    target = target_at_distance(scenario, 1000.0 * args.distance_km)
    attacks = {
        "time": TimeTargeted(PvtSolution(target, np.zeros(scenario.m))),
        "relay": PositionRelay(args.gamma_us * 1e-6),
        "generation": PositionGeneration(args.gamma_us * 1e-6),
    }
    for name, attack in attacks.items():
        cfg = ExperimentConfig(scenario, attack, NoiseModel(0.0), repetitions=1, t_start_s=args.onset,
                               refine=args.refine)
        res = run_experiment(cfg)
        write_trace_csv(res, args.out / f"trace_{name}.csv")
        info = res.info
        on = info.t_s >= args.onset
        if not on.any():
            print(f"{name:>10}: onset {args.onset:g} s is past the last epoch, nothing attacked")
            continue
        jump = info.attacked_clk_us[on] - info.legit_clk_us[on]
        dmetric = np.abs(info.attacked_metric_m - info.legit_metric_m)
        print(f"{name:>10}: clock jump {jump.mean():9.4f} us, max metric change {dmetric.max():.2e} m")

    for onset, push_us in TABLE:
        cfg = ExperimentConfig(scenario, PositionRelay(push_us * 1e-6), NoiseModel(0.0), repetitions=1,
                               t_start_s=onset)
        res = run_experiment(cfg)
        info = res.info
        write_trace_csv(res, args.out / f"trace_relay_t{onset:g}_{push_us:g}us.csv")
        jump = np.diff(info.attacked_clk_us - info.legit_clk_us)
        step = int(np.argmax(np.abs(jump))) + 1
        print(f"relay onset {onset:5g} s, push {push_us:4g} us: step of {jump[step - 1]:.4f} us at "
              f"t = {info.t_s[step]:g} s")


if __name__ == "__main__":
    main()
