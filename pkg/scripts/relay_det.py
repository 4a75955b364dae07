"""DET curves of the position check against a relay attack.

The relaying attacker adds its own receiver noise (sigma_A) to every range
while the victim keeps the noise of its recording (sigma_floor). The script
prints, for each attacker noise level, the false-alarm rate needed to push the
missed-detection rate below 1e-3.

    python scripts/relay_det.py --out results/relay
"""

import argparse
from pathlib import Path

from gnssxa.analysis import wilson_interval
from gnssxa.attacks import PositionRelay
from gnssxa.harness import ExperimentConfig, run_experiment, write_det_csv
from gnssxa.scenario import NoiseModel, generate_scenario


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=Path("results/relay"), help="output directory")
    p.add_argument("--sigma-a", default="0,3,9", help="attacker noise levels (meters)")
    p.add_argument("--sigma-floor", type=float, default=3.0, help="noise of the recording (meters)")
    p.add_argument("--gamma-us", type=float, default=10.0, help="clock push (microseconds)")
    p.add_argument("--reps", type=int, default=84, help="repetitions per epoch")
    p.add_argument("--epochs", type=int, default=600, help="scenario length (epochs)")
    p.add_argument("--seed", type=int, default=9, help="geometry and noise seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    return p.parse_args()


def main():
    args = parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    scenario = generate_scenario(3, 5, 2, n_epochs=args.epochs, geometry_seed=7)
    attack = PositionRelay(args.gamma_us * 1e-6)
    print(f"{'sigma_A':>8} {'trials':>8} {'p_fa@p_md<=1e-3':>16} {'wilson':>17}")
    for sigma_a in (float(s) for s in args.sigma_a.split(",")):
        noise = NoiseModel(0.0, sigma_a, args.seed, args.sigma_floor)
        res = run_experiment(ExperimentConfig(scenario, attack, noise, repetitions=args.reps,
                                              crn=sigma_a > 0, workers=args.workers))
        det = res.det()
        write_det_csv(det, args.out / f"det_sigma_a{sigma_a:g}.csv")
        i = det.point_at_pmd(1e-3)
        n0 = res.metrics(0).size
        lo, hi = wilson_interval(round(det.p_fa[i] * n0), n0)
        print(f"{sigma_a:8g} {len(res):8d} {det.p_fa[i]:16.4f}   [{lo:.4f}, {hi:.4f}]")


if __name__ == "__main__":
    main()
