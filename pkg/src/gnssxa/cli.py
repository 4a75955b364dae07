"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 infeasible attack, 4 data/schema
error, 1 any other failure. With ``--json`` a machine-readable error object
is also written to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import PositionGeneration, PositionRelay, TimeTargeted, plan_position_attack, plan_time_attack
from .checks import isb_selection_matrix
from .errors import DataError, GnssXaError, Infeasible, ParseError, SchemaError
from .frames import enu_to_ecef, llh_to_ecef
from .geometry import MULTI, SINGLE
from .harness import (
    ExperimentConfig,
    empirical_det,
    run_experiment,
    sweep_target_distance,
    write_det_csv,
    write_sweep_csv,
    write_trace_csv,
    write_trials_csv,
)
from .pvt import PvtSolution, SolverConfig, apply_tamper, solve
from .scenario import PADOVA_LLH, NoiseModel, fmt_json, generate_scenario, load_scenario, save_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_DATA = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str, n: int | None = None, name: str = "value") -> list[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise UsageError(f"{name}: expected {n} comma-separated numbers, got {len(values)}")
    if not all(np.isfinite(values)):
        raise UsageError(f"{name}: values must be finite")
    return values


def _add_target(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--target-enu", metavar="E,N,U",
                   help="target as East,North,Up offsets from the scenario truth (meters)")
    g.add_argument("--target-llh", metavar="LAT,LON,ALT",
                   help="target as WGS-84 latitude,longitude (degrees), height (meters)")


def _target(args, scenario):
    if args.target_enu:
        return enu_to_ecef(_floats(args.target_enu, 3, "--target-enu"), scenario.truth_pos)
    if args.target_llh:
        return llh_to_ecef(*_floats(args.target_llh, 3, "--target-llh"))
    raise UsageError("a target is required: pass --target-enu or --target-llh")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="also print errors as a JSON object on stderr (flag)")

    p = _Parser(prog="gnssxa", description="Pseudorange-level GNSS PVT, cross-authentication "
                "checks and spoofing-attack experiments.", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", parents=[common], help="generate a synthetic scenario")
    g.add_argument("--n-auth", type=int, required=True, help="authenticated satellites (count)")
    g.add_argument("--n-open", type=int, required=True, help="open satellites (count)")
    g.add_argument("--m", type=int, default=2, help="constellations (count, default 2)")
    g.add_argument("--epochs", type=int, default=600, help="epochs at 1 Hz (count, default 600)")
    g.add_argument("--seed", type=int, default=0, help="geometry seed (integer)")
    g.add_argument("--lat", type=float, default=PADOVA_LLH[0], help="receiver latitude (degrees)")
    g.add_argument("--lon", type=float, default=PADOVA_LLH[1], help="receiver longitude (degrees)")
    g.add_argument("--alt", type=float, default=PADOVA_LLH[2], help="receiver height (meters)")
    g.add_argument("--out", required=True, help="output scenario JSON (path)")

    s = sub.add_parser("solve", parents=[common], help="solve every epoch of a scenario")
    s.add_argument("--scenario", required=True, help="scenario JSON (path)")
    s.add_argument("--mode", choices=(MULTI, SINGLE), default=MULTI,
                   help="clock formulation: one clock per constellation or one clock plus known ISB")
    s.add_argument("--tamper", help="tamper JSON to add to the pseudoranges (path)")
    s.add_argument("--max-iters", type=int, default=20, help="iteration cap (count)")
    s.add_argument("--eps-m", type=float, default=1e-8, help="convergence threshold on the update (meters)")
    s.add_argument("--out", required=True, help="output CSV (path)")

    t = sub.add_parser("attack-time", parents=[common],
                       help="synthesize a time-targeted tamper that keeps the clock check quiet")
    t.add_argument("--scenario", required=True, help="scenario JSON (path)")
    _add_target(t)
    t.add_argument("--method", choices=("exact", "minimize"), default="exact",
                   help="normal equations or least-squares minimization")
    t.add_argument("--minimize", dest="method", action="store_const", const="minimize",
                   help="shorthand for --method minimize (flag)")
    t.add_argument("--refine", type=int, default=0, help="re-linearization passes (count)")
    t.add_argument("--out", required=True, help="output tamper JSON (path)")

    a = sub.add_parser("attack-pos", parents=[common],
                       help="synthesize a relay or generation position attack")
    a.add_argument("--scenario", required=True, help="scenario JSON (path)")
    a.add_argument("--mode", choices=("relay", "generation"), required=True, help="attack kind")
    a.add_argument("--gamma-t-us", type=float, required=True, help="clock push (microseconds)")
    a.add_argument("--xi-m", metavar="X,Y,Z", help="relay position margin, ECEF axes (meters)")
    a.add_argument("--out", required=True, help="output tamper JSON (path)")

    d = sub.add_parser("det", parents=[common], help="Monte Carlo DET curve of one attack")
    d.add_argument("--scenario", required=True, help="scenario JSON (path)")
    d.add_argument("--attack", choices=("time", "relay", "generation"), required=True, help="attack kind")
    _add_target(d)
    d.add_argument("--gamma-t-us", type=float, default=10.0,
                   help="clock push of position attacks (microseconds)")
    d.add_argument("--xi-m", metavar="X,Y,Z", help="relay position margin, ECEF axes (meters)")
    _add_noise(d)
    d.add_argument("--t-start-s", type=float, default=0.0, help="attack start time (seconds)")
    d.add_argument("--refine", type=int, default=0, help="time attack re-linearization passes (count)")
    d.add_argument("--out", required=True, help="output DET CSV (path)")
    d.add_argument("--trials-out", help="per-trial CSV (path)")
    d.add_argument("--trace-out", help="per-epoch clock trace CSV (path)")

    w = sub.add_parser("sweep", parents=[common], help="time-attack DET curves versus target distance")
    w.add_argument("--scenario", required=True, help="scenario JSON (path)")
    w.add_argument("--distances-km", required=True, metavar="D1,D2,...",
                   help="target distances from the truth (kilometers)")
    w.add_argument("--bearing-deg", type=float, default=90.0,
                   help="target bearing, clockwise from north (degrees)")
    _add_noise(w)
    w.add_argument("--out", required=True, help="output CSV (path)")
    return p


def _add_noise(p):
    p.add_argument("--sigma-l", type=float, default=0.0, help="victim range noise std (meters)")
    p.add_argument("--sigma-a", type=float, default=0.0, help="relay attacker noise std (meters)")
    p.add_argument("--sigma-floor", type=float, default=0.0,
                   help="receiver noise present under both hypotheses (meters)")
    p.add_argument("--reps", type=int, default=35, help="Monte Carlo repetitions per epoch (count)")
    p.add_argument("--seed", type=int, default=0, help="noise seed (integer)")
    p.add_argument("--no-crn", action="store_true",
                   help="draw independent victim noise for the attacked trials (flag)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (count, capped by GNSSXA_THREADS)")


# ---------------------------------------------------------------------------
# tamper files


def write_tamper(path, kind: str, attack: str, times, vectors) -> None:
    doc = {"kind": kind, "attack": attack,
           "epochs": [{"t": float(t), "delta_r_m": [float(v) for v in dr]} for t, dr in zip(times, vectors)]}
    lines = ["{", f'  "kind": {fmt_json(doc["kind"])},', f'  "attack": {fmt_json(doc["attack"])},', '  "epochs": [']
    for i, ep in enumerate(doc["epochs"]):
        sep = "," if i < len(doc["epochs"]) - 1 else ""
        lines.append(f"    {fmt_json(ep)}{sep}")
    lines += ["  ]", "}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_tamper(path, scenario) -> list[np.ndarray]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("epochs"), list):
        raise ParseError(f"{path}: expected an object with an 'epochs' list")
    if len(doc["epochs"]) != len(scenario.epochs):
        raise SchemaError(f"{path}: {len(doc['epochs'])} epochs, scenario has {len(scenario.epochs)}")
    out = []
    for i, (ep, sc_ep) in enumerate(zip(doc["epochs"], scenario.epochs)):
        dr = ep.get("delta_r_m") if isinstance(ep, dict) else None
        if not isinstance(dr, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in dr):
            raise ParseError(f"{path}: epochs[{i}].delta_r_m must be a list of numbers")
        if len(dr) != len(sc_ep):
            raise SchemaError(f"{path}: epochs[{i}] has {len(dr)} entries, epoch has {len(sc_ep)} satellites")
        out.append(np.array(dr, dtype=float))
    return out


# ---------------------------------------------------------------------------
# commands


def _isb_solver(scenario, cfg: SolverConfig | None = None) -> SolverConfig:
    cfg = cfg or SolverConfig()
    return SolverConfig(cfg.max_iters, cfg.convergence_eps, scenario.meta.isb_true_s if scenario.m > 1 else None)


def cmd_gen(args) -> int:
    sc = generate_scenario(args.n_auth, args.n_open, args.m, (args.lat, args.lon, args.alt),
                           n_epochs=args.epochs, geometry_seed=args.seed)
    save_scenario(sc, args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = load_scenario(args.scenario)
    tampers = read_tamper(args.tamper, scenario) if args.tamper else None
    cfg = SolverConfig(args.max_iters, args.eps_m)
    if args.mode == SINGLE:
        cfg = _isb_solver(scenario, cfg)
    n_clk = scenario.m if args.mode == MULTI else 1
    header = ["epoch", "t_s", "x_m", "y_m", "z_m"]
    header += [f"clk{k + 1}_us" for k in range(n_clk)] if n_clk > 1 else ["clk_us"]
    header += ["iterations", "converged"]
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for e, ep in enumerate(scenario.epochs):
            if tampers is not None:
                ep = apply_tamper(ep, tampers[e])
            rep = solve(ep, cfg=cfg, mode=args.mode, n_clocks=n_clk)
            sol = rep.solution
            w.writerow([e, format(ep.time_tag, ".12g")]
                       + [format(v, ".12g") for v in sol.pos_ecef]
                       + [format(v, ".12g") for v in sol.clocks_s * 1e6]
                       + [rep.iterations, int(rep.converged)])
    return EXIT_OK


def cmd_attack_time(args) -> int:
    scenario = load_scenario(args.scenario)
    target = _target(args, scenario)
    if scenario.m < 2:
        raise UsageError("the time attack needs a multi-constellation scenario (m >= 2)")
    c = isb_selection_matrix(scenario.m)
    vectors = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        for ep in scenario.epochs:
            legit = solve(ep, n_clocks=scenario.m).solution
            vectors.append(plan_time_attack(ep, legit, target, c, method=args.method,
                                            refine=args.refine).delta_r)
    if caught:
        print(f"warning: {caught[0].message}", file=sys.stderr)
    write_tamper(args.out, "generation", "time", [ep.time_tag for ep in scenario.epochs], vectors)
    return EXIT_OK


def _position_plan(args):
    kind = getattr(args, "attack", None) or args.mode
    gamma = args.gamma_t_us * 1e-6
    if kind == "relay":
        xi = _floats(args.xi_m, 3, "--xi-m") if args.xi_m else (0.0, 0.0, 0.0)
        return PositionRelay(gamma, tuple(xi))
    if args.xi_m:
        raise UsageError("--xi-m applies to relay attacks only")
    return PositionGeneration(gamma)


def cmd_attack_pos(args) -> int:
    scenario = load_scenario(args.scenario)
    plan = _position_plan(args)
    cfg = _isb_solver(scenario)
    vectors = []
    for e, ep in enumerate(scenario.epochs):
        legit = solve(ep, cfg=cfg, mode=SINGLE).solution
        try:
            vectors.append(plan_position_attack(ep, legit, plan).delta_r)
        except Infeasible as exc:
            raise type(exc)(f"epoch {e}: {exc}") from None
    kind = "relay" if isinstance(plan, PositionRelay) else "generation"
    write_tamper(args.out, kind, "position", [ep.time_tag for ep in scenario.epochs], vectors)
    return EXIT_OK


def _noise(args) -> NoiseModel:
    return NoiseModel(args.sigma_l, args.sigma_a, args.seed, args.sigma_floor)


def cmd_det(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.attack == "time":
        attack = TimeTargeted(PvtSolution(_target(args, scenario), np.zeros(scenario.m)))
    else:
        attack = _position_plan(args)
    cfg = ExperimentConfig(scenario, attack, _noise(args), repetitions=args.reps, crn=not args.no_crn,
                           t_start_s=args.t_start_s, refine=args.refine, workers=args.workers)
    result = run_experiment(cfg)
    write_det_csv(empirical_det(result), args.out)
    if args.trials_out:
        write_trials_csv(result, args.trials_out)
    if args.trace_out:
        write_trace_csv(result, args.trace_out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    distances = [1000.0 * d for d in _floats(args.distances_km, None, "--distances-km")]
    if any(d < 0 for d in distances):
        raise UsageError("--distances-km: distances must be >= 0")
    base = ExperimentConfig(scenario, TimeTargeted(PvtSolution(scenario.truth_pos, np.zeros(scenario.m))),
                            _noise(args), repetitions=args.reps, crn=not args.no_crn, workers=args.workers)
    write_sweep_csv(sweep_target_distance(base, distances, args.bearing_deg), args.out)
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "attack-time": cmd_attack_time,
    "attack-pos": cmd_attack_pos,
    "det": cmd_det,
    "sweep": cmd_sweep,
}


def _report(exc: BaseException, code: int, as_json: bool) -> int:
    message = str(exc)
    print(f"gnssxa: error: {message}", file=sys.stderr)
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": message, "exit_code": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _report(exc, EXIT_USAGE, as_json)
    except Infeasible as exc:
        return _report(exc, EXIT_INFEASIBLE, as_json)
    except (DataError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError) as exc:
        return _report(exc, EXIT_DATA, as_json)
    except (GnssXaError, OSError) as exc:
        return _report(exc, EXIT_FAIL, as_json)
    except ValueError as exc:
        return _report(exc, EXIT_USAGE, as_json)


if __name__ == "__main__":
    sys.exit(main())
