"""Monte Carlo experiments: legitimate vs attacked solves over every epoch of
a scenario, check metrics under both hypotheses, empirical DET curves and
CSV outputs.

Each (epoch, repetition) pair draws its noise from its own generator seeded
by ``(seed, epoch, repetition)``, so results do not depend on how the work is
split across worker processes.
"""

from __future__ import annotations

import csv
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .analysis import DetCurve, det_from_metrics
from .attacks import (
    PositionGeneration,
    PositionRelay,
    TimeTargeted,
    plan_position_attack,
    plan_time_attack,
)
from .checks import PositionCheckConfig, TimeCheckConfig, isb_metric_m, position_metric_m
from .errors import EmptyHypothesis, GnssXaError
from .frames import enu_to_ecef
from .geometry import MULTI, SINGLE, build_geometry, dop
from .model import C_LIGHT
from .pvt import PvtSolution, SolverConfig, solve, solve_batch
from .scenario import NoiseModel, Scenario, load_scenario

N_THRESHOLDS = 200
TRIALS_HEADER = ("epoch", "rep", "hyp", "metric_m", "x", "y", "z", "clk_us", "shift_clk_us", "shift_pos_m")
DET_HEADER = ("threshold_m", "p_fa", "p_md", "fa_ci", "md_ci", "mode")
TRACE_HEADER = ("epoch", "t_s", "legit_clk_us", "attacked_clk_us", "legit_metric_m", "attacked_metric_m")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``check=None`` picks the check matching the attack: the clock-consistency
    check (calibration bias 0, reference ISB from the scenario) for time
    attacks, the distance to the true position for position attacks.
    ``t_start_s`` switches the attack on as a step at that epoch time.
    ``crn`` makes both hypotheses of a trial share the victim noise draw.
    """

    scenario: Scenario | str | Path
    attack: TimeTargeted | PositionRelay | PositionGeneration
    noise: NoiseModel = field(default_factory=NoiseModel)
    check: TimeCheckConfig | PositionCheckConfig | None = None
    repetitions: int = 35
    threshold_grid: Sequence[float] | None = None
    crn: bool = True
    t_start_s: float = 0.0
    method: str = "exact"
    refine: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.threshold_grid is not None:
            grid = np.asarray(self.threshold_grid, dtype=float)
            if grid.size == 0 or np.any(np.diff(grid) < 0):
                raise ValueError("threshold_grid must be non-empty and sorted")


class TrialRecord(NamedTuple):
    epoch: int
    rep: int
    hyp: int  # 0 legitimate, 1 attacked
    metric_m: float
    pos_ecef: tuple[float, float, float]
    clk_us: float
    shift_clk_us: float
    shift_pos_m: float


@dataclass(frozen=True)
class EpochInfo:
    """Noiseless per-epoch quantities (legitimate and attacked solves)."""

    t_s: np.ndarray
    legit_clk_us: np.ndarray
    attacked_clk_us: np.ndarray
    legit_metric_m: np.ndarray
    attacked_metric_m: np.ndarray
    attacked_pos: np.ndarray  # (E, 3)
    mu1_m: np.ndarray  # signed attacked metric offset (clock check), else 0
    sigma0_m: np.ndarray  # legitimate metric std per epoch
    sigma1_m: np.ndarray  # attacked metric std per epoch


@dataclass(frozen=True)
class ExperimentResult:
    """Trial records in (epoch, repetition, hypothesis) order, as columns."""

    epoch: np.ndarray
    rep: np.ndarray
    hyp: np.ndarray
    metric_m: np.ndarray
    pos: np.ndarray
    clk_us: np.ndarray
    shift_clk_us: np.ndarray
    shift_pos_m: np.ndarray
    info: EpochInfo
    sigma_ref_m: float  # scale used for the default threshold grid

    def __len__(self):
        return self.epoch.size

    def __getitem__(self, i) -> TrialRecord:
        return TrialRecord(
            int(self.epoch[i]), int(self.rep[i]), int(self.hyp[i]), float(self.metric_m[i]),
            tuple(float(v) for v in self.pos[i]), float(self.clk_us[i]),
            float(self.shift_clk_us[i]), float(self.shift_pos_m[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def metrics(self, hyp: int) -> np.ndarray:
        return self.metric_m[self.hyp == hyp]

    def default_thresholds(self) -> np.ndarray:
        return default_threshold_grid(self.sigma_ref_m, self.metric_m)

    def det(self, threshold_grid=None) -> DetCurve:
        return empirical_det(self, threshold_grid)


def default_threshold_grid(sigma0: float, metrics) -> np.ndarray:
    """200 log-spaced thresholds over ``[sigma0/100, 10 max|metric|]``."""
    top = 10.0 * float(np.max(np.abs(metrics))) if np.size(metrics) else 0.0
    lo = sigma0 / 100.0 if sigma0 > 0 else top * 1e-6
    if not lo > 0:
        lo = 1e-9
    hi = max(top, 10.0 * lo)
    return np.geomspace(lo, hi, N_THRESHOLDS)


def empirical_det(records, threshold_grid=None) -> DetCurve:
    """p_FA = share of H0 trials failing the check, p_MD = share of H1 trials
    passing it, with Wilson half-widths."""
    if isinstance(records, ExperimentResult):
        hyp, metric = records.hyp, records.metric_m
        grid = records.default_thresholds() if threshold_grid is None else threshold_grid
    else:
        recs = list(records)
        hyp = np.array([r.hyp for r in recs], dtype=int)
        metric = np.array([r.metric_m for r in recs], dtype=float)
        if threshold_grid is None:
            raise ValueError("a threshold grid is needed for plain record sequences")
        grid = threshold_grid
    m0, m1 = metric[hyp == 0], metric[hyp == 1]
    if m0.size == 0 or m1.size == 0:
        raise EmptyHypothesis("records must contain both hypotheses")
    return det_from_metrics(m0, m1, grid)


# ---------------------------------------------------------------------------
# experiment execution


@dataclass(frozen=True)
class _Context:
    scenario: Scenario
    attack: object
    check: object
    noise: NoiseModel
    reps: int
    crn: bool
    t_start: float
    method: str
    refine: int
    solver: SolverConfig
    mode: str


def default_check(scenario: Scenario, attack) -> TimeCheckConfig | PositionCheckConfig:
    if isinstance(attack, TimeTargeted):
        isb_m = C_LIGHT * np.asarray(scenario.meta.isb_true_s)
        # the threshold is swept when building DET curves; 1 m is a placeholder
        return TimeCheckConfig.isb(scenario.m, 1.0, 0.0, isb_m)
    return PositionCheckConfig(scenario.truth_pos, 0.0)


def _metric(ctx: _Context, states: np.ndarray) -> np.ndarray:
    if isinstance(ctx.check, TimeCheckConfig):
        return isb_metric_m(states[:, 3:], ctx.check)
    return position_metric_m(states[:, :3], ctx.check.p_ref)


def _signed_gap(ctx: _Context, clocks_m) -> float:
    cfg = ctx.check
    gap = clocks_m[1:] - clocks_m[:1] - cfg.calib_bias - cfg.isb_ref
    return float(gap[np.argmax(np.abs(gap))])


def _tamper(ctx: _Context, epoch, legit: PvtSolution) -> np.ndarray:
    if epoch.time_tag < ctx.t_start:
        return np.zeros(len(epoch))
    if isinstance(ctx.attack, TimeTargeted):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            t = plan_time_attack(epoch, legit, ctx.attack.p_target.pos_ecef, ctx.check.c_matrix,
                                 method=ctx.method, refine=ctx.refine, cfg=ctx.solver)
        return t.delta_r
    return plan_position_attack(epoch, legit, ctx.attack).delta_r


def _run_epoch(ctx: _Context, e: int) -> dict:
    epoch = ctx.scenario.epochs[e]
    n = len(epoch)
    n_clocks = ctx.scenario.m if ctx.mode == MULTI else 1
    try:
        legit_rep = solve(epoch, cfg=ctx.solver, mode=ctx.mode, n_clocks=n_clocks)
        legit = legit_rep.solution
        dr = _tamper(ctx, epoch, legit)
        attacked_rep = solve(epoch.with_pseudoranges(epoch.pseudoranges + dr), initial=legit,
                             cfg=ctx.solver)
    except GnssXaError as exc:
        raise type(exc)(f"epoch {e}: {exc}") from None
    attacked = attacked_rep.solution

    relay = isinstance(ctx.attack, PositionRelay)
    sig_v = ctx.noise.sigma_victim
    sig_a = ctx.noise.sigma_a if relay else 0.0
    tampered = bool(np.any(dr))
    z = np.empty((ctx.reps, 3, n))
    seed = ctx.noise.seed
    for r in range(ctx.reps):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, e, r])))
        z[r] = rng.standard_normal((3, n))
    pr = epoch.pseudoranges
    h0 = pr + sig_v * z[:, 0]
    h1 = pr + dr + sig_v * (z[:, 0] if ctx.crn else z[:, 1])
    if tampered and sig_a > 0:
        h1 = h1 + sig_a * z[:, 2]
    try:
        s0 = solve_batch(epoch, h0, legit, ctx.solver).states
        s1 = solve_batch(epoch, h1, legit, ctx.solver).states
    except GnssXaError as exc:
        raise type(exc)(f"epoch {e}: {exc}") from None

    states = np.stack([s0, s1], axis=1).reshape(2 * ctx.reps, -1)  # rep-major, H0 then H1
    metric = _metric(ctx, states)
    shift_clk = states[:, 3] - legit.clocks_m[0]
    shift_pos = np.sqrt(np.sum((states[:, :3] - legit.pos_ecef) ** 2, axis=1))

    legit_metric = float(_metric(ctx, legit.state[None])[0])
    attacked_metric = float(_metric(ctx, attacked.state[None])[0])
    if isinstance(ctx.check, TimeCheckConfig):
        c1 = ctx.check.c_matrix[0]
        g_legit = legit_rep.geometry.h
        g_att = attacked_rep.geometry.h
        sigma0 = sig_v * float(np.sqrt((c1 @ g_legit) @ (c1 @ g_legit)))
        sig_t = np.hypot(sig_v, sig_a) if tampered else sig_v
        sigma1 = sig_t * float(np.sqrt((c1 @ g_att) @ (c1 @ g_att)))
        mu1 = _signed_gap(ctx, attacked.clocks_m) - _signed_gap(ctx, legit.clocks_m)
    else:
        pdop = dop(legit_rep.geometry.g).pdop
        sigma0 = sig_v * pdop
        sigma1 = (np.hypot(sig_v, sig_a) if tampered else sig_v) * pdop
        mu1 = 0.0
    return {
        "states": states,
        "metric": metric,
        "shift_clk": shift_clk,
        "shift_pos": shift_pos,
        "t": float(epoch.time_tag),
        "legit_clk": legit.clocks_m[0],
        "attacked_clk": attacked.clocks_m[0],
        "legit_metric": legit_metric,
        "attacked_metric": attacked_metric,
        "attacked_pos": attacked.pos_ecef,
        "mu1": mu1,
        "sigma0": sigma0,
        "sigma1": sigma1,
    }


def _run_chunk(ctx: _Context, epochs: Sequence[int]) -> list[dict]:
    return [_run_epoch(ctx, e) for e in epochs]


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("GNSSXA_THREADS")
    cap = int(env) if env and env.strip().isdigit() and int(env) > 0 else None
    n = requested if requested is not None else (cap or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, min(n, os.cpu_count() or 1))


def _context(cfg: ExperimentConfig) -> _Context:
    scenario = cfg.scenario if isinstance(cfg.scenario, Scenario) else load_scenario(cfg.scenario)
    check = cfg.check if cfg.check is not None else default_check(scenario, cfg.attack)
    if isinstance(check, TimeCheckConfig):
        mode = MULTI
        solver = cfg.solver
    else:
        if isinstance(cfg.attack, TimeTargeted):
            raise ValueError("the time-targeted attack is evaluated with the clock check")
        mode = SINGLE
        solver = cfg.solver
        if solver.isb_known is None and scenario.m > 1:
            solver = replace(solver, isb_known=scenario.meta.isb_true_s)
    return _Context(scenario, cfg.attack, check, cfg.noise, cfg.repetitions, cfg.crn,
                    cfg.t_start_s, cfg.method, cfg.refine, solver, mode)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """One legitimate (H0) and one attacked (H1) trial per (epoch, repetition)."""
    ctx = _context(cfg)
    n_epochs = len(ctx.scenario.epochs)
    workers = worker_count(cfg.workers)
    if workers == 1 or n_epochs < 2:
        parts = _run_chunk(ctx, range(n_epochs))
    else:
        chunks = [list(c) for c in np.array_split(np.arange(n_epochs), workers) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = [p for chunk in pool.map(_run_chunk, [ctx] * len(chunks), chunks) for p in chunk]

    reps = ctx.reps
    epoch_idx = np.repeat(np.arange(n_epochs), 2 * reps)
    rep_idx = np.tile(np.repeat(np.arange(reps), 2), n_epochs)
    hyp = np.tile(np.array([0, 1]), n_epochs * reps)
    states = np.concatenate([p["states"] for p in parts])
    info = EpochInfo(
        t_s=np.array([p["t"] for p in parts]),
        legit_clk_us=np.array([p["legit_clk"] for p in parts]) / C_LIGHT * 1e6,
        attacked_clk_us=np.array([p["attacked_clk"] for p in parts]) / C_LIGHT * 1e6,
        legit_metric_m=np.array([p["legit_metric"] for p in parts]),
        attacked_metric_m=np.array([p["attacked_metric"] for p in parts]),
        attacked_pos=np.array([p["attacked_pos"] for p in parts]),
        mu1_m=np.array([p["mu1"] for p in parts]),
        sigma0_m=np.array([p["sigma0"] for p in parts]),
        sigma1_m=np.array([p["sigma1"] for p in parts]),
    )
    return ExperimentResult(
        epoch=epoch_idx,
        rep=rep_idx,
        hyp=hyp,
        metric_m=np.concatenate([p["metric"] for p in parts]),
        pos=states[:, :3],
        clk_us=states[:, 3] / C_LIGHT * 1e6,
        shift_clk_us=np.concatenate([p["shift_clk"] for p in parts]) / C_LIGHT * 1e6,
        shift_pos_m=np.concatenate([p["shift_pos"] for p in parts]),
        info=info,
        sigma_ref_m=float(np.mean(info.sigma0_m)),
    )


def target_at_distance(scenario: Scenario, distance_m: float, bearing_deg: float = 90.0) -> np.ndarray:
    """ECEF point `distance_m` from the true position along a horizontal
    bearing (degrees clockwise from north)."""
    b = np.radians(bearing_deg)
    return enu_to_ecef([distance_m * np.sin(b), distance_m * np.cos(b), 0.0], scenario.truth_pos)


def sweep_target_distance(cfg: ExperimentConfig, distances_m, bearing_deg: float = 90.0,
                          threshold_grid=None) -> dict[float, DetCurve]:
    """Empirical DET of the time attack for targets at each distance from
    the true position, all along one bearing."""
    scenario = cfg.scenario if isinstance(cfg.scenario, Scenario) else load_scenario(cfg.scenario)
    curves = {}
    for d in distances_m:
        if d < 0:
            raise ValueError("distances must be >= 0")
        target = target_at_distance(scenario, float(d), bearing_deg)
        m = scenario.m
        attack = TimeTargeted(PvtSolution(target, np.zeros(m)))
        res = run_experiment(replace(cfg, scenario=scenario, attack=attack))
        curves[float(d)] = empirical_det(res, threshold_grid if threshold_grid is not None else cfg.threshold_grid)
    return curves


# ---------------------------------------------------------------------------
# CSV output


def _f(v) -> str:
    return format(float(v), ".12g")


def _write_rows(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_trials_csv(result: ExperimentResult, path) -> None:
    rows = (
        (int(result.epoch[i]), int(result.rep[i]), int(result.hyp[i]), _f(result.metric_m[i]),
         _f(result.pos[i, 0]), _f(result.pos[i, 1]), _f(result.pos[i, 2]), _f(result.clk_us[i]),
         _f(result.shift_clk_us[i]), _f(result.shift_pos_m[i]))
        for i in range(len(result))
    )
    _write_rows(path, TRIALS_HEADER, rows)


def det_rows(curve: DetCurve):
    return [
        (_f(t), _f(fa), _f(md), _f(fc), _f(mc), curve.mode)
        for t, fa, md, fc, mc in zip(curve.thresholds, curve.p_fa, curve.p_md, curve.fa_ci, curve.md_ci)
    ]


def write_det_csv(curve: DetCurve, path) -> None:
    _write_rows(path, DET_HEADER, det_rows(curve))


def write_sweep_csv(curves: dict[float, DetCurve], path) -> None:
    rows = [(_f(d / 1000.0),) + row for d, c in curves.items() for row in det_rows(c)]
    _write_rows(path, ("distance_km",) + DET_HEADER, rows)


def write_trace_csv(result: ExperimentResult, path) -> None:
    info = result.info
    rows = (
        (e, _f(info.t_s[e]), _f(info.legit_clk_us[e]), _f(info.attacked_clk_us[e]),
         _f(info.legit_metric_m[e]), _f(info.attacked_metric_m[e]))
        for e in range(info.t_s.size)
    )
    _write_rows(path, TRACE_HEADER, rows)
