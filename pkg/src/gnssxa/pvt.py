"""Iterative linearized least-squares PVT in the multi- and single-reference
clock formulations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateGeometry, LengthMismatch
from .geometry import MULTI, SINGLE, GeometrySet, build_geometry, geometry_matrix, pseudoinverse
from .model import C_LIGHT, predicted_range
from .scenario import Epoch, SatelliteObservation


@dataclass(frozen=True)
class PvtSolution:
    """Receiver position (ECEF, m) and clock terms ``c*t`` in meters.

    Multi-reference solutions carry one clock per constellation, single-reference
    solutions exactly one.
    """

    pos_ecef: np.ndarray
    clocks_m: np.ndarray
    mode: str = MULTI

    def __post_init__(self):
        pos = np.array(self.pos_ecef, dtype=float).reshape(3)
        clocks = np.atleast_1d(np.array(self.clocks_m, dtype=float))
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(clocks))):
            raise ValueError("PVT entries must be finite")
        if self.mode not in (MULTI, SINGLE):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == SINGLE and clocks.size != 1:
            raise ValueError("single-reference solutions carry exactly one clock")
        pos.flags.writeable = False
        clocks.flags.writeable = False
        object.__setattr__(self, "pos_ecef", pos)
        object.__setattr__(self, "clocks_m", clocks)

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.pos_ecef, self.clocks_m])

    @property
    def clocks_s(self) -> np.ndarray:
        return self.clocks_m / C_LIGHT

    @classmethod
    def from_state(cls, state, mode: str = MULTI) -> PvtSolution:
        state = np.asarray(state, dtype=float)
        return cls(state[:3], state[3:], mode)

    @classmethod
    def cold_start(cls, n_clocks: int = 1, mode: str = MULTI) -> PvtSolution:
        return cls(np.zeros(3), np.zeros(1 if mode == SINGLE else n_clocks), mode)


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 20
    convergence_eps: float = 1e-8  # meters, on the norm of the state update
    isb_known: tuple[float, ...] | None = None  # seconds, constellations 2..M vs 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be > 0")


@dataclass(frozen=True)
class SolveReport:
    solution: PvtSolution
    iterations: int
    final_residuals: np.ndarray
    converged: bool
    geometry: GeometrySet
    last_step: float


def receiver_clock_terms(clocks_m, constellations, mode: str, isb_s=None) -> np.ndarray:
    """Map receiver clock states (``(..., k)``) to one clock term per satellite."""
    clocks_m = np.asarray(clocks_m, dtype=float)
    idx = np.asarray(constellations) - 1
    if mode == MULTI:
        return clocks_m[..., idx]
    offsets = np.zeros(idx.max() + 1)
    if isb_s is not None:
        isb = C_LIGHT * np.asarray(isb_s, dtype=float)
        offsets[1 : 1 + isb.size] = isb[: offsets.size - 1]
    return clocks_m[..., :1] + offsets[idx]


def predict_pseudorange(obs: SatelliteObservation, est: PvtSolution, isb_s=None) -> float:
    """Predicted pseudorange of one satellite at the estimate `est` (zero noise)."""
    clk = receiver_clock_terms(est.clocks_m, [obs.constellation], est.mode, isb_s)
    return float(
        predicted_range(np.array([obs.pos_ecef]), [obs.sat_clock_bias], [obs.atmo_delay],
                        est.pos_ecef, clk)[0]
    )


def predict_epoch(epoch: Epoch, est: PvtSolution, isb_s=None) -> np.ndarray:
    clk = receiver_clock_terms(est.clocks_m, epoch.constellations, est.mode, isb_s)
    return predicted_range(epoch.sat_pos, epoch.sat_clk_s, epoch.atmo_m, est.pos_ecef, clk)


def _check_solvable(epoch: Epoch, n_unknowns: int) -> None:
    if len(epoch) < n_unknowns:
        raise DegenerateGeometry(f"{len(epoch)} satellites cannot determine {n_unknowns} unknowns")


class BatchResult(NamedTuple):
    states: np.ndarray  # (R, 3 + n_clocks)
    iterations: np.ndarray
    converged: np.ndarray
    last_step: np.ndarray


def solve_batch(epoch: Epoch, pseudoranges, initial: PvtSolution,
                cfg: SolverConfig | None = None) -> BatchResult:
    """Solve many pseudorange vectors sharing the satellite data of `epoch`,
    all starting from `initial`."""
    cfg = cfg or SolverConfig()
    pr = np.atleast_2d(np.asarray(pseudoranges, dtype=float))
    if pr.shape[1] != len(epoch):
        raise LengthMismatch(f"expected {len(epoch)} pseudoranges per row, got {pr.shape[1]}")
    mode = initial.mode
    n_clocks = initial.clocks_m.size
    _check_solvable(epoch, 3 + n_clocks)
    r = pr.shape[0]
    state = np.tile(initial.state, (r, 1))
    iterations = np.zeros(r, dtype=int)
    converged = np.zeros(r, dtype=bool)
    last = np.full(r, np.inf)
    active = np.arange(r)
    for _ in range(cfg.max_iters):
        s = state[active]
        g, _ = geometry_matrix(epoch.sat_pos, s[:, :3], epoch.constellations, n_clocks, mode)
        clk = receiver_clock_terms(s[:, 3:], epoch.constellations, mode, cfg.isb_known)
        pred = predicted_range(epoch.sat_pos, epoch.sat_clk_s, epoch.atmo_m, s[:, :3], clk)
        dr = pr[active] - pred
        dp = np.einsum("rij,rj->ri", pseudoinverse(g), dr)
        state[active] = s + dp
        iterations[active] += 1
        step = np.sqrt(np.sum(dp * dp, axis=1))
        last[active] = step
        done = step < cfg.convergence_eps
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    return BatchResult(state, iterations, converged, last)


def solve(
    epoch: Epoch,
    initial: PvtSolution | None = None,
    cfg: SolverConfig | None = None,
    mode: str = MULTI,
    n_clocks: int | None = None,
) -> SolveReport:
    """Gauss-Newton PVT: repeat ``dp = H dr``, ``p <- p + dp`` until
    ``||dp|| < cfg.convergence_eps`` or ``cfg.max_iters`` is reached.

    Without `initial` the solver cold-starts at the ECEF origin with zero
    clocks; the number of clocks defaults to the highest constellation index
    present in the epoch. Hitting ``max_iters`` is reported through
    ``converged=False`` rather than raised.
    """
    cfg = cfg or SolverConfig()
    if initial is None:
        if n_clocks is None:
            n_clocks = int(epoch.constellations.max())
        initial = PvtSolution.cold_start(n_clocks, mode)
    res = solve_batch(epoch, epoch.pseudoranges[None, :], initial, cfg)
    solution = PvtSolution.from_state(res.states[0], initial.mode)
    residuals = epoch.pseudoranges - predict_epoch(epoch, solution, cfg.isb_known)
    geom = build_geometry(epoch, solution)
    return SolveReport(
        solution=solution,
        iterations=int(res.iterations[0]),
        final_residuals=residuals,
        converged=bool(res.converged[0]),
        geometry=geom,
        last_step=float(res.last_step[0]),
    )


def apply_tamper(epoch: Epoch, tamper) -> Epoch:
    """Shift every pseudorange by the tamper vector (a TamperVector or array)."""
    delta = np.asarray(getattr(tamper, "delta_r", tamper), dtype=float)
    if delta.shape != (len(epoch),):
        raise LengthMismatch(f"tamper has shape {delta.shape}, epoch has {len(epoch)} satellites")
    if not delta.any():
        return epoch
    return epoch.with_pseudoranges(epoch.pseudoranges + delta)
