"""Pseudorange tampering that moves the victim's PVT while keeping the
cross-authentication checks quiet.

Three strategies are covered:

* time-targeted generation attack: forge only the open ranges so that the
  solution moves toward a target while ``C H dr`` stays at the budget
  ``delta'`` (zero by default, i.e. the clock check cannot see it);
* relay (meaconing) attack: delay every signal by a common amount, optionally
  spending a position margin ``xi``;
* generation position attack: shift the receiver clock by ``c*gamma`` while
  leaving the authenticated ranges untouched and the position unchanged.

Tamper vectors are N-vectors in meters, authenticated satellites first.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import Infeasible, LengthMismatch, RankDeficient, SingularProjection
from .geometry import GeometrySet, NullSpaceBasis, build_geometry, null_space, numerical_rank
from .model import C_LIGHT
from .pvt import PvtSolution, SolverConfig, apply_tamper, solve

GENERATION = "generation"
RELAY = "relay"

# Linearization caveat: beyond this the induced solution drifts from the target.
TARGET_WARN_M = 10_000.0
SNAP_M = 1e-6
# Feasible directions whose effect on the solution is below this fraction of
# ||H|| are treated as invisible to the victim.
VISIBLE_RTOL = 1e-10


@dataclass(frozen=True)
class TimeTargeted:
    p_target: PvtSolution


@dataclass(frozen=True)
class PositionRelay:
    gamma_t: float  # seconds
    xi: tuple[float, float, float] = (0.0, 0.0, 0.0)  # meters


@dataclass(frozen=True)
class PositionGeneration:
    gamma_t: float  # seconds


AttackPlan = Union[TimeTargeted, PositionRelay, PositionGeneration]


@dataclass(frozen=True)
class TamperVector:
    """Range alteration ``dr_T`` (meters) added to the victim's pseudoranges.

    Generation-kind vectors are exactly zero on the authenticated entries.
    """

    delta_r: np.ndarray
    kind: str
    n_auth: int = 0

    def __post_init__(self):
        d = np.array(self.delta_r, dtype=float).reshape(-1)
        if self.kind not in (GENERATION, RELAY):
            raise ValueError(f"unknown tamper kind {self.kind!r}")
        if not 0 <= self.n_auth <= d.size:
            raise LengthMismatch(f"n_auth={self.n_auth} does not fit a {d.size}-vector")
        if self.kind == GENERATION and np.any(d[: self.n_auth] != 0.0):
            raise ValueError("generation tampering must leave authenticated ranges untouched")
        d.flags.writeable = False
        object.__setattr__(self, "delta_r", d)

    def __len__(self):
        return self.delta_r.size

    @property
    def auth(self) -> np.ndarray:
        return self.delta_r[: self.n_auth]

    @property
    def open(self) -> np.ndarray:
        return self.delta_r[self.n_auth :]

    @classmethod
    def zeros(cls, n: int, kind: str = GENERATION, n_auth: int = 0) -> TamperVector:
        return cls(np.zeros(n), kind, n_auth)


@dataclass(frozen=True)
class FeasibleSpace:
    """Affine set ``{particular + U a}`` of open-range tampers with
    ``C H_O dr_O = delta'``."""

    particular: np.ndarray  # (N_O,)
    basis: NullSpaceBasis  # over the open coordinates
    dim: int
    c_matrix: np.ndarray = field(repr=False)
    delta_prime: np.ndarray = field(repr=False)

    def embed(self, geom: GeometrySet):
        """Particular solution and basis lifted to N-vectors (zeros on the
        authenticated coordinates)."""
        n_a = geom.n_auth
        dr_p = np.concatenate([np.zeros(n_a), self.particular])
        u = np.vstack([np.zeros((n_a, self.dim)), self.basis.vectors])
        return dr_p, u


def feasible_space(geom: GeometrySet, c_matrix, delta_prime=None) -> FeasibleSpace:
    """Solution set of ``C H_O dr_O = delta'`` over the open ranges.

    Raises
    ------
    RankDeficient
        If ``C H_O`` loses rank relative to ``C`` (too few open satellites
        or a degenerate constellation split).
    Infeasible
        If `delta_prime` is outside the range of ``C H_O``.
    """
    c = np.atleast_2d(np.asarray(c_matrix, dtype=float))
    if c.shape[1] != geom.h.shape[0]:
        raise LengthMismatch(f"C has {c.shape[1]} columns, the state has {geom.h.shape[0]}")
    n_o = geom.n_open
    dp = np.zeros(c.shape[0]) if delta_prime is None else np.asarray(delta_prime, dtype=float)
    if dp.shape != (c.shape[0],):
        raise LengthMismatch(f"delta_prime has shape {dp.shape}, C has {c.shape[0]} rows")
    if n_o == 0:
        raise RankDeficient("no open satellites to tamper with")
    a = c @ geom.h_open
    rank_c = numerical_rank(c)
    if numerical_rank(a) < rank_c:
        raise RankDeficient(
            f"C H_O has rank {numerical_rank(a)} < {rank_c}; N_O = {n_o} open satellites "
            "cannot realize every clock-check displacement"
        )
    particular = np.linalg.pinv(a) @ dp
    scale = max(1.0, float(np.linalg.norm(dp)))
    if np.linalg.norm(a @ particular - dp) > 1e-9 * scale:
        raise Infeasible("delta_prime is outside the range of C H_O")
    basis = null_space(a)
    return FeasibleSpace(particular, basis, basis.k, c, dp)


def _displacement(dp_target, dp_legit, n_state: int) -> np.ndarray:
    d = np.asarray(dp_target, dtype=float) - np.asarray(dp_legit, dtype=float)
    if d.shape != (n_state,):
        raise LengthMismatch(f"target displacement has shape {d.shape}, state has {n_state}")
    return d


def _check_distance(d) -> None:
    dist = float(np.linalg.norm(d[:3]))
    if dist > TARGET_WARN_M:
        warnings.warn(
            f"target is {dist / 1000:.1f} km away; the linearized attack loses accuracy "
            f"beyond {TARGET_WARN_M / 1000:.0f} km",
            RuntimeWarning,
            stacklevel=3,
        )


def _objective(geom: GeometrySet, space: FeasibleSpace, d, position_only: bool):
    """Design matrix ``W H U`` and right-hand side ``W (d - H dr_p)``; W keeps
    the position rows only when `position_only` (common clock left free)."""
    dr_p, u = space.embed(geom)
    rows = slice(0, 3) if position_only else slice(None)
    h = geom.h[rows]
    return dr_p, u, h @ u, d[rows] - h @ dr_p


def time_attack_exact(geom: GeometrySet, space: FeasibleSpace, dp_target, dp_legit,
                      position_only: bool = False) -> TamperVector:
    """Feasible tamper whose induced displacement matches
    ``dp_target - dp_legit``, from the normal equations
    ``a* = (U^T H^T H U)^-1 U^T H^T (d - H dr_p)``.

    Directions of the feasible space that the victim cannot see (``H u = 0``,
    e.g. open ranges of one constellation moving against its own clock) make
    the Gram matrix singular; they are dropped first, so the normal equations
    run on the basis ``U Q_r`` of the visible part.

    Raises
    ------
    SingularProjection
        If no feasible direction moves the solution at all.
    """
    d = _displacement(dp_target, dp_legit, geom.h.shape[0])
    _check_distance(d)
    dr_p, u, a, resid = _objective(geom, space, d, position_only)
    if space.dim == 0:
        raise SingularProjection("the feasible space is a single point")
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    # U is orthonormal, so ||H|| bounds every singular value of H U
    keep = s > VISIBLE_RTOL * np.linalg.norm(geom.h, 2)
    if not keep.any():
        raise SingularProjection("U^T H^T H U vanishes: no feasible tamper moves the solution")
    u_eff = u @ vt[keep].T
    a_eff = a @ vt[keep].T
    alpha = np.linalg.solve(a_eff.T @ a_eff, a_eff.T @ resid)
    return TamperVector(_zero_auth(dr_p + u_eff @ alpha, geom.n_auth), GENERATION, geom.n_auth)


def time_attack_minimize(geom: GeometrySet, space: FeasibleSpace, dp_target, dp_legit,
                         position_only: bool = False) -> TamperVector:
    """Feasible tamper minimizing ``||H dr - (dp_target - dp_legit)||``.

    Solved by an SVD least-squares routine; the minimizer returned is the
    minimum-norm one, which coincides with :func:`time_attack_exact`.
    """
    d = _displacement(dp_target, dp_legit, geom.h.shape[0])
    _check_distance(d)
    dr_p, u, a, resid = _objective(geom, space, d, position_only)
    if space.dim == 0:
        return TamperVector(_zero_auth(dr_p, geom.n_auth), GENERATION, geom.n_auth)
    alpha, *_ = np.linalg.lstsq(a, resid, rcond=None)
    return TamperVector(_zero_auth(dr_p + u @ alpha, geom.n_auth), GENERATION, geom.n_auth)


def _zero_auth(dr, n_auth):
    dr = np.array(dr, dtype=float)
    dr[:n_auth] = 0.0
    return dr


def relay_attack_position(geom: GeometrySet, gamma_t: float, xi=(0.0, 0.0, 0.0)) -> TamperVector:
    """Relay tamper ``c gamma 1 + G_pos xi``: every range delayed by the same
    ``c gamma`` plus the range change of an antenna displaced by `xi`."""
    xi = np.asarray(xi, dtype=float).reshape(3)
    dr = np.full(geom.n, C_LIGHT * gamma_t)
    if xi.any():
        dr = dr + geom.g[:, :3] @ xi
    return TamperVector(dr, RELAY, geom.n_auth)


def generation_attack_position(geom: GeometrySet, gamma_t: float, n_auth: int | None = None) -> TamperVector:
    """Shift the receiver clock by ``c gamma`` without moving the position or
    touching the authenticated ranges.

    The tamper is ``c gamma 1 + U beta`` with U an orthonormal basis of N(H)
    and beta the minimum-norm solution of ``U_A beta = -c gamma 1``.

    Raises
    ------
    Infeasible
        If fewer than 4 open satellites are available or ``U_A`` lacks full
        row rank; only a relay attack is possible then.
    """
    n_a = geom.n_auth if n_auth is None else int(n_auth)
    n = geom.n
    n_open = n - n_a
    if gamma_t == 0:
        return TamperVector.zeros(n, GENERATION, n_a)
    if n_open < 4:
        raise Infeasible(
            f"generation position attack needs N_O >= 4 open satellites, got N_O = {n_open}; "
            "only a relay attack is viable"
        )
    basis = null_space(geom.h)
    u_a = basis.vectors[:n_a]
    if n_a and numerical_rank(u_a) < n_a:
        raise Infeasible(
            "the null space of H cannot cancel the clock push on the authenticated ranges; "
            "only a relay attack is viable"
        )
    shift = C_LIGHT * gamma_t
    beta = np.linalg.lstsq(u_a, -shift * np.ones(n_a), rcond=None)[0] if n_a else np.zeros(basis.k)
    if n_a and np.linalg.norm(u_a @ beta + shift) > 1e-9 * max(1.0, abs(shift)):
        raise Infeasible("authenticated-range constraint has no solution")
    dr = shift + basis.vectors @ beta
    if np.any(np.abs(dr[:n_a]) >= SNAP_M):
        raise Infeasible("authenticated components could not be cancelled")
    dr[:n_a] = 0.0
    return TamperVector(dr, GENERATION, n_a)


# ---------------------------------------------------------------------------
# end-to-end helpers working on an epoch and a legitimate solution


def target_state(legit: PvtSolution, target_pos, c_matrix, delta_prime=None) -> np.ndarray:
    """Target state: `target_pos` with the legitimate clocks, moved by the
    minimum-norm clock change that realizes `delta_prime` under C."""
    c = np.atleast_2d(np.asarray(c_matrix, dtype=float))
    state = np.concatenate([np.asarray(target_pos, dtype=float).reshape(3), legit.clocks_m])
    if delta_prime is not None and np.any(delta_prime):
        state[3:] += np.linalg.lstsq(c[:, 3:], np.asarray(delta_prime, dtype=float), rcond=None)[0]
    return state


def plan_time_attack(
    epoch,
    legit: PvtSolution,
    target_pos,
    c_matrix,
    delta_prime=None,
    method: str = "exact",
    refine: int = 0,
    position_only: bool = True,
    cfg: SolverConfig | None = None,
) -> TamperVector:
    """Time-targeted tamper for one epoch, linearized at `legit`.

    By default only the position is steered: the common clock shift is left
    to the attack while the clock differences stay pinned by `delta_prime`.
    With ``refine > 0`` the attacker re-solves the tampered epoch, re-linearizes
    at the induced solution and adds a correction toward the target state
    (same feasible-space construction), `refine` times.
    """
    synth = {"exact": time_attack_exact, "minimize": time_attack_minimize}.get(method)
    if synth is None:
        raise ValueError(f"unknown method {method!r}; use 'exact' or 'minimize'")
    goal = target_state(legit, target_pos, c_matrix, delta_prime)
    geom = build_geometry(epoch, legit)
    space = feasible_space(geom, c_matrix, delta_prime)
    tamper = synth(geom, space, goal, legit.state, position_only)
    for _ in range(refine):
        induced = solve(apply_tamper(epoch, tamper), initial=legit, cfg=cfg).solution
        g2 = build_geometry(epoch, induced)
        err = goal - induced.state
        space2 = feasible_space(g2, c_matrix, space.c_matrix @ err)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            step = synth(g2, space2, err, np.zeros_like(err), position_only)
        tamper = TamperVector(tamper.delta_r + step.delta_r, GENERATION, epoch.n_auth)
    return tamper


def plan_position_attack(epoch, legit: PvtSolution, plan) -> TamperVector:
    if not isinstance(plan, (PositionRelay, PositionGeneration)):
        raise TypeError(f"not a position attack plan: {plan!r}")
    geom = build_geometry(epoch, legit)
    if isinstance(plan, PositionRelay):
        return relay_attack_position(geom, plan.gamma_t, plan.xi)
    return generation_attack_position(geom, plan.gamma_t, epoch.n_auth)
