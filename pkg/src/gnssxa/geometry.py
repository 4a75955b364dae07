"""Geometry and least-squares matrices, null-space bases and DOP figures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .frames import enu_rotation_at
from .model import geometric_range

MULTI = "multi"
SINGLE = "single"


def rank_tol(shape, s_max) -> float:
    """Default rank threshold: max(rows, cols) * eps * largest singular value."""
    return max(shape[-2:]) * np.finfo(float).eps * s_max


def pseudoinverse(g) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a full-column-rank matrix via the SVD.

    Equals ``(G^T G)^-1 G^T`` without forming the normal equations. Stacks of
    matrices (leading batch axes) are accepted.

    Raises
    ------
    DegenerateGeometry
        If any smallest singular value falls below the rank tolerance.
    """
    g = np.asarray(g, dtype=float)
    if g.shape[-2] < g.shape[-1]:
        raise DegenerateGeometry(f"{g.shape[-2]} rows cannot determine {g.shape[-1]} unknowns")
    u, s, vt = np.linalg.svd(g, full_matrices=False)
    tol = rank_tol(g.shape, s[..., :1])
    if np.any(s[..., -1:] <= tol):
        raise DegenerateGeometry(
            f"geometry matrix is rank deficient (smallest singular value {np.min(s[..., -1]):.3g})"
        )
    return np.swapaxes(vt, -1, -2) @ (np.swapaxes(u, -1, -2) / s[..., :, None])


@dataclass(frozen=True)
class NullSpaceBasis:
    vectors: np.ndarray  # columns u_1..u_K, orthonormal
    k: int
    tol: float  # absolute singular-value threshold used for the rank decision


def null_space(a, tol: float | None = None) -> NullSpaceBasis:
    """Orthonormal basis of N(a) from the right singular vectors.

    With ``tol=None`` the threshold is ``max(shape) * eps * sigma_max``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    cols = a.shape[1]
    if a.size == 0:
        raise ValueError("null_space needs a non-empty matrix")
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    s_max = s[0] if s.size else 0.0
    if tol is None:
        tol = rank_tol(a.shape, s_max)
    rank = int(np.sum(s > tol))
    vectors = vt[rank:].T.copy()
    return NullSpaceBasis(vectors=vectors, k=cols - rank, tol=float(tol))


def numerical_rank(a, tol: float | None = None) -> int:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0:
        return 0
    if tol is None:
        tol = rank_tol(a.shape, s[0])
    return int(np.sum(s > tol))


def geometry_matrix(sat_pos, rx_pos, constellations, n_clocks: int, mode: str = MULTI):
    """Jacobian of the predicted pseudoranges with respect to [x, y, z, clocks].

    Position columns are ``(p_hat - p_sat) / rho_hat``; clock columns hold 1 for
    the satellite's constellation (multi-reference) or a single column of ones.
    ``rx_pos`` may carry leading batch axes. Returns ``(G, rho_hat)``.
    """
    sat_pos = np.asarray(sat_pos, dtype=float)
    rx_pos = np.asarray(rx_pos, dtype=float)
    rho = geometric_range(sat_pos, rx_pos)
    if np.any(rho <= 0):
        raise DegenerateGeometry("linearization point coincides with a satellite")
    rx = rx_pos[..., None, :] if rx_pos.ndim > 1 else rx_pos
    unit = (rx - sat_pos) / rho[..., None]
    n = sat_pos.shape[0]
    if mode == SINGLE:
        clock = np.ones((n, 1))
    else:
        clock = np.zeros((n, n_clocks))
        clock[np.arange(n), np.asarray(constellations) - 1] = 1.0
    clock = np.broadcast_to(clock, unit.shape[:-1] + clock.shape[-1:])
    return np.concatenate([unit, clock], axis=-1), rho


@dataclass(frozen=True)
class GeometrySet:
    g: np.ndarray
    h: np.ndarray
    n_auth: int
    mode: str

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def n_open(self) -> int:
        return self.n - self.n_auth

    @property
    def n_clocks(self) -> int:
        return self.g.shape[1] - 3

    @property
    def h_auth(self) -> np.ndarray:
        return self.h[:, : self.n_auth]

    @property
    def h_open(self) -> np.ndarray:
        return self.h[:, self.n_auth :]

    @property
    def g_auth(self) -> np.ndarray:
        return self.g[: self.n_auth]

    @property
    def g_open(self) -> np.ndarray:
        return self.g[self.n_auth :]


def build_geometry(epoch, linearization_point, mode: str | None = None) -> GeometrySet:
    """Geometry set of `epoch` linearized at a :class:`~gnssxa.pvt.PvtSolution`."""
    mode = mode or linearization_point.mode
    n_clocks = len(linearization_point.clocks_m)
    if mode == SINGLE and n_clocks != 1:
        raise ValueError("single-reference geometry needs a one-clock linearization point")
    g, _ = geometry_matrix(epoch.sat_pos, linearization_point.pos_ecef, epoch.constellations,
                           n_clocks, mode)
    return GeometrySet(g=g, h=pseudoinverse(g), n_auth=epoch.n_auth, mode=mode)


@dataclass(frozen=True)
class DopReport:
    gdop: float
    pdop: float
    hdop: float
    vdop: float
    tdop: float
    sigma_enu: np.ndarray  # per-axis position std, meters
    sigma_clock: np.ndarray  # per-clock std, meters


def dop(g, sigma_l: float = 1.0, rx_pos=None) -> DopReport:
    """Dilution of precision from ``(G^T G)^-1``.

    When `rx_pos` is given the position columns are rotated to East/North/Up
    at that point; otherwise the ECEF axes are reported as-is.
    """
    g = np.array(g, dtype=float)
    if rx_pos is not None:
        g[:, :3] = g[:, :3] @ enu_rotation_at(rx_pos).T
    gtg = g.T @ g
    s = np.linalg.svd(g, compute_uv=False)
    if s[-1] <= rank_tol(g.shape, s[0]):
        raise DegenerateGeometry("geometry matrix is rank deficient")
    q = np.linalg.inv(gtg)
    d = np.diag(q)
    return DopReport(
        gdop=float(np.sqrt(np.trace(q))),
        pdop=float(np.sqrt(d[:3].sum())),
        hdop=float(np.sqrt(d[:2].sum())),
        vdop=float(np.sqrt(d[2])),
        tdop=float(np.sqrt(d[3:].sum())),
        sigma_enu=sigma_l * np.sqrt(d[:3]),
        sigma_clock=sigma_l * np.sqrt(d[3:]),
    )
