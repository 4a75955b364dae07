"""PVT cross-authentication checks: clock-bias consistency across
constellations and distance from a reference position.

All metrics are in meters; time quantities are multiplied by c before any
comparison. A check passes when every metric component is ``<=`` its
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .geometry import MULTI
from .model import C_LIGHT
from .pvt import PvtSolution


@dataclass(frozen=True)
class CheckVerdict:
    metric: np.ndarray | float
    passed: bool


def isb_selection_matrix(m: int) -> np.ndarray:
    """Rows ``e_1 - e_k`` and ``e_k - e_1`` (k = 2..M) over the clock part of
    the multi-reference state ``[x, y, z, c t_1 .. c t_M]``."""
    if m < 2:
        raise ValueError("the clock-consistency check needs at least two constellations")
    c = np.zeros((2 * (m - 1), 3 + m))
    for i, k in enumerate(range(1, m)):
        c[2 * i, 3] = 1.0
        c[2 * i, 3 + k] = -1.0
        c[2 * i + 1] = -c[2 * i]
    return c


def _per_pair(value, m: int, name: str) -> np.ndarray:
    arr = np.broadcast_to(np.asarray(value, dtype=float), (m - 1,)).copy()
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


@dataclass(frozen=True)
class TimeCheckConfig:
    """Linear clock check ``C p <= delta_t``.

    The ISB specialization also keeps the threshold T, the receiver
    calibration bias b and the reference ISB (all in meters, one value per
    constellation paired with constellation 1).
    """

    c_matrix: np.ndarray
    delta_t: np.ndarray
    threshold_t: float | None = None
    calib_bias: np.ndarray | None = None
    isb_ref: np.ndarray | None = None

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c_matrix, dtype=float))
        d = np.atleast_1d(np.asarray(self.delta_t, dtype=float))
        if c.shape[1] < 5:
            raise DimensionMismatch("C must act on a multi-reference state with M >= 2 clocks")
        m = c.shape[1] - 3
        if c.shape[0] != 2 * (m - 1):
            raise DimensionMismatch(f"C needs {2 * (m - 1)} rows for M={m}, got {c.shape[0]}")
        if d.shape != (c.shape[0],):
            raise DimensionMismatch(f"delta_t has shape {d.shape}, C has {c.shape[0]} rows")
        if not np.array_equal(c[0::2], -c[1::2]):
            raise ValueError("rows of C must come in +/- pairs")
        object.__setattr__(self, "c_matrix", c)
        object.__setattr__(self, "delta_t", d)

    @property
    def m(self) -> int:
        return self.c_matrix.shape[1] - 3

    @classmethod
    def isb(cls, m: int, threshold_t: float, calib_bias=0.0, isb_ref=0.0) -> TimeCheckConfig:
        """Clock-consistency check ``|(c t_k - c t_1) - b_k - ISB_k| <= T``.

        Row ``e_1 - e_k`` bounds the gap from below with ``T - b - ISB`` and
        row ``e_k - e_1`` from above with ``T + b + ISB``.
        """
        if not threshold_t >= 0:
            raise ValueError("threshold_t must be >= 0")
        b = _per_pair(calib_bias, m, "calib_bias")
        isb = _per_pair(isb_ref, m, "isb_ref")
        delta = np.empty(2 * (m - 1))
        delta[0::2] = threshold_t - b - isb
        delta[1::2] = threshold_t + b + isb
        return cls(isb_selection_matrix(m), delta, float(threshold_t), b, isb)

    @classmethod
    def isb_from_pfa(cls, m: int, p_fa: float, sigma0: float, calib_bias=0.0, isb_ref=0.0):
        """ISB check whose threshold gives false-alarm rate `p_fa` for a
        Gaussian metric of std `sigma0` (meters)."""
        from .analysis import threshold_from_pfa

        return cls.isb(m, threshold_from_pfa(p_fa, sigma0), calib_bias, isb_ref)

    def with_threshold(self, threshold_t: float) -> TimeCheckConfig:
        if self.threshold_t is None:
            raise ValueError("only ISB-specialized configs carry a threshold")
        return TimeCheckConfig.isb(self.m, threshold_t, self.calib_bias, self.isb_ref)


@dataclass(frozen=True)
class PositionCheckConfig:
    p_ref: np.ndarray
    delta_pos: float

    def __post_init__(self):
        p = np.array(self.p_ref, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("p_ref must be finite")
        if not self.delta_pos >= 0:
            raise ValueError("delta_pos must be >= 0")
        object.__setattr__(self, "p_ref", p)


def time_check(p: PvtSolution, cfg: TimeCheckConfig) -> CheckVerdict:
    """``theta_t = C p`` (meters); passes iff ``theta_t <= delta_t`` component-wise."""
    if p.mode != MULTI:
        raise DimensionMismatch("the time check needs a multi-reference solution")
    if p.clocks_m.size != cfg.m:
        raise DimensionMismatch(f"C expects {cfg.m} clocks, solution has {p.clocks_m.size}")
    theta = cfg.c_matrix @ p.state
    return CheckVerdict(theta, bool(np.all(theta <= cfg.delta_t)))


def isb_metric_m(clocks_m, cfg: TimeCheckConfig) -> np.ndarray:
    """Scalar ISB-check metric ``max_k |(c t_k - c t_1) - b_k - ISB_k|`` in
    meters, for clock vectors of shape ``(..., M)``."""
    clocks_m = np.asarray(clocks_m, dtype=float)
    gap = clocks_m[..., 1:] - clocks_m[..., :1] - cfg.calib_bias - cfg.isb_ref
    return np.max(np.abs(gap), axis=-1)


def isb_check(t1: float, t2: float, cfg: TimeCheckConfig) -> CheckVerdict:
    """Two-constellation ISB check on clock biases given in seconds."""
    if cfg.threshold_t is None:
        raise ValueError("isb_check needs an ISB-specialized TimeCheckConfig")
    metric = abs(C_LIGHT * t2 - C_LIGHT * t1 - cfg.calib_bias[0] - cfg.isb_ref[0])
    return CheckVerdict(float(metric), bool(metric <= cfg.threshold_t))


def position_metric_m(pos_ecef, p_ref) -> np.ndarray:
    d = np.asarray(pos_ecef, dtype=float) - np.asarray(p_ref, dtype=float)
    return np.sqrt(np.sum(d * d, axis=-1))


def position_check(p: PvtSolution, cfg: PositionCheckConfig) -> CheckVerdict:
    """3D distance to the reference position; passes iff ``<= delta_pos``.

    Only the position part of `p` is used, so either clock formulation works.
    """
    metric = float(position_metric_m(p.pos_ecef, cfg.p_ref))
    return CheckVerdict(metric, metric <= cfg.delta_pos)
