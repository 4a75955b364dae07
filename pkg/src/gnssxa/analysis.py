"""Detection statistics for the cross-authentication checks.

Closed-form false-alarm / missed-detection rates of the clock check under
Gaussian range noise, the eigen-decomposition of the squared position error
into weighted noncentral chi-square terms, DET curve containers and Wilson
confidence intervals for empirical rates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri

from .errors import DimensionMismatch, DomainError, EmptyHypothesis, NotSPD
from .geometry import GeometrySet

CLOSED_FORM = "closed-form"
EMPIRICAL = "empirical"
WILSON_Z = 1.959963984540054  # two-sided 95 %


def q_func(x):
    """Gaussian tail probability ``Q(x) = P(N(0,1) > x)``."""
    return ndtr(-np.asarray(x, dtype=float))


def q_inv(p):
    """Inverse of :func:`q_func` on (0, 1)."""
    p = np.asarray(p, dtype=float)
    if not np.all((p > 0) & (p < 1)):
        raise DomainError("Q^-1 is defined on (0, 1)")
    return -ndtri(p)


def threshold_from_pfa(p_fa, sigma0: float):
    """Threshold T with ``2 Q(T / sigma0) = p_fa`` for a two-sided Gaussian
    metric of std `sigma0`."""
    p = np.asarray(p_fa, dtype=float)
    if np.any((p <= 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise DomainError(f"p_fa must lie in (0, 1], got {p_fa}")
    if not sigma0 >= 0:
        raise DomainError("sigma0 must be >= 0")
    t = sigma0 * -ndtri(p / 2.0)
    return float(t) if t.ndim == 0 else t


def pfa_from_threshold(threshold, sigma0: float):
    return 2.0 * q_func(np.asarray(threshold, dtype=float) / sigma0)


def pmd_closed_form(p_fa, sigma0: float, sigma1: float, mu1: float):
    """Missed-detection probability ``Q((-T - mu1)/s1) - Q((T - mu1)/s1)`` at the
    threshold that yields `p_fa` under the legitimate hypothesis."""
    if not (sigma0 > 0 and sigma1 > 0):
        raise DomainError("sigma0 and sigma1 must be > 0")
    t = threshold_from_pfa(p_fa, sigma0)
    p = q_func((-t - mu1) / sigma1) - q_func((t - mu1) / sigma1)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


@dataclass(frozen=True)
class MetricStats:
    """First and second moments of the clock-check metric ``C p``."""

    mu: np.ndarray
    sigma0: float
    sigma1: float
    cov0: np.ndarray
    cov1: np.ndarray

    @property
    def mu1(self) -> float:
        return float(self.mu[0])


def metric_stats(geom: GeometrySet, c_matrix, tamper, sigma_l: float, sigma_a: float = 0.0,
                 attack_kind: str = "generation") -> MetricStats:
    """Gaussian moments of the clock-check metric.

    ``Sigma_0 = s_L^2 C H H^T C^T`` and ``Sigma_1 = s_T^2 C H H^T C^T`` with
    ``s_T^2 = s_L^2`` for generation and ``s_L^2 + s_A^2`` for relay attacks;
    ``mu = C H dr_T``.
    """
    c = np.atleast_2d(np.asarray(c_matrix, dtype=float))
    if c.shape[1] != geom.h.shape[0]:
        raise DimensionMismatch(f"C has {c.shape[1]} columns, H has {geom.h.shape[0]} rows")
    dr = np.asarray(getattr(tamper, "delta_r", tamper), dtype=float)
    if dr.shape != (geom.n,):
        raise DimensionMismatch(f"tamper has shape {dr.shape}, geometry has {geom.n} satellites")
    if attack_kind not in ("generation", "relay"):
        raise ValueError(f"unknown attack kind {attack_kind!r}")
    sigma_t2 = sigma_l**2 + (sigma_a**2 if attack_kind == "relay" else 0.0)
    ch = c @ geom.h
    base = ch @ ch.T
    return MetricStats(
        mu=ch @ dr,
        sigma0=float(sigma_l * np.sqrt(base[0, 0])),
        sigma1=float(np.sqrt(sigma_t2 * base[0, 0])),
        cov0=sigma_l**2 * base,
        cov1=sigma_t2 * base,
    )


@dataclass(frozen=True)
class QuadFormModel:
    """``theta^2 = sum_i lambda_i (u_i + b_i)^2`` for ``eps ~ N(mean, cov)``,
    ``cov = P diag(lambda) P^T``, ``b = diag(lambda)^-1/2 P^T mean``."""

    lambdas: np.ndarray
    b_vec: np.ndarray
    p: np.ndarray
    mean: np.ndarray
    cov: np.ndarray

    @property
    def expected_value(self) -> float:
        return float(np.sum(self.lambdas * (1.0 + self.b_vec**2)))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.standard_normal((n, self.lambdas.size))
        return np.sum(self.lambdas * (u + self.b_vec) ** 2, axis=1)


def quadform_model(mean, cov) -> QuadFormModel:
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise DimensionMismatch(f"cov has shape {cov.shape} for a {mean.size}-vector")
    if not np.allclose(cov, cov.T, rtol=1e-12, atol=1e-14 * np.abs(cov).max()):
        raise NotSPD("covariance is not symmetric")
    lam, p = np.linalg.eigh(cov)
    if lam[0] <= 0:
        raise NotSPD(f"covariance is not positive definite (smallest eigenvalue {lam[0]:.3g})")
    b = (p.T @ mean) / np.sqrt(lam)
    return QuadFormModel(lambdas=lam, b_vec=b, p=p, mean=mean, cov=cov)


# ---------------------------------------------------------------------------
# DET curves


def wilson_interval(k, n, z: float = WILSON_Z):
    """Wilson score interval for ``k`` successes out of ``n`` trials."""
    k = np.asarray(k, dtype=float)
    if n <= 0:
        raise EmptyHypothesis("no trials")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half


def wilson_halfwidth(k, n, z: float = WILSON_Z):
    lo, hi = wilson_interval(k, n, z)
    return (hi - lo) / 2.0


@dataclass(frozen=True)
class DetCurve:
    """DET points ordered by increasing threshold (so non-increasing p_fa)."""

    thresholds: np.ndarray
    p_fa: np.ndarray
    p_md: np.ndarray
    fa_ci: np.ndarray  # Wilson half-widths (zeros for closed-form curves)
    md_ci: np.ndarray
    trials: int
    mode: str

    def __post_init__(self):
        order = np.argsort(self.thresholds, kind="stable")
        for name in ("thresholds", "p_fa", "p_md", "fa_ci", "md_ci"):
            arr = np.asarray(getattr(self, name), dtype=float)[order]
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.thresholds.size

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.p_fa.tolist(), self.p_md.tolist()))

    def pmd_at_pfa(self, p_fa: float) -> float:
        """Missed detection at false-alarm rate `p_fa`, linear interpolation
        between neighbouring points."""
        order = np.argsort(self.p_fa, kind="stable")
        return float(np.interp(p_fa, self.p_fa[order], self.p_md[order]))

    def pfa_at_pmd(self, p_md: float) -> float:
        """Smallest false-alarm rate among thresholds reaching ``p_md`` or
        better (1 if none does)."""
        ok = self.p_md <= p_md
        return float(self.p_fa[ok].min()) if ok.any() else 1.0

    def point_at_pmd(self, p_md: float) -> int:
        """Index of the point attaining :meth:`pfa_at_pmd`."""
        ok = np.flatnonzero(self.p_md <= p_md)
        if ok.size == 0:
            return int(np.argmin(self.p_md))
        return int(ok[np.argmin(self.p_fa[ok])])


def det_from_metrics(metric_h0, metric_h1, thresholds) -> DetCurve:
    """Empirical DET: a trial fails the check when its metric exceeds T."""
    m0 = np.sort(np.asarray(metric_h0, dtype=float).ravel())
    m1 = np.sort(np.asarray(metric_h1, dtype=float).ravel())
    if m0.size == 0 or m1.size == 0:
        raise EmptyHypothesis("both hypotheses need at least one trial")
    t = np.asarray(thresholds, dtype=float)
    if t.size == 0:
        raise ValueError("threshold grid is empty")
    fa = m0.size - np.searchsorted(m0, t, side="right")
    md = np.searchsorted(m1, t, side="right")
    return DetCurve(
        thresholds=t,
        p_fa=fa / m0.size,
        p_md=md / m1.size,
        fa_ci=wilson_halfwidth(fa, m0.size),
        md_ci=wilson_halfwidth(md, m1.size),
        trials=int(m0.size + m1.size),
        mode=EMPIRICAL,
    )


def det_closed_form(stats: MetricStats, pfa_grid) -> DetCurve:
    """Closed-form DET of the two-sided clock check, one point per p_fa."""
    grid = np.asarray(pfa_grid, dtype=float)
    t = threshold_from_pfa(grid, stats.sigma0)
    md = pmd_closed_form(grid, stats.sigma0, stats.sigma1, stats.mu1)
    zeros = np.zeros(grid.size)
    return DetCurve(np.atleast_1d(t), grid, np.atleast_1d(md), zeros, zeros, 0, CLOSED_FORM)


def det_closed_form_mixture(sigma0, sigma1, mu1, pfa_grid) -> DetCurve:
    """Closed-form DET when trials pool epochs with different geometry.

    One threshold is shared by all epochs, so ``p_fa(T)`` and ``p_md(T)`` are
    the epoch averages of the per-epoch expressions; T is found per grid
    point by root finding on the averaged false-alarm rate.
    """
    s0 = np.asarray(sigma0, dtype=float)
    s1 = np.broadcast_to(np.asarray(sigma1, dtype=float), s0.shape)
    m1 = np.broadcast_to(np.asarray(mu1, dtype=float), s0.shape)
    if np.any(s0 <= 0) or np.any(s1 <= 0):
        raise DomainError("all sigmas must be > 0")
    grid = np.asarray(pfa_grid, dtype=float)
    if np.any((grid <= 0) | (grid > 1)):
        raise DomainError("p_fa grid must lie in (0, 1]")

    def pfa(t):
        return float(np.mean(2.0 * q_func(t / s0)))

    thresholds = np.empty(grid.size)
    for i, p in enumerate(grid):
        if p >= 1.0:
            thresholds[i] = 0.0
            continue
        hi = float(s0.max()) * 40.0
        thresholds[i] = brentq(lambda t: pfa(t) - p, 0.0, hi, xtol=1e-14, rtol=1e-14)
    t = thresholds[:, None]
    md = np.mean(q_func((-t - m1) / s1) - q_func((t - m1) / s1), axis=1)
    zeros = np.zeros(grid.size)
    return DetCurve(thresholds, grid, np.clip(md, 0.0, 1.0), zeros, zeros, 0, CLOSED_FORM)
