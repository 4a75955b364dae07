"""Pseudorange observation model shared by the generator and the solver.

Both sides call :func:`predicted_range` so that a noiseless scenario is
reproduced bit-for-bit at the true receiver state.
"""

import numpy as np

C_LIGHT = 299792458.0


def geometric_range(sat_pos, rx_pos):
    """Euclidean distance, broadcasting over leading axes of ``rx_pos``.

    The sum is spelled out so the rounding does not depend on array layout.
    """
    sat_pos = np.asarray(sat_pos, dtype=float)
    rx_pos = np.asarray(rx_pos, dtype=float)
    if rx_pos.ndim > 1:
        rx_pos = rx_pos[..., None, :]
    diff = sat_pos - rx_pos
    dx, dy, dz = diff[..., 0], diff[..., 1], diff[..., 2]
    return np.sqrt(dx * dx + dy * dy + dz * dz)


def predicted_range(sat_pos, sat_clk_s, atmo_m, rx_pos, rx_clk_m):
    """Pseudorange model ``rho + c*t_sat + D_atm + b_rx``.

    ``rx_clk_m`` is the receiver clock term (meters) already mapped to each
    satellite, shape ``(N,)`` or ``(R, N)`` matching ``rx_pos`` of shape
    ``(3,)`` or ``(R, 3)``.
    """
    rho = geometric_range(sat_pos, rx_pos)
    return ((rho + C_LIGHT * np.asarray(sat_clk_s, dtype=float)) + np.asarray(atmo_m, dtype=float)) + rx_clk_m
