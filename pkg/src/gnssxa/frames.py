"""WGS-84 geodetic <-> ECEF conversion and local ENU frames."""

import numpy as np

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)


def llh_to_ecef(lat_deg, lon_deg, alt_m):
    """Geodetic latitude/longitude (degrees) and ellipsoidal height to ECEF meters."""
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    sin_lat = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat**2)
    x = (n + alt_m) * np.cos(lat) * np.cos(lon)
    y = (n + alt_m) * np.cos(lat) * np.sin(lon)
    z = (n * (1.0 - WGS84_E2) + alt_m) * sin_lat
    return np.array([x, y, z], dtype=float)


def ecef_to_llh(pos):
    """Inverse of :func:`llh_to_ecef`, iterating on latitude until it settles."""
    x, y, z = (float(v) for v in pos)
    lon = np.arctan2(y, x)
    p = np.hypot(x, y)
    lat = np.arctan2(z, p * (1.0 - WGS84_E2))
    alt = 0.0
    for _ in range(10):
        sin_lat = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat**2)
        alt = p / np.cos(lat) - n
        new_lat = np.arctan2(z, p * (1.0 - WGS84_E2 * n / (n + alt)))
        if abs(new_lat - lat) < 1e-14:
            lat = new_lat
            break
        lat = new_lat
    return float(np.degrees(lat)), float(np.degrees(lon)), float(alt)


def enu_rotation(lat_deg, lon_deg):
    """Rotation matrix whose rows are the East, North and Up unit vectors in ECEF."""
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    return np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])


def enu_rotation_at(pos_ecef):
    lat, lon, _ = ecef_to_llh(pos_ecef)
    return enu_rotation(lat, lon)


def enu_to_ecef(enu, ref_ecef):
    """Point(s) at ENU offset `enu` (meters, shape (..., 3)) from the ECEF
    reference point."""
    r = enu_rotation_at(ref_ecef)
    return np.asarray(ref_ecef, dtype=float) + np.asarray(enu, dtype=float) @ r


def ecef_to_enu(pos_ecef, ref_ecef):
    r = enu_rotation_at(ref_ecef)
    return (np.asarray(pos_ecef, dtype=float) - np.asarray(ref_ecef, dtype=float)) @ r.T


def elevation_deg(sat_pos, rx_pos):
    """Elevation of one or more satellites seen from `rx_pos`, in degrees."""
    r = enu_rotation_at(rx_pos)
    los = np.atleast_2d(sat_pos) - np.asarray(rx_pos, dtype=float)
    enu = los @ r.T
    return np.degrees(np.arctan2(enu[..., 2], np.hypot(enu[..., 0], enu[..., 1])))
