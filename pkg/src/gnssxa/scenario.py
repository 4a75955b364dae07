"""Observation data model, synthetic scenario generator, noise injection and
scenario file I/O.

Clock quantities are stored in seconds here; the solver works in meters.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InfeasibleGeometry, ParseError, SchemaError
from .frames import elevation_deg, enu_rotation, llh_to_ecef
from .model import C_LIGHT, predicted_range

# Lab location used for the reference experiments (degrees, degrees, meters).
PADOVA_LLH = (45.408, 11.894, 30.0)

GM_EARTH = 3.986004418e14
# Orbit radii: first constellation GPS-like, the others Galileo-like.
ORBIT_RADIUS_M = (26_559_700.0, 29_599_800.0)
MIN_ELEVATION_DEG = 5.0
CONSTELLATION_PREFIX = "GECRJIS"


@dataclass(frozen=True)
class SatelliteObservation:
    sat_id: str
    constellation: int
    authenticated: bool
    pos_ecef: tuple[float, float, float]
    sat_clock_bias: float
    atmo_delay: float
    pseudorange: float

    def __post_init__(self):
        if self.constellation < 1:
            raise SchemaError(f"{self.sat_id}: constellation index must be >= 1")
        if not self.atmo_delay >= 0.0:
            raise SchemaError(f"{self.sat_id}: atmo_delay must be >= 0, got {self.atmo_delay}")


@dataclass(frozen=True)
class Epoch:
    """All observations of one epoch, authenticated satellites first."""

    time_tag: float
    observations: tuple[SatelliteObservation, ...]

    def __post_init__(self):
        object.__setattr__(self, "observations", tuple(self.observations))
        seen_open = False
        for obs in self.observations:
            if obs.authenticated and seen_open:
                raise SchemaError(
                    f"epoch t={self.time_tag}: authenticated satellite {obs.sat_id} "
                    "listed after an open one"
                )
            seen_open |= not obs.authenticated

    def __len__(self):
        return len(self.observations)

    @property
    def n_auth(self) -> int:
        return sum(o.authenticated for o in self.observations)

    @property
    def n_open(self) -> int:
        return len(self) - self.n_auth

    @cached_property
    def sat_pos(self) -> np.ndarray:
        return np.array([o.pos_ecef for o in self.observations], dtype=float)

    @cached_property
    def sat_clk_s(self) -> np.ndarray:
        return np.array([o.sat_clock_bias for o in self.observations], dtype=float)

    @cached_property
    def atmo_m(self) -> np.ndarray:
        return np.array([o.atmo_delay for o in self.observations], dtype=float)

    @cached_property
    def pseudoranges(self) -> np.ndarray:
        return np.array([o.pseudorange for o in self.observations], dtype=float)

    @cached_property
    def constellations(self) -> np.ndarray:
        return np.array([o.constellation for o in self.observations], dtype=int)

    @cached_property
    def auth_mask(self) -> np.ndarray:
        return np.array([o.authenticated for o in self.observations], dtype=bool)

    def with_pseudoranges(self, pr) -> Epoch:
        pr = np.asarray(pr, dtype=float)
        if pr.shape != (len(self),):
            raise ValueError(f"expected {len(self)} pseudoranges, got shape {pr.shape}")
        obs = tuple(replace(o, pseudorange=float(v)) for o, v in zip(self.observations, pr))
        return Epoch(self.time_tag, obs)


@dataclass(frozen=True)
class ScenarioMeta:
    m: int
    truth_pos_ecef: tuple[float, float, float]
    truth_clock_s: tuple[float, ...]
    isb_true_s: tuple[float, ...]

    def __post_init__(self):
        if len(self.truth_clock_s) != self.m:
            raise SchemaError(f"need {self.m} true clock biases, got {len(self.truth_clock_s)}")
        if len(self.isb_true_s) != self.m - 1:
            raise SchemaError(f"need {self.m - 1} ISB values, got {len(self.isb_true_s)}")
        if not all(math.isfinite(v) for v in (*self.truth_pos_ecef, *self.truth_clock_s)):
            raise SchemaError("receiver truth must be finite")


@dataclass(frozen=True)
class Scenario:
    meta: ScenarioMeta
    epochs: tuple[Epoch, ...]

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))

    @property
    def m(self) -> int:
        return self.meta.m

    @property
    def truth_pos(self) -> np.ndarray:
        return np.array(self.meta.truth_pos_ecef)

    @property
    def truth_clock_m(self) -> np.ndarray:
        return C_LIGHT * np.array(self.meta.truth_clock_s)


@dataclass(frozen=True)
class NoiseModel:
    """Range-noise levels, in meters.

    ``sigma_floor`` is receiver noise already present in every measurement of
    both hypotheses (the inherent noise of a recorded dataset); ``sigma_l`` is
    added victim noise and ``sigma_a`` the extra noise of a relaying attacker.
    """

    sigma_l: float = 0.0
    sigma_a: float = 0.0
    seed: int = 0
    sigma_floor: float = 0.0

    def __post_init__(self):
        if min(self.sigma_l, self.sigma_a, self.sigma_floor) < 0:
            raise ValueError("noise standard deviations must be non-negative")

    @property
    def sigma_victim(self) -> float:
        return math.hypot(self.sigma_floor, self.sigma_l)

    def sigma_tampered(self, relay: bool) -> float:
        return math.hypot(self.sigma_victim, self.sigma_a) if relay else self.sigma_victim


# ---------------------------------------------------------------------------
# generator


def _constellation_layout(n_auth, n_open, m):
    if m == 1:
        return [1] * (n_auth + n_open)
    open_pool = list(range(2, m + 1)) if n_auth > 0 else list(range(1, m + 1))
    if n_open < len(open_pool):
        raise ValueError(
            f"{m} constellations need at least {len(open_pool)} open satellites, got {n_open}"
        )
    return [1] * n_auth + [open_pool[i % len(open_pool)] for i in range(n_open)]


def _rotate(v, axis, angle):
    # Rodrigues rotation of rows of v about a unit axis per row.
    cos, sin = np.cos(angle)[..., None], np.sin(angle)[..., None]
    dot = np.sum(v * axis, axis=-1, keepdims=True)
    return v * cos + np.cross(axis, v) * sin + axis * dot * (1.0 - cos)


def _sky_tracks(rng, rx_pos, lat, lon, consts, times):
    n = len(consts)
    az = (rng.uniform(0.0, 360.0) + 360.0 * np.arange(n) / n)[rng.permutation(n)]
    el = rng.uniform(15.0, 75.0, n)
    az_r, el_r = np.radians(az), np.radians(el)
    los_enu = np.stack([np.cos(el_r) * np.sin(az_r), np.cos(el_r) * np.cos(az_r), np.sin(el_r)], -1)
    los = los_enu @ enu_rotation(lat, lon)
    radius = np.array([ORBIT_RADIUS_M[0] if c == 1 else ORBIT_RADIUS_M[1] for c in consts])
    pu = los @ rx_pos
    s = -pu + np.sqrt(pu**2 - rx_pos @ rx_pos + radius**2)
    r0 = rx_pos + s[:, None] * los
    # random orbit normal perpendicular to the initial position
    tmp = rng.normal(size=(n, 3))
    unit_r0 = r0 / np.linalg.norm(r0, axis=1, keepdims=True)
    normal = tmp - np.sum(tmp * unit_r0, axis=1, keepdims=True) * unit_r0
    normal /= np.linalg.norm(normal, axis=1, keepdims=True)
    rate = np.sqrt(GM_EARTH / radius**3)
    angle = times[:, None] * rate[None, :]
    return _rotate(r0[None, :, :], normal[None, :, :], angle)  # (T, N, 3)


def generate_scenario(
    n_auth: int,
    n_open: int,
    m: int,
    truth_llh: Sequence[float] = PADOVA_LLH,
    n_epochs: int = 600,
    geometry_seed: int = 0,
    truth_clock_s: float | None = None,
    isb_s: Sequence[float] | None = None,
    dt: float = 1.0,
    max_attempts: int = 200,
) -> Scenario:
    """Synthesize a noiseless multi-constellation scenario.

    Satellites sit on MEO shells with uniformly spaced azimuths and elevations
    drawn in [15, 75] degrees, then move along circular orbits; every epoch
    must keep all of them above 5 degrees. Authenticated satellites belong to
    constellation 1, open satellites are spread over the remaining ones.
    Pseudoranges follow the observation model exactly (no noise, no Earth
    rotation correction).
    """
    n = n_auth + n_open
    if n < 4 or n_auth < 0 or n_open < 0:
        raise ValueError(f"need at least 4 satellites, got n_auth={n_auth}, n_open={n_open}")
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > 1 and n < 3 + m:
        raise ValueError(f"{m} clock biases need at least {3 + m} satellites, got {n}")
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    consts = _constellation_layout(n_auth, n_open, m)
    rng = np.random.default_rng(geometry_seed)
    lat, lon, alt = truth_llh
    rx_pos = llh_to_ecef(lat, lon, alt)
    times = dt * np.arange(n_epochs, dtype=float)

    for _ in range(max_attempts):
        tracks = _sky_tracks(rng, rx_pos, lat, lon, consts, times)
        el = elevation_deg(tracks.reshape(-1, 3), rx_pos)
        if el.min() > MIN_ELEVATION_DEG:
            break
    else:
        raise InfeasibleGeometry(
            f"could not keep {n} satellites above {MIN_ELEVATION_DEG} deg for {n_epochs} epochs"
        )

    t1 = rng.uniform(-1e-4, 1e-4) if truth_clock_s is None else float(truth_clock_s)
    if isb_s is None:
        isb = rng.uniform(-50e-9, 50e-9, m - 1)
    else:
        isb = np.asarray(isb_s, dtype=float).reshape(m - 1)
    clocks = np.concatenate([[t1], t1 + isb])
    sat_clk = rng.uniform(-5e-4, 5e-4, n)
    atmo = rng.uniform(2.0, 15.0, n)
    rx_clk_m = C_LIGHT * clocks[np.array(consts) - 1]

    counters: dict[int, int] = {}
    ids = []
    for c in consts:
        counters[c] = counters.get(c, 0) + 1
        ids.append(f"{CONSTELLATION_PREFIX[(c - 1) % len(CONSTELLATION_PREFIX)]}{counters[c]:02d}")

    epochs = []
    for k, t in enumerate(times):
        pr = predicted_range(tracks[k], sat_clk, atmo, rx_pos, rx_clk_m)
        obs = tuple(
            SatelliteObservation(
                sat_id=ids[j],
                constellation=consts[j],
                authenticated=j < n_auth,
                pos_ecef=tuple(float(v) for v in tracks[k, j]),
                sat_clock_bias=float(sat_clk[j]),
                atmo_delay=float(atmo[j]),
                pseudorange=float(pr[j]),
            )
            for j in range(n)
        )
        epochs.append(Epoch(float(t), obs))
    meta = ScenarioMeta(
        m=m,
        truth_pos_ecef=tuple(float(v) for v in rx_pos),
        truth_clock_s=tuple(float(v) for v in clocks),
        isb_true_s=tuple(float(v) for v in isb),
    )
    return Scenario(meta, tuple(epochs))


# ---------------------------------------------------------------------------
# noise


def noise_std_vector(n: int, noise: NoiseModel, tampered_mask=None) -> np.ndarray:
    """Per-satellite standard deviation: victim noise, plus the attacker's on
    tampered (relayed) entries."""
    std = np.full(n, noise.sigma_victim)
    if tampered_mask is not None and noise.sigma_a > 0:
        std[np.asarray(tampered_mask, dtype=bool)] = noise.sigma_tampered(relay=True)
    return std


def add_noise(epoch: Epoch, noise: NoiseModel, tampered_mask=None, rng=None) -> Epoch:
    """Return a copy of `epoch` with independent Gaussian noise on every pseudorange.

    `rng` is the caller's generator; when omitted one is seeded from ``noise.seed``.
    """
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    std = noise_std_vector(len(epoch), noise, tampered_mask)
    if not std.any():
        return epoch
    return epoch.with_pseudoranges(epoch.pseudoranges + std * rng.standard_normal(len(epoch)))


# ---------------------------------------------------------------------------
# file I/O


def fmt_json(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot serialize non-finite number {value}")
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(fmt_json(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {fmt_json(v)}" for k, v in value.items()) + "}"
    raise TypeError(f"unsupported type {type(value)!r}")


def scenario_to_text(scenario: Scenario) -> str:
    meta = scenario.meta
    meta_d = {
        "m": meta.m,
        "receiver_truth": {
            "pos_ecef": list(meta.truth_pos_ecef),
            "clock_bias_s": list(meta.truth_clock_s),
        },
        "isb_true_s": list(meta.isb_true_s),
    }
    lines = ["{", f'  "meta": {fmt_json(meta_d)},', '  "epochs": [']
    for i, ep in enumerate(scenario.epochs):
        lines.append(f'    {{"t": {fmt_json(float(ep.time_tag))}, "sats": [')
        for j, o in enumerate(ep.observations):
            sat = {
                "id": o.sat_id,
                "constellation": int(o.constellation),
                "auth": bool(o.authenticated),
                "pos_ecef": [float(v) for v in o.pos_ecef],
                "clk_s": float(o.sat_clock_bias),
                "atmo_m": float(o.atmo_delay),
                "pr_m": float(o.pseudorange),
            }
            sep = "," if j < len(ep.observations) - 1 else ""
            lines.append(f"      {fmt_json(sat)}{sep}")
        lines.append("    ]}" + ("," if i < len(scenario.epochs) - 1 else ""))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(scenario_to_text(scenario), encoding="utf-8", newline="\n")


def _get(obj, key, where, kind):
    if not isinstance(obj, dict) or key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    value = obj[key]
    ok = {
        "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
        "num": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        "bool": lambda v: isinstance(v, bool),
        "str": lambda v: isinstance(v, str),
        "list": lambda v: isinstance(v, list),
        "dict": lambda v: isinstance(v, dict),
    }[kind](value)
    if not ok:
        raise ParseError(f"{where}.{key}: expected {kind}, got {type(value).__name__}")
    return value


def _num_list(obj, key, where, length=None):
    values = _get(obj, key, where, "list")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{where}.{key}[{i}]: expected number")
    if length is not None and len(values) != length:
        raise SchemaError(f"{where}.{key}: expected {length} values, got {len(values)}")
    return tuple(float(v) for v in values)


def scenario_from_dict(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ParseError("<root>: expected a JSON object")
    meta_d = _get(doc, "meta", "<root>", "dict")
    m = _get(meta_d, "m", "meta", "int")
    if m < 1:
        raise SchemaError(f"meta.m must be >= 1, got {m}")
    truth = _get(meta_d, "receiver_truth", "meta", "dict")
    meta = ScenarioMeta(
        m=m,
        truth_pos_ecef=_num_list(truth, "pos_ecef", "meta.receiver_truth", 3),
        truth_clock_s=_num_list(truth, "clock_bias_s", "meta.receiver_truth", m),
        isb_true_s=_num_list(meta_d, "isb_true_s", "meta", m - 1),
    )
    epochs = []
    for i, ep in enumerate(_get(doc, "epochs", "<root>", "list")):
        where = f"epochs[{i}]"
        t = float(_get(ep, "t", where, "num"))
        obs = []
        for j, s in enumerate(_get(ep, "sats", where, "list")):
            sw = f"{where}.sats[{j}]"
            const = _get(s, "constellation", sw, "int")
            if not 1 <= const <= m:
                raise SchemaError(f"{sw}.constellation: {const} outside 1..{m}")
            pos = _num_list(s, "pos_ecef", sw, 3)
            radius = math.sqrt(sum(v * v for v in pos))
            if not 2.0e7 <= radius <= 3.0e7:
                warnings.warn(f"{sw}: satellite radius {radius:.0f} m outside the MEO shell")
            obs.append(
                SatelliteObservation(
                    sat_id=_get(s, "id", sw, "str"),
                    constellation=const,
                    authenticated=_get(s, "auth", sw, "bool"),
                    pos_ecef=pos,
                    sat_clock_bias=float(_get(s, "clk_s", sw, "num")),
                    atmo_delay=float(_get(s, "atmo_m", sw, "num")),
                    pseudorange=float(_get(s, "pr_m", sw, "num")),
                )
            )
        try:
            epoch = Epoch(t, tuple(obs))
        except SchemaError as exc:
            raise SchemaError(f"{where}: {exc}") from None
        validate_counts(epoch, m, where)
        epochs.append(epoch)
    return Scenario(meta, tuple(epochs))


def validate_counts(epoch: Epoch, m: int, where: str = "epoch") -> None:
    """Solvability counts: N >= 4 and, for m > 1, N >= 3 + m with every
    constellation present."""
    n = len(epoch)
    if n < 4:
        raise SchemaError(f"{where}: {n} satellites, at least 4 are needed")
    if m > 1:
        if n < 3 + m:
            raise SchemaError(f"{where}: {n} satellites, at least {3 + m} are needed for m={m}")
        missing = set(range(1, m + 1)) - set(epoch.constellations.tolist())
        if missing:
            raise SchemaError(f"{where}: no satellite from constellation(s) {sorted(missing)}")


def load_scenario(path) -> Scenario:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return scenario_from_dict(doc)
    except (ParseError, SchemaError) as exc:
        raise type(exc)(f"{path}: {exc}") from None
