"""System configuration: physical constants, unit conversions, JSON ingestion.

All internal computation is done in SI units (watts, meters, hertz, seconds);
dBm appears only at the JSON boundary. Rates are in bps/Hz (log base 2)
throughout.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

from .errors import ConfigError

SPEED_OF_LIGHT = 2.998e8  # m/s

# JSON keys that must be present in a config file.
REQUIRED_KEYS = (
    "n_antennas",
    "n_users",
    "n_devices",
    "carrier_freq_hz",
    "antenna_spacing_m",
    "p_max_dbm",
    "noise_dbm",
    "r_th_bps_hz",
    "coverage_radius_m",
)

# Optional keys with their defaults (None = derived later).
OPTIONAL_DEFAULTS = {
    "anneal_init": 20.0,       # initial annealing temperature
    "anneal_decay": 0.9,       # geometric cooling factor
    "abs_tolerance": 1e-4,     # bisection width on normalized gains
    "inner_tol": 1e-6,         # barrier duality-gap target for the convex step
    "outer_tol": 1e-5,         # |objective delta| stop for alternating rounds
    "max_iters_abs": 64,
    "max_iters_alt": 50,
    "max_iters_anneal": None,  # defaults to 4 * n_users when absent
    "seed": 0,
}


def dbm_to_watt(p_dbm: float) -> float:
    """Convert dBm to watts. 30 dBm -> 1 W, 0 dBm -> 1 mW."""
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Immutable description of one network instance.

    Powers are stored in watts, distances in meters. `wavelength_m` may be
    passed explicitly; when omitted it is derived as c / carrier_freq_hz.
    Giving both is allowed only if they agree with c to 1e-6 relative.
    """

    n_antennas: int            # N, odd
    n_users: int               # K legacy users, one zero-forcing beam each
    n_devices: int             # M piggyback devices, at most one per beam
    carrier_freq_hz: float
    antenna_spacing_m: float
    p_max_w: float             # total downlink budget
    noise_w: float             # receiver noise power
    r_th_bps_hz: float         # per-user rate floor
    coverage_radius_m: float
    wavelength_m: float = None  # derived from carrier when not given
    anneal_init: float = 20.0
    anneal_decay: float = 0.9
    abs_tolerance: float = 1e-4
    inner_tol: float = 1e-6
    outer_tol: float = 1e-5
    max_iters_abs: int = 64
    max_iters_alt: int = 50
    max_iters_anneal: int = None
    seed: int = 0

    def __post_init__(self):
        if self.n_antennas <= 0 or self.n_antennas % 2 == 0:
            raise ConfigError("n_antennas must be a positive odd integer")
        if self.n_users < 1:
            raise ConfigError("n_users must be >= 1")
        if self.n_devices < 0:
            raise ConfigError("n_devices must be >= 0")
        if self.n_devices > self.n_users:
            raise ConfigError("n_devices must not exceed n_users (one beam each)")
        for name in ("carrier_freq_hz", "antenna_spacing_m", "p_max_w",
                     "noise_w", "coverage_radius_m"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.r_th_bps_hz < 0:
            raise ConfigError("r_th_bps_hz must be >= 0")
        if self.wavelength_m is None:
            object.__setattr__(
                self, "wavelength_m", SPEED_OF_LIGHT / self.carrier_freq_hz)
        else:
            if self.wavelength_m <= 0:
                raise ConfigError("wavelength_m must be positive")
            err = abs(self.wavelength_m * self.carrier_freq_hz - SPEED_OF_LIGHT)
            if err > 1e-6 * SPEED_OF_LIGHT:
                raise ConfigError(
                    "wavelength_m and carrier_freq_hz disagree with c "
                    f"by {err:.3e} m/s (limit 1e-6 relative)")
        if not (0.0 < self.anneal_decay < 1.0):
            raise ConfigError("anneal_decay must lie in (0, 1)")
        if self.anneal_init <= 0:
            raise ConfigError("anneal_init must be positive")
        for name in ("abs_tolerance", "inner_tol", "outer_tol"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("max_iters_abs", "max_iters_alt"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_iters_anneal is None:
            object.__setattr__(self, "max_iters_anneal", 4 * self.n_users)
        if self.max_iters_anneal < 0:
            raise ConfigError("max_iters_anneal must be >= 0")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    # -- derived quantities -------------------------------------------------

    @property
    def aperture_m(self) -> float:
        """Array aperture D = (N - 1) d."""
        return (self.n_antennas - 1) * self.antenna_spacing_m

    @property
    def rayleigh_distance_m(self) -> float:
        """Near-field / far-field boundary 2 D^2 / lambda."""
        d = self.aperture_m
        return 2.0 * d * d / self.wavelength_m

    @property
    def p_max_dbm(self) -> float:
        return 10.0 * math.log10(self.p_max_w) + 30.0

    @property
    def noise_dbm(self) -> float:
        return 10.0 * math.log10(self.noise_w) + 30.0

    # -- serialization ------------------------------------------------------

    def to_json_dict(self) -> dict:
        """Round-trippable dict using the JSON schema keys (powers in dBm)."""
        return {
            "n_antennas": self.n_antennas,
            "n_users": self.n_users,
            "n_devices": self.n_devices,
            "carrier_freq_hz": self.carrier_freq_hz,
            "antenna_spacing_m": self.antenna_spacing_m,
            "p_max_dbm": self.p_max_dbm,
            "noise_dbm": self.noise_dbm,
            "r_th_bps_hz": self.r_th_bps_hz,
            "coverage_radius_m": self.coverage_radius_m,
            "anneal_init": self.anneal_init,
            "anneal_decay": self.anneal_decay,
            "abs_tolerance": self.abs_tolerance,
            "inner_tol": self.inner_tol,
            "outer_tol": self.outer_tol,
            "max_iters_abs": self.max_iters_abs,
            "max_iters_alt": self.max_iters_alt,
            "max_iters_anneal": self.max_iters_anneal,
            "seed": self.seed,
        }

    def digest(self) -> str:
        """Short stable hash identifying this config in output records."""
        blob = json.dumps(self.to_json_dict(), sort_keys=True,
                          separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def replace(self, **changes) -> "SystemConfig":
        d = asdict(self)
        # max_iters_anneal was resolved from n_users; keep it tracking K
        # unless the caller pinned it explicitly.
        if "n_users" in changes and "max_iters_anneal" not in changes:
            if d["max_iters_anneal"] == 4 * d["n_users"]:
                d["max_iters_anneal"] = None
        d.update(changes)
        return SystemConfig(**d)


def config_from_dict(raw: dict) -> SystemConfig:
    """Build a SystemConfig from JSON-schema keys (powers in dBm)."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in raw]
    if missing:
        raise ConfigError(f"missing config keys: {', '.join(missing)}")
    known = set(REQUIRED_KEYS) | set(OPTIONAL_DEFAULTS)
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    vals = dict(OPTIONAL_DEFAULTS)
    vals.update(raw)
    try:
        return SystemConfig(
            n_antennas=int(vals["n_antennas"]),
            n_users=int(vals["n_users"]),
            n_devices=int(vals["n_devices"]),
            carrier_freq_hz=float(vals["carrier_freq_hz"]),
            antenna_spacing_m=float(vals["antenna_spacing_m"]),
            p_max_w=dbm_to_watt(float(vals["p_max_dbm"])),
            noise_w=dbm_to_watt(float(vals["noise_dbm"])),
            r_th_bps_hz=float(vals["r_th_bps_hz"]),
            coverage_radius_m=float(vals["coverage_radius_m"]),
            anneal_init=float(vals["anneal_init"]),
            anneal_decay=float(vals["anneal_decay"]),
            abs_tolerance=float(vals["abs_tolerance"]),
            inner_tol=float(vals["inner_tol"]),
            outer_tol=float(vals["outer_tol"]),
            max_iters_abs=int(vals["max_iters_abs"]),
            max_iters_alt=int(vals["max_iters_alt"]),
            max_iters_anneal=(None if vals["max_iters_anneal"] is None
                              else int(vals["max_iters_anneal"])),
            seed=int(vals["seed"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path) -> SystemConfig:
    """Read a JSON config file. Raises ConfigError on any problem."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(raw)


def reference_config(**overrides) -> SystemConfig:
    """The reference large-array configuration used by the simulations.

    The carrier is pinned to c / 0.01 so the wavelength is exactly 1 cm and
    the half-wavelength spacing is exactly 5 mm; every derived geometry
    quantity (aperture 0.63 m, boundary 79.38 m) is then exact.
    """
    base = dict(
        n_antennas=127,
        n_users=8,
        n_devices=8,
        carrier_freq_hz=SPEED_OF_LIGHT / 0.01,
        antenna_spacing_m=0.005,
        p_max_w=dbm_to_watt(30.0),
        noise_w=dbm_to_watt(-80.0),
        r_th_bps_hz=0.8,
        coverage_radius_m=120.0,
    )
    base.update(overrides)
    return SystemConfig(**base)
