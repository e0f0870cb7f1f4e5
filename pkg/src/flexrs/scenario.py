"""Drop locations and channels for one network snapshot.

The array sits at the origin along the y-axis; positions are polar
(distance from the array midpoint, angle in (-pi/2, pi/2) off broadside).
Users are legacy near-field receivers and always land inside the
near-field boundary; devices may land anywhere in the coverage disc and
get near- or far-field channels accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .errors import ConfigError
from . import channel

USER_MIN_DISTANCE_M = 1.0  # keep receivers off the array itself


@dataclass(frozen=True)
class PolarLocation:
    distance_m: float
    angle_rad: float


@dataclass(frozen=True)
class Scenario:
    """Sampled drop: positions plus per-receiver channel vectors."""

    config: SystemConfig
    seed: int
    user_locations: tuple          # K PolarLocation
    device_locations: tuple        # M PolarLocation
    user_channels: np.ndarray      # (K, N) complex
    device_channels: np.ndarray    # (M, N) complex


def _sample_annulus(rng, n, r_min, r_max):
    # area-uniform radius over the half-plane annulus sector
    u = rng.uniform(0.0, 1.0, size=n)
    r = np.sqrt(u * (r_max * r_max - r_min * r_min) + r_min * r_min)
    theta = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n)
    return r, theta


def sample_scenario(config: SystemConfig, seed: int) -> Scenario:
    """Draw one reproducible drop. Pure function of (config, seed)."""
    z = config.rayleigh_distance_m
    user_max = min(z, config.coverage_radius_m)
    if user_max <= USER_MIN_DISTANCE_M:
        raise ConfigError(
            f"near-field boundary {z:.3f} m leaves no room for users "
            f"beyond the {USER_MIN_DISTANCE_M} m standoff")
    rng = np.random.default_rng(seed)
    ur, uth = _sample_annulus(rng, config.n_users, USER_MIN_DISTANCE_M, user_max)
    dr, dth = _sample_annulus(rng, config.n_devices, USER_MIN_DISTANCE_M,
                              config.coverage_radius_m)
    users = tuple(PolarLocation(float(r), float(t)) for r, t in zip(ur, uth))
    devices = tuple(PolarLocation(float(r), float(t)) for r, t in zip(dr, dth))
    h = np.stack([channel.nf_response(loc, config) for loc in users]) \
        if users else np.zeros((0, config.n_antennas), dtype=complex)
    g = np.stack([channel.device_channel(loc, config) for loc in devices]) \
        if devices else np.zeros((0, config.n_antennas), dtype=complex)
    return Scenario(config=config, seed=seed,
                    user_locations=users, device_locations=devices,
                    user_channels=h, device_channels=g)
