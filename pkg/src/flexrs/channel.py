"""Array response models for a uniform linear array.

Antenna n (1-based, n = 1..N) sits at offset (n - (N+1)/2) * d along the
array axis, so the middle element is the phase reference. Near-field
responses use the exact per-element distance; far-field responses use the
first-order planar approximation with the common phase of the midpoint
distance kept in the amplitude factor.
"""
from __future__ import annotations

import numpy as np

from .config import SystemConfig, SPEED_OF_LIGHT


def element_offsets(config: SystemConfig) -> np.ndarray:
    """Signed element positions (n - (N+1)/2) * d for n = 1..N, in meters."""
    n = np.arange(1, config.n_antennas + 1, dtype=float)
    return (n - (config.n_antennas + 1) / 2.0) * config.antenna_spacing_m


def element_distances(loc, config: SystemConfig) -> np.ndarray:
    """Exact source-to-element distances for all N elements."""
    off = element_offsets(config)
    r = loc.distance_m
    # law of cosines against the array axis; angle measured off broadside
    return np.sqrt(r * r + off * off - 2.0 * off * r * np.sin(loc.angle_rad))


def element_distance(loc, n: int, config: SystemConfig) -> float:
    """Distance from the source at `loc` to antenna n (1-based)."""
    if not 1 <= n <= config.n_antennas:
        raise ValueError(f"antenna index {n} out of range 1..{config.n_antennas}")
    return float(element_distances(loc, config)[n - 1])


def path_amplitude(distance_m: float, config: SystemConfig) -> float:
    """Free-space amplitude c / (4 pi f d)."""
    return SPEED_OF_LIGHT / (4.0 * np.pi * config.carrier_freq_hz * distance_m)


def nf_response(loc, config: SystemConfig) -> np.ndarray:
    """Near-field channel: common amplitude, exact per-element phases."""
    beta = path_amplitude(loc.distance_m, config)
    d_n = element_distances(loc, config)
    return beta * np.exp(-2j * np.pi * d_n / config.wavelength_m)


def ff_response(loc, config: SystemConfig) -> np.ndarray:
    """Far-field channel: planar phases, midpoint distance in the amplitude.

    The global phase exp(-j 2 pi r / lambda) of the midpoint path is kept so
    the far-field vector is the genuine limit of the near-field one.
    """
    lam = config.wavelength_m
    beta = path_amplitude(loc.distance_m, config) \
        * np.exp(-2j * np.pi * loc.distance_m / lam)
    off = element_offsets(config)
    return beta * np.exp(2j * np.pi * off * np.sin(loc.angle_rad) / lam)


def rayleigh_distance(config: SystemConfig) -> float:
    """Near/far boundary 2 D^2 / lambda with aperture D = (N - 1) d."""
    return config.rayleigh_distance_m


def device_channel(loc, config: SystemConfig) -> np.ndarray:
    """Piecewise model: exact spherical inside the boundary, planar outside."""
    if loc.distance_m <= config.rayleigh_distance_m:
        return nf_response(loc, config)
    return ff_response(loc, config)
