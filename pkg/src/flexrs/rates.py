"""Per-stream SINRs, achievable rates, and constraint checking.

Conventions used throughout:
  * stream index i runs 0..K where 0 is the shared stream and i = k + 1
    is user k's private beam (users and beams are 0-based in code);
  * an assignment maps device m to the private beam it rides (0..K-1);
  * the selection flags which users decode the shared stream before their
    own (flag 1) and which treat it as noise (flag 0);
  * all rates are spectral efficiencies, log base 2.

Because the private beams are zero-forcing, a user hears only the shared
stream, its own beam, and whatever device rides its own beam; devices hear
everything. The formulas below encode exactly that structure.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .errors import Unassigned
from .precoding import GainTable


@dataclass(frozen=True)
class BeamAssignment:
    """beam_of[m] = private beam (0..K-1) carrying device m, -1 = none."""

    beam_of: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.beam_of, dtype=int)
        object.__setattr__(self, "beam_of", b)
        used = b[b >= 0]
        if len(np.unique(used)) != len(used):
            raise ValueError("assignment rides two devices on one beam")

    @property
    def n_devices(self) -> int:
        return len(self.beam_of)

    def beam(self, m: int) -> int:
        b = int(self.beam_of[m])
        if b < 0:
            raise Unassigned(f"device {m} has no beam")
        return b

    def device_on_beam(self, k: int):
        """Device index riding beam k, or None."""
        hits = np.nonzero(self.beam_of == k)[0]
        return int(hits[0]) if len(hits) else None


@dataclass(frozen=True)
class RSSelection:
    """decode_common[k] = 1 if user k cancels the shared stream first."""

    decode_common: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.decode_common, dtype=np.int8)
        if np.any((s != 0) & (s != 1)):
            raise ValueError("selection flags must be 0/1")
        object.__setattr__(self, "decode_common", s)

    @property
    def n_users(self) -> int:
        return len(self.decode_common)

    @property
    def selected(self) -> np.ndarray:
        """Indices of users that decode the shared stream."""
        return np.nonzero(self.decode_common == 1)[0]

    @property
    def bitmask(self) -> int:
        return int(sum(1 << k for k in self.selected))

    @classmethod
    def all_ones(cls, k: int) -> "RSSelection":
        return cls(np.ones(k, dtype=np.int8))

    @classmethod
    def all_zeros(cls, k: int) -> "RSSelection":
        return cls(np.zeros(k, dtype=np.int8))

    @classmethod
    def from_bitmask(cls, mask: int, k: int) -> "RSSelection":
        return cls(np.array([(mask >> i) & 1 for i in range(k)], dtype=np.int8))


@dataclass(frozen=True)
class Allocation:
    """Transmit powers (W) and shared-rate shares (bps/Hz).

    p_stream[i] for i = 0..K covers the shared stream and the K private
    streams; p_dev[m] is device m's power on its beam; r_common[k] is the
    slice of the shared rate granted to user k (zero wherever the user does
    not decode the shared stream).
    """

    p_stream: np.ndarray
    p_dev: np.ndarray
    r_common: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_stream", np.asarray(self.p_stream, dtype=float))
        object.__setattr__(self, "p_dev", np.asarray(self.p_dev, dtype=float))
        object.__setattr__(self, "r_common", np.asarray(self.r_common, dtype=float))

    @property
    def total_power(self) -> float:
        return float(self.p_stream.sum() + self.p_dev.sum())


@dataclass(frozen=True)
class RateReport:
    """Rates achieved by one allocation plus signed constraint residuals.

    Residual convention: positive means violated by that amount, so a
    feasible point has every residual <= 0 (up to tolerance).
    """

    user_rates: np.ndarray        # total per-user rate, shared slice included
    user_private_rates: np.ndarray
    device_rates: np.ndarray
    common_capacity: float        # min shared-stream rate over decoders, inf if none
    sum_device_rate: float
    residuals: dict = field(repr=False)


def _device_power_on_beam(k: int, assignment: BeamAssignment, alloc: Allocation):
    m = assignment.device_on_beam(k)
    return alloc.p_dev[m] if m is not None else 0.0


def common_sinr(k: int, gains: GainTable, assignment: BeamAssignment,
                alloc: Allocation, noise_w: float) -> float:
    """Shared-stream SINR at user k (before private decoding, SIC order)."""
    own = gains.user_gain[k, k + 1]
    sig = gains.user_gain[k, 0] * alloc.p_stream[0]
    interf = own * alloc.p_stream[k + 1] \
        + own * _device_power_on_beam(k, assignment, alloc)
    return sig / (interf + noise_w)


def private_sinr(k: int, gains: GainTable, assignment: BeamAssignment,
                 alloc: Allocation, selection: RSSelection, noise_w: float) -> float:
    """Private-stream SINR at user k; shared stream is gone if k decoded it."""
    own = gains.user_gain[k, k + 1]
    sig = own * alloc.p_stream[k + 1]
    s_k = int(selection.decode_common[k])
    interf = (1 - s_k) * gains.user_gain[k, 0] * alloc.p_stream[0] \
        + own * _device_power_on_beam(k, assignment, alloc)
    return sig / (interf + noise_w)


def device_sinr(m: int, gains: GainTable, assignment: BeamAssignment,
                alloc: Allocation, noise_w: float) -> float:
    """SINR of device m, which hears every stream and every other device."""
    beam = assignment.beam(m)
    col = gains.device_gain[:, m]
    sig = col[beam + 1] * alloc.p_dev[m]
    interf = float(col @ alloc.p_stream)
    for j in range(assignment.n_devices):
        if j != m and assignment.beam_of[j] >= 0:
            interf += col[assignment.beam_of[j] + 1] * alloc.p_dev[j]
    return sig / (interf + noise_w)


def evaluate(gains: GainTable, assignment: BeamAssignment, selection: RSSelection,
             alloc: Allocation, config: SystemConfig) -> RateReport:
    """Rates and constraint residuals for one operating point."""
    k_users = selection.n_users
    noise = config.noise_w
    s = selection.decode_common

    priv = np.array([
        np.log2(1.0 + private_sinr(k, gains, assignment, alloc, selection, noise))
        for k in range(k_users)])
    user_rates = priv + s * alloc.r_common

    sel = selection.selected
    if len(sel):
        common_rates = np.array([
            np.log2(1.0 + common_sinr(k, gains, assignment, alloc, noise))
            for k in sel])
        common_cap = float(common_rates.min())
    else:
        common_cap = np.inf

    dev = np.array([
        np.log2(1.0 + device_sinr(m, gains, assignment, alloc, noise))
        if assignment.beam_of[m] >= 0 else 0.0
        for m in range(assignment.n_devices)])

    used = np.asarray(assignment.beam_of)
    used = used[used >= 0]
    shared_slices = float((s * alloc.r_common).sum())
    residuals = {
        "power_budget": alloc.total_power - config.p_max_w,
        "user_rate_floor": (config.r_th_bps_hz - user_rates).max(initial=-np.inf),
        "common_rate_cap": (shared_slices - common_cap) if len(sel) else
                           float(np.abs(alloc.r_common).max(initial=0.0)),
        "common_rate_nonneg": float((-alloc.r_common).max(initial=0.0)),
        "common_rate_unselected": float(np.abs(alloc.r_common[s == 0]).max(initial=0.0)),
        "power_nonneg": float(max(-alloc.p_stream.min(initial=0.0),
                                  -alloc.p_dev.min(initial=0.0))),
        "matching_injective": 0.0 if len(np.unique(used)) == len(used) else 1.0,
        "selection_binary": 0.0 if np.all((s == 0) | (s == 1)) else 1.0,
    }
    return RateReport(
        user_rates=user_rates,
        user_private_rates=priv,
        device_rates=dev,
        common_capacity=common_cap,
        sum_device_rate=float(dev.sum()),
        residuals=residuals,
    )


@dataclass(frozen=True)
class VerifyResult:
    passed: bool
    failures: tuple   # (name, residual) pairs that exceeded tolerance


def verify_constraints(report: RateReport, config: SystemConfig,
                       rate_tol: float = 1e-6,
                       power_tol_rel: float = 1e-9) -> VerifyResult:
    """Check every residual of a report against the acceptance tolerances."""
    tol = {
        "power_budget": power_tol_rel * config.p_max_w,
        "power_nonneg": power_tol_rel * config.p_max_w,
        "user_rate_floor": rate_tol,
        "common_rate_cap": rate_tol,
        "common_rate_nonneg": rate_tol,
        "common_rate_unselected": rate_tol,
        "matching_injective": 0.0,
        "selection_binary": 0.0,
    }
    failures = tuple((name, val) for name, val in report.residuals.items()
                     if val > tol[name])
    return VerifyResult(passed=not failures, failures=failures)
