"""Beam construction: zero-forcing private beams plus one shared beam.

Private beams null every other user exactly; the diagonal scaling makes
each column unit norm and the per-user effective gain real positive. The
shared beam reuses the weakest user's channel direction so that the user
most in need of help receives the shared stream coherently.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import RankDeficient

COND_LIMIT = 1e12


@dataclass(frozen=True)
class PrecoderSet:
    """Columns of `private` are unit-norm beams p_1..p_K; `common` is p_0."""

    private: np.ndarray   # (N, K) complex
    common: np.ndarray    # (N,) complex

    @property
    def n_users(self) -> int:
        return self.private.shape[1]

    def column(self, i: int) -> np.ndarray:
        """Precoder by stream index: 0 = common, 1..K = private beams."""
        if i == 0:
            return self.common
        return self.private[:, i - 1]


@dataclass(frozen=True)
class GainTable:
    """Squared effective gains between every stream and every receiver.

    user_gain[k, i]   = |h_k^H p_i|^2  for user k, stream i in 0..K
    device_gain[i, m] = |g_m^H p_i|^2  for device m, stream i in 0..K
    """

    user_gain: np.ndarray    # (K, K+1)
    device_gain: np.ndarray  # (K+1, M)


def zf_precoders(user_channels: np.ndarray) -> PrecoderSet:
    """Zero-forcing beams for the stacked user channels (K, N).

    Solves through a Cholesky factorization of the Gram matrix rather than
    forming H (H^H H)^{-1} explicitly. Raises RankDeficient when the channel
    matrix is numerically rank-deficient (condition number above 1e12).
    """
    h = np.asarray(user_channels)
    k, n = h.shape
    if k > n:
        raise RankDeficient(f"{k} users cannot be zero-forced with {n} antennas")
    cond = np.linalg.cond(h)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise RankDeficient(f"user channel condition number {cond:.3e}")
    gram = h.conj() @ h.T                      # (K, K) hermitian positive definite
    try:
        cf = cho_factor(gram, lower=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RankDeficient(f"gram factorization failed: {exc}") from exc
    gram_inv = cho_solve(cf, np.eye(k, dtype=complex))
    scale = 1.0 / np.sqrt(np.real(np.diag(gram_inv)))   # unit-norm column scaling
    directions = cho_solve(cf, h.conj()).conj().T       # H G^{-1}, shape (N, K)
    private = directions * scale[np.newaxis, :]
    norms = np.linalg.norm(h, axis=1)
    weakest = int(np.argmin(norms))        # argmin takes the lowest index on ties
    common = h[weakest] / norms[weakest]
    return PrecoderSet(private=private, common=common)


def gain_tables(user_channels, device_channels, precoders: PrecoderSet) -> GainTable:
    """Squared gains of all streams at all receivers."""
    h = np.asarray(user_channels)
    g = np.asarray(device_channels)
    k = h.shape[0]
    cols = np.concatenate([precoders.common[:, None], precoders.private], axis=1)
    user_gain = np.abs(h.conj() @ cols) ** 2            # (K, K+1)
    if g.shape[0]:
        device_gain = np.abs(g.conj() @ cols) ** 2      # (M, K+1)
    else:
        device_gain = np.zeros((0, k + 1))
    return GainTable(user_gain=user_gain, device_gain=device_gain.T.copy())
