"""Device-to-beam scheduling by accelerated bisection on the bottleneck gain.

The scheduler maximizes the smallest scheduled gain: a threshold is bisected
on the normalized gain matrix, and at each threshold a degree-greedy matching
decides whether every device can still be placed on a distinct beam using
only gains above the threshold. Success raises the lower bound to the
matched minimum; failure lowers the upper bound. Two shortcuts from the
search structure: a successful matching whose bottleneck device has no
alternative at that level is provably optimal, and the matched minimum
(rather than the midpoint) tightens the lower bound.

Worst-case outer iterations: ceil(-log2(tolerance)) + 1 on the normalized
scale. The greedy matching is O(K M) per attempt.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from .errors import InfeasibleMatrix, TooLarge
from .rates import BeamAssignment

ORACLE_LIMIT = 9


def _greedy_matching(gmat: np.ndarray, threshold: float):
    """Degree-greedy injective matching using entries strictly above threshold.

    Repeatedly takes the unmatched device with the fewest feasible beams
    (ties to the lower index), gives it its feasible beam with the fewest
    remaining candidate devices (ties to the lower index), and removes both
    from play. Returns (beam_of, matched_values) or (None, None) when some
    device runs out of beams.
    """
    k, m = gmat.shape
    work = np.where(gmat > threshold, gmat, 0.0)
    beam_of = np.full(m, -1, dtype=int)
    val_of = np.zeros(m)
    open_devices = list(range(m))
    while open_devices:
        col_deg = {j: int(np.count_nonzero(work[:, j])) for j in open_devices}
        if min(col_deg.values()) == 0:
            return None, None
        dev = min(open_devices, key=lambda j: (col_deg[j], j))
        rows = np.nonzero(work[:, dev])[0]
        row_deg = np.count_nonzero(work[rows, :], axis=1)
        beam = rows[np.lexsort((rows, row_deg))[0]]
        beam_of[dev] = beam
        val_of[dev] = gmat[beam, dev]
        work[beam, :] = 0.0
        work[:, dev] = 0.0
        open_devices.remove(dev)
    return beam_of, val_of


def abs_schedule(gain_matrix: np.ndarray, tolerance: float = 1e-4,
                 max_iters: int = 64):
    """Bottleneck-maximizing assignment via accelerated bisection.

    gain_matrix[k, m] is device m's squared gain on private beam k; it must
    be nonnegative with M <= K. Returns (BeamAssignment, bottleneck gain on
    the raw scale, outer iterations used).
    """
    g = np.asarray(gain_matrix, dtype=float)
    if g.ndim != 2:
        raise ValueError("gain matrix must be 2-D")
    k, m = g.shape
    if m > k:
        raise InfeasibleMatrix(f"{m} devices cannot ride {k} beams injectively")
    if np.any(g < 0):
        raise ValueError("gains must be nonnegative")
    if m == 0:
        return BeamAssignment(np.empty(0, dtype=int)), np.inf, 0
    dead = np.nonzero(~g.any(axis=0))[0]
    if len(dead):
        raise InfeasibleMatrix(f"device {dead[0]} has no nonzero gain")
    top = g.max()
    gn = g / top

    # baseline at threshold zero covers degenerate spectra (constant matrix)
    beam_of, vals = _greedy_matching(gn, 0.0)
    if beam_of is None:
        raise InfeasibleMatrix("no injective matching exists")
    best_beam_of, best_bottleneck = beam_of, vals.min()

    alpha_lo = gn.min()
    alpha_hi = np.min(gn.max(axis=0))   # bottleneck can't beat any device's best
    eps_prev = None
    iters = 0
    while iters < max_iters:
        eps = 0.5 * (alpha_lo + alpha_hi)
        if eps_prev is not None and abs(eps - eps_prev) <= tolerance:
            break
        eps_prev = eps
        iters += 1
        beam_of, vals = _greedy_matching(gn, eps)
        if beam_of is not None:
            low = vals.min()
            if low > best_bottleneck:
                best_beam_of, best_bottleneck = beam_of, low
            # optimality shortcut: the weakest device has no other beam at
            # this level, so no matching can raise the minimum
            bottleneck_dev = int(np.argmin(vals))
            if np.count_nonzero(gn[:, bottleneck_dev] >= low) == 1:
                break
            alpha_lo = low
        else:
            alpha_hi = eps

    assignment = BeamAssignment(np.asarray(best_beam_of, dtype=int))
    return assignment, float(best_bottleneck * top), iters


def bottleneck_oracle(gain_matrix: np.ndarray):
    """Exhaustive bottleneck matching; ties break to the lexicographically
    smallest beam vector. Guarded to M <= 9 devices."""
    g = np.asarray(gain_matrix, dtype=float)
    k, m = g.shape
    if m > ORACLE_LIMIT:
        raise TooLarge(f"oracle enumerates at most {ORACLE_LIMIT} devices, got {m}")
    if m > k:
        raise InfeasibleMatrix(f"{m} devices cannot ride {k} beams injectively")
    if m == 0:
        return BeamAssignment(np.empty(0, dtype=int)), np.inf
    best_perm, best_val = None, -np.inf
    for perm in permutations(range(k), m):
        val = min(g[perm[j], j] for j in range(m))
        if val > best_val:
            best_perm, best_val = perm, val
    if best_val <= 0.0:
        dead = np.nonzero(~g.any(axis=0))[0]
        if len(dead):
            raise InfeasibleMatrix(f"device {dead[0]} has no nonzero gain")
    return BeamAssignment(np.array(best_perm, dtype=int)), float(best_val)


def random_schedule(n_beams: int, n_devices: int, rng) -> BeamAssignment:
    """Uniformly random injective assignment (baseline scheduler)."""
    if n_devices > n_beams:
        raise InfeasibleMatrix(
            f"{n_devices} devices cannot ride {n_beams} beams injectively")
    beams = rng.permutation(n_beams)[:n_devices]
    return BeamAssignment(np.asarray(beams, dtype=int))
