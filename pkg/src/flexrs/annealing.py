"""Bit-flip annealing over the set of users that decode the shared stream.

The search space is every on/off pattern over the users. Each candidate is
scored by the full allocation pipeline, so evaluations are expensive and
results are memoized by bitmask. Moves that do not improve are still taken
with probability exp(delta / temperature), which decays geometrically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AllInfeasible
from .rates import RSSelection


@dataclass(frozen=True)
class AnnealResult:
    selection: RSSelection
    objective: float
    iterations: int
    evaluations: int
    best_trace: tuple  # best objective after each accepted-or-not iteration


def flip_probability(delta: float, temperature: float) -> float:
    """Metropolis acceptance: certain for non-losing moves."""
    if delta >= 0.0:
        return 1.0
    if temperature <= 0.0:
        return 0.0
    return math.exp(delta / temperature)


def anneal(evaluate, n_users: int, rng: np.random.Generator,
           init_temp: float = 20.0, decay: float = 0.9,
           max_iters: int | None = None) -> AnnealResult:
    """Minimize nothing, maximize `evaluate(selection)` by annealed bit flips.

    `evaluate` returns the achieved objective or -inf when the candidate
    admits no feasible allocation. Starts from everyone decoding. Flips
    cycle through the users in index order so every bit is revisited.
    """
    if max_iters is None:
        max_iters = 4 * n_users
    cache: dict[int, float] = {}

    def score(sel: RSSelection) -> float:
        key = sel.bitmask
        if key not in cache:
            cache[key] = float(evaluate(sel))
        return cache[key]

    current = RSSelection.all_ones(n_users)
    r_cur = score(current)
    best, r_best = current, r_cur
    trace = []
    temp = init_temp
    stale = 0
    it = 0
    for it in range(1, max_iters + 1):
        bit = (it - 1) % n_users
        flipped = current.decode_common.copy()
        flipped[bit] ^= 1
        candidate = RSSelection(decode_common=flipped)
        r_new = score(candidate)
        if r_new == -math.inf and r_cur == -math.inf:
            delta = 0.0
        else:
            delta = r_new - r_cur
        if rng.random() < flip_probability(delta, temp):
            current, r_cur = candidate, r_new
        if r_cur > r_best:
            best, r_best = current, r_cur
            stale = 0
        else:
            stale += 1
        trace.append(r_best)
        temp *= decay
        if stale >= n_users and temp < 1e-3 * init_temp:
            break
    if r_best == -math.inf:
        raise AllInfeasible("no decoding pattern admits a feasible allocation")
    return AnnealResult(selection=best, objective=r_best,
                        iterations=it, evaluations=len(cache),
                        best_trace=tuple(trace))
