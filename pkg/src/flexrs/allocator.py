"""Power and shared-rate allocation for a fixed schedule and selection.

The sum-of-device-rates objective is lifted with the standard quadratic
transform: each SINR gets an auxiliary variable whose closed-form optimum
makes the concave surrogate touch the true ratio. Alternating those two
updates yields a monotone objective; the surrogate step itself is a small
convex program solved by the barrier kernel. Powers enter the kernel
normalized by the budget and the noise floor so the Newton systems stay
near unit scale.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .config import SystemConfig
from .errors import Infeasible, NoProgress
from .precoding import GainTable
from .rates import Allocation, BeamAssignment, RSSelection

BUDGET_USE = 0.98        # initial split keeps a 2% reserve so the point is interior
BARRIER_T0 = 8.0
BARRIER_MU = 20.0
NEWTON_TOL = 1e-9
MAX_NEWTON = 60


@dataclass(frozen=True)
class AuxVariables:
    """Quadratic-transform auxiliaries, zero for streams not in play."""

    y_common: np.ndarray   # per user, zero unless the user decodes the shared stream
    y_private: np.ndarray  # per user
    y_device: np.ndarray   # per device


@dataclass(frozen=True)
class AllocationResult:
    allocation: Allocation
    device_rates: np.ndarray
    objective_trace: tuple
    converged: bool
    iterations: int


class _Problem:
    """Packed normalized ratio tables for one (gains, schedule, selection)."""

    def __init__(self, gains: GainTable, assignment: BeamAssignment,
                 selection: RSSelection, config: SystemConfig):
        k = selection.n_users
        m = assignment.n_devices
        self.config = config
        self.k = k
        self.m = m
        self.n_pow = 1 + k + m
        self.sel_idx = np.asarray(selection.selected, dtype=np.int64)
        self.n_c = len(self.sel_idx)
        self.s_arr = selection.decode_common.astype(np.float64)
        self.sel_pos = np.full(k, -1, dtype=np.int64)
        for j, kk in enumerate(self.sel_idx):
            self.sel_pos[kk] = j
        self.unsel_idx = np.flatnonzero(self.sel_pos < 0)
        self.beam_of = np.asarray(assignment.beam_of, dtype=np.int64)

        scale = config.p_max_w / config.noise_w
        hu = gains.user_gain * scale          # (K, K+1)
        gd = gains.device_gain * scale        # (K+1, M)

        nr = self.n_c + k + m
        self.a = np.zeros(nr)
        self.own = np.zeros(nr, dtype=np.int64)
        self.w = np.zeros((nr, self.n_pow))
        dev_on = {int(b): j for j, b in enumerate(self.beam_of) if b >= 0}

        for j, kk in enumerate(self.sel_idx):          # shared-stream rows
            self.a[j] = hu[kk, 0]
            self.own[j] = 0
            self.w[j, 1 + kk] = hu[kk, kk + 1]
            if kk in dev_on:
                self.w[j, 1 + k + dev_on[kk]] = hu[kk, kk + 1]
        for kk in range(k):                            # private rows
            r = self.n_c + kk
            self.a[r] = hu[kk, kk + 1]
            self.own[r] = 1 + kk
            self.w[r, 0] = (1.0 - self.s_arr[kk]) * hu[kk, 0]
            if kk in dev_on:
                self.w[r, 1 + k + dev_on[kk]] = hu[kk, kk + 1]
        for mm in range(m):                            # device rows
            r = self.n_c + k + mm
            b = int(self.beam_of[mm])
            self.a[r] = gd[b + 1, mm]
            self.own[r] = 1 + k + mm
            self.w[r, 0:k + 1] = gd[:, mm]
            for j, bj in enumerate(self.beam_of):
                if j != mm and bj >= 0:
                    self.w[r, 1 + k + j] = gd[bj + 1, mm]

        # decision-variable maps: shared power only exists with decoders
        free = []
        if self.n_c > 0:
            free.append(0)
        free.extend(range(1, 1 + k))
        free.extend(range(1 + k, 1 + k + m))
        self.free_idx = np.asarray(free, dtype=np.int64)
        self.inv_free = np.full(self.n_pow, -1, dtype=np.int64)
        for i, c in enumerate(self.free_idx):
            self.inv_free[c] = i
        self.n_free = len(self.free_idx)
        self.p_base = np.zeros(self.n_pow)
        self.r_th = config.r_th_bps_hz

        # phase-1 variant: users only, devices pinned to zero
        pfree = [0] if self.n_c > 0 else []
        pfree.extend(range(1, 1 + k))
        self.p1_free_idx = np.asarray(pfree, dtype=np.int64)
        self.p1_inv_free = np.full(self.n_pow, -1, dtype=np.int64)
        for i, c in enumerate(self.p1_free_idx):
            self.p1_inv_free[c] = i

    # -- helpers ------------------------------------------------------------

    def pack(self, p_norm, rc):
        return np.concatenate([p_norm[self.free_idx], rc])

    def unpack(self, x):
        p = self.p_base.copy()
        p[self.free_idx] = x[:self.n_free]
        rc = x[self.n_free:self.n_free + self.n_c]
        return p, rc

    def aux(self, p_norm) -> np.ndarray:
        return _kernels.aux_values(p_norm, self.a, self.own, self.w, 1.0)

    def true_rates(self, p_norm):
        """(common rates over selected, private rates, device rates), bits."""
        g = _kernels.sinr_values(p_norm, self.a, self.own, self.w, 1.0)
        rates = np.log2(1.0 + g)
        return (rates[:self.n_c], rates[self.n_c:self.n_c + self.k],
                rates[self.n_c + self.k:])

    def device_objective(self, p_norm, y) -> float:
        if self.m == 0:
            return 0.0
        f = _kernels.surrogate_f(p_norm, y, self.a, self.own, self.w, 1.0)
        fd = f[self.n_c + self.k:]
        if np.any(fd <= -1.0):
            return -np.inf
        return float(np.log2(1.0 + fd).sum())

    def floor_slacks(self, p_norm, rc):
        """True-rate floor slacks s rc + R_private - R_th, per user."""
        _, priv, _ = self.true_rates(p_norm)
        rc_full = np.zeros(self.k)
        rc_full[self.sel_idx] = rc
        return self.s_arr * rc_full + priv - self.r_th

    def cap_slack(self, p_norm, rc) -> float:
        if self.n_c == 0:
            return np.inf
        com, _, _ = self.true_rates(p_norm)
        return float(com.min() - rc.sum())

    def to_allocation(self, p_norm, rc) -> Allocation:
        p_w = p_norm * self.config.p_max_w
        rc_full = np.zeros(self.k)
        if self.n_c:
            rc_full[self.sel_idx] = rc
        return Allocation(p_stream=p_w[:1 + self.k],
                          p_dev=p_w[1 + self.k:],
                          r_common=rc_full)


def _split_point(prob: _Problem, user_share: float):
    """Uniform split: user_share of the working budget over user streams
    (shared stream included only when someone decodes it), the rest over
    devices, scaled by a small reserve to stay strictly interior."""
    p = np.zeros(prob.n_pow)
    n_user_streams = prob.k + (1 if prob.n_c > 0 else 0)
    if prob.n_c > 0:
        p[0] = user_share * BUDGET_USE / n_user_streams
    p[1:1 + prob.k] = user_share * BUDGET_USE / n_user_streams
    if prob.m > 0:
        p[1 + prob.k:] = (1.0 - user_share) * BUDGET_USE / prob.m
    return p


def _concentrated_points(prob: _Problem):
    """One candidate per device: that device gets the slack budget, its beam
    partner holds the floor against it, every other user sits at the lone
    floor minimum. Beams are mutually nulled, so the per-user arithmetic
    decouples and the split is closed form. These starts sit inside the
    single-device basins that the alternation otherwise reaches by a long
    crawl of support switching."""
    theta = 2.0 ** prob.r_th - 1.0
    own = prob.a[prob.n_c:prob.n_c + prob.k]   # each user's own-beam gain
    if np.any(own <= 0.0):
        return
    p_min = 1.3 * theta / own
    tiny = 1e-9
    for j in range(prob.m):
        b = int(prob.beam_of[j])
        fixed = float(p_min.sum() - p_min[b])
        slop = tiny * (1 + (prob.m - 1))
        room = BUDGET_USE - fixed - 1.05 * theta / own[b] - slop
        p_d = room / (1.0 + 1.05 * theta)
        if p_d <= 0.0:
            continue
        p = np.full(prob.n_pow, 0.0)
        if prob.n_c > 0:
            p[0] = tiny
        p[1:1 + prob.k] = p_min
        p[1 + b] = 1.05 * theta * (p_d + 1.0 / own[b])
        p[1 + prob.k:] = tiny
        p[1 + prob.k + j] = p_d
        yield p


def _start_candidates(prob: _Problem):
    """Feasible starting points sorted by the device rate they already carry:
    uniform splits plus the per-device concentrations. Floors bind at the
    optimum, so lean starts tend to sit much closer to it than an even
    split."""
    if prob.m == 0:
        p = _split_point(prob, 1.0)
        rc = _rc_for_deficits(prob, p)
        if rc is None or prob.floor_slacks(p, rc).min() <= 1e-9:
            return []
        return [(p, rc, 0.0)]
    raw = [_split_point(prob, share)
           for share in (0.7, 0.5, 0.35, 0.25, 0.18, 0.12, 0.08, 0.05, 0.03)]
    raw.extend(_concentrated_points(prob))
    out = []
    for p in raw:
        rc = _rc_for_deficits(prob, p)
        if rc is None or prob.floor_slacks(p, rc).min() <= 1e-9:
            continue
        out.append((p, rc, float(prob.true_rates(p)[2].sum())))
    out.sort(key=lambda c: -c[2])
    return out


def _rc_for_deficits(prob: _Problem, p_norm):
    """Cover each selected user's floor deficit out of the shared pool,
    leaving strictly positive margins. None if the pool cannot cover."""
    slacks = prob.floor_slacks(p_norm, np.zeros(prob.n_c))
    if prob.n_c == 0:
        return (np.zeros(0) if np.all(slacks > 0) else None)
    deficits = np.maximum(0.0, -slacks[prob.sel_idx])
    if len(prob.unsel_idx) and np.any(slacks[prob.unsel_idx] <= 0):
        return None
    com, _, _ = prob.true_rates(p_norm)
    cap = float(com.min())
    room = cap - deficits.sum()
    if room <= 0:
        return None
    eta = min(0.25 * room / prob.n_c, 0.1)
    return deficits + eta


def _phase1(prob: _Problem):
    """Maximize the minimum floor slack with devices silent; the shared pool
    may help. Returns a strictly feasible (p_norm, rc) or raises Infeasible."""
    k = prob.k
    p = np.zeros(prob.n_pow)
    n_user_streams = k + (1 if prob.n_c > 0 else 0)
    if prob.n_c > 0:
        p[0] = BUDGET_USE / n_user_streams
    p[1:1 + k] = BUDGET_USE / n_user_streams
    if prob.n_c > 0:
        com, _, _ = prob.true_rates(p)
        rc = np.full(prob.n_c, min(1e-3, 0.5 * float(com.min()) / prob.n_c))
        if rc[0] <= 0:
            raise Infeasible("shared stream carries no rate at any split")
    else:
        rc = np.zeros(0)
    best_tau = -np.inf
    for _round in range(12):
        y = prob.aux(p)
        slack0 = prob.floor_slacks(p, rc)
        tau0 = float(slack0.min()) - 1.0
        x0 = np.concatenate([p[prob.p1_free_idx], rc, [tau0]])
        x, _status = _kernels.solve_barrier(
            x0, 1, prob.p_base, prob.p1_free_idx, prob.p1_inv_free,
            prob.a, prob.own, prob.w, y,
            prob.n_c, k, 0, prob.s_arr, prob.sel_pos, prob.r_th, 1.0, 1.0,
            BARRIER_T0, BARRIER_MU, 1e-5, NEWTON_TOL, MAX_NEWTON)
        n1 = len(prob.p1_free_idx)
        p_new = prob.p_base.copy()
        p_new[prob.p1_free_idx] = x[:n1]
        rc_new = x[n1:n1 + prob.n_c]
        tau_true = float(prob.floor_slacks(p_new, rc_new).min())
        if prob.n_c:
            tau_true = min(tau_true, prob.cap_slack(p_new, rc_new))
        p, rc = p_new, rc_new
        if tau_true > 1e-7:
            return p, rc
        if tau_true <= best_tau + 1e-9:
            break
        best_tau = tau_true
    raise Infeasible(
        f"rate floor {prob.r_th} bps/Hz unreachable; best min slack {best_tau:.3e}")


def _strictly_feasible_start(prob: _Problem):
    """Direct split when one satisfies every floor, else phase 1 followed by
    easing the devices in without giving up the found margin."""
    cands = _start_candidates(prob)
    if cands:
        p, rc, _ = cands[0]
        return p, rc
    p, rc = _phase1(prob)
    if prob.m == 0:
        return p, rc
    margin = prob.floor_slacks(p, rc).min()
    if prob.n_c:
        margin = min(margin, prob.cap_slack(p, rc))
    budget_room = 1.0 - p.sum()
    eps = min(1e-4, 0.25 * budget_room / prob.m)
    for _ in range(80):
        trial = p.copy()
        trial[1 + prob.k:] = eps
        ok = prob.floor_slacks(trial, rc).min() > 0.5 * margin
        if ok and prob.n_c:
            ok = prob.cap_slack(trial, rc) > 0.5 * margin
        if ok and trial.sum() < 1.0:
            return trial, rc
        eps *= 0.25
    raise Infeasible("cannot power devices without breaking a rate floor")


def build_problem(gains: GainTable, assignment: BeamAssignment,
                  selection: RSSelection, config: SystemConfig) -> _Problem:
    return _Problem(gains, assignment, selection, config)


def aux_update(alloc: Allocation, gains: GainTable, assignment: BeamAssignment,
               selection: RSSelection, config: SystemConfig) -> AuxVariables:
    """Closed-form optimal auxiliaries at the current powers (watt scale)."""
    prob = _Problem(gains, assignment, selection, config)
    p_norm = np.concatenate([alloc.p_stream, alloc.p_dev]) / config.p_max_w
    y = prob.aux(p_norm)
    # undo the normalization: y_watt = y_norm / sqrt(noise)
    y = y / np.sqrt(config.noise_w)
    y_common = np.zeros(prob.k)
    y_common[prob.sel_idx] = y[:prob.n_c]
    return AuxVariables(y_common=y_common,
                        y_private=y[prob.n_c:prob.n_c + prob.k],
                        y_device=y[prob.n_c + prob.k:])


def surrogate_eval(aux: AuxVariables, alloc: Allocation, gains: GainTable,
                   assignment: BeamAssignment, selection: RSSelection,
                   config: SystemConfig):
    """Surrogate values (common, private, device) at given auxiliaries."""
    prob = _Problem(gains, assignment, selection, config)
    p_norm = np.concatenate([alloc.p_stream, alloc.p_dev]) / config.p_max_w
    y = np.concatenate([aux.y_common[prob.sel_idx], aux.y_private,
                        aux.y_device]) * np.sqrt(config.noise_w)
    f = _kernels.surrogate_f(p_norm, y, prob.a, prob.own, prob.w, 1.0)
    f_common = np.zeros(prob.k)
    f_common[prob.sel_idx] = f[:prob.n_c]
    return (f_common, f[prob.n_c:prob.n_c + prob.k], f[prob.n_c + prob.k:])


def convex_step(aux: AuxVariables, alloc_warm: Allocation, gains: GainTable,
                assignment: BeamAssignment, selection: RSSelection,
                config: SystemConfig):
    """One inner maximization at fixed auxiliaries from a feasible point.

    Returns (allocation, device rate variables, surrogate objective).
    """
    prob = _Problem(gains, assignment, selection, config)
    p_norm = np.concatenate([alloc_warm.p_stream, alloc_warm.p_dev]) / config.p_max_w
    rc = alloc_warm.r_common[prob.sel_idx]
    y = np.concatenate([aux.y_common[prob.sel_idx], aux.y_private,
                        aux.y_device]) * np.sqrt(config.noise_w)
    x, p_new, rc_new = _solve_at_aux(prob, p_norm, rc, y)
    f = _kernels.surrogate_f(p_new, y, prob.a, prob.own, prob.w, 1.0)
    rdev = np.log2(1.0 + f[prob.n_c + prob.k:])
    return prob.to_allocation(p_new, rc_new), rdev, prob.device_objective(p_new, y)


def _solve_at_aux(prob: _Problem, p_norm, rc, y, t0: float = BARRIER_T0):
    x0 = prob.pack(p_norm, rc)
    x, _status = _kernels.solve_barrier(
        x0, 0, prob.p_base, prob.free_idx, prob.inv_free,
        prob.a, prob.own, prob.w, y,
        prob.n_c, prob.k, prob.m, prob.s_arr, prob.sel_pos, prob.r_th, 1.0, 1.0,
        t0, BARRIER_MU, prob.config.inner_tol, NEWTON_TOL, MAX_NEWTON)
    p_new, rc_new = prob.unpack(x)
    return x, p_new, rc_new


def _one_round(prob: _Problem, p, rc, last_obj, t0: float = BARRIER_T0):
    """Auxiliary update plus barrier step; a step that fails to improve the
    surrogate is discarded, which freezes the trajectory."""
    y = prob.aux(p)
    _, p_new, rc_new = _solve_at_aux(prob, p, rc, y, t0)
    if prob.device_objective(p_new, y) >= last_obj - 1e-12:
        p, rc = p_new, rc_new
    return p, rc, float(prob.true_rates(p)[2].sum())


PILOT_WIDTH = 4
JUMP_TRIGGER = 3e-3      # per-round gain below this counts as creeping
JUMP_COOLDOWN = 2        # rounds between scans after one comes up empty
PIN_MARGIN = 1.0 + 1e-4
WARM_T0 = 320.0          # rounds after the first restart the barrier nearer
                         # its end; the previous optimum is already central


def _pin_users(prob: _Problem, cand):
    """Set every user power to its floor minimum given the other powers.
    User beams are mutually nulled, so the requirement is exact in one pass
    and a second pass after any device rescale can only shrink it."""
    k, nc = prob.k, prob.n_c
    theta = 2.0 ** prob.r_th - 1.0
    den = prob.w[nc:nc + k] @ cand + 1.0
    cand[1:1 + k] = np.maximum(PIN_MARGIN * theta * den / prob.a[nc:nc + k],
                               1e-12)
    return cand


def _jump_accept(prob: _Problem, cand, obj_floor):
    """One-call feasibility and value check for a jump candidate.

    A single SINR evaluation yields the objective, the floor margins, and the
    shared-pool split, so a losing candidate costs one kernel call. Returns
    (cand, rc, objective) when the candidate is strictly feasible and beats
    obj_floor, else None."""
    com, priv, dev = prob.true_rates(cand)
    obj = float(dev.sum())
    if obj <= obj_floor + 1e-9:
        return None
    slack0 = priv - prob.r_th
    if len(prob.unsel_idx) and slack0[prob.unsel_idx].min() <= 1e-10:
        return None
    if prob.n_c == 0:
        if prob.k and slack0.min() <= 1e-10:
            return None
        return cand, np.zeros(0), obj
    deficits = np.maximum(0.0, -slack0[prob.sel_idx])
    room = float(com.min()) - deficits.sum()
    if room <= 0.0:
        return None
    eta = min(0.25 * room / prob.n_c, 0.1)
    # final slack per selected user is slack0 + deficit + eta; the pool may
    # legitimately be near empty when every floor is met privately
    if float((slack0[prob.sel_idx] + deficits).min()) + eta <= 1e-10:
        return None
    return cand, deficits + eta, obj


def _transfer_jump(prob: _Problem, p, obj_now):
    """Move budget between beam pairs in one shot.

    Near a flat valley the alternation drifts power between two device/user
    pairs a fraction of a percent per round. The valley coordinates are the
    per-pair budgets, so trying a grid of direct pair-to-pair transfers with
    floor-pinned users crosses in one step what the drift does in a hundred.
    Only strictly feasible candidates that beat the current point are taken,
    which keeps the trace monotone."""
    k, m, nc = prob.k, prob.m, prob.n_c
    if m < 1:
        return None
    budget = p.sum()
    pd = p[1 + k:1 + k + m].copy()
    # sources: every powered device, plus the shared stream when present;
    # decoding users subtract the shared stream before their private SINR,
    # so draining it never disturbs a user pin, it only frees budget
    sources = [(1 + k + i, (0.6, 0.3, 0.12, 0.05, 0.02))
               for i in range(m) if pd[i] > 1e-9]
    if nc and p[0] > 1e-9:
        sources.append((0, (0.95, 0.6, 0.3, 0.12, 0.05)))
    if len(sources) < 2 and m < 2:
        return None
    best = None
    for src, phis in sources:
        for j in range(m):
            if src == 1 + k + j:
                continue
            for phi in phis:
                cand = p.copy()
                moved = cand[src] * phi
                cand[src] = max(cand[src] - moved, 1e-14)
                cand[1 + k + j] = pd[j] + moved
                cand = _pin_users(prob, cand)
                head = float(cand[0]) if nc else 0.0
                others = cand[1 + k:].sum() - cand[1 + k + j]
                room = budget - cand[1:1 + k].sum() - head - others
                if room <= 0.0:
                    continue
                cand[1 + k + j] = room
                cand = _pin_users(prob, cand)
                if cand.sum() > 1.0 - 1e-12:
                    continue
                hit = _jump_accept(prob, cand,
                                   obj_now if best is None else best[2])
                if hit is not None:
                    best = hit
    return best


def _extrapolate_jump(prob: _Problem, p_prev, p, obj_now):
    """Chase a geometric settling pattern to its limit in one candidate.

    Late rounds often move the device block by a nearly constant-ratio step;
    extending that direction by a range of multipliers, re-pinning the users
    and rescaling to the exact budget gives a handful of cheap candidates
    that are accepted only under the usual strict checks."""
    k, m, nc = prob.k, prob.m, prob.n_c
    if m == 0:
        return None
    budget = p.sum()
    d_dev = p[1 + k:] - p_prev[1 + k:]
    d_p0 = (p[0] - p_prev[0]) if nc else 0.0
    step = max(float(np.abs(d_dev).max()), abs(d_p0))
    if step < 1e-14:
        return None
    best = None
    for mult in (4.0, 16.0, 64.0, 256.0):
        cand = p.copy()
        cand[1 + k:] = np.maximum(p[1 + k:] + mult * d_dev, 1e-14)
        if nc:
            cand[0] = max(p[0] + mult * d_p0, 1e-14)
        ok = True
        for _pass in range(3):
            cand = _pin_users(prob, cand)
            head = float(cand[0]) if nc else 0.0
            room = budget - cand[1:1 + k].sum() - head
            dev_sum = cand[1 + k:].sum()
            if room <= 0.0 or dev_sum <= 0.0:
                ok = False
                break
            cand[1 + k:] *= room / dev_sum
        if not ok:
            continue
        cand = _pin_users(prob, cand)
        if cand.sum() > 1.0 - 1e-12:
            continue
        hit = _jump_accept(prob, cand, obj_now if best is None else best[2])
        if hit is not None:
            best = hit
    return best


def alternating_opt(gains: GainTable, assignment: BeamAssignment,
                    selection: RSSelection, config: SystemConfig) -> AllocationResult:
    """Alternate auxiliary updates and barrier steps until the device sum
    rate settles. Monotone nondecreasing by construction.

    The landscape has one basin per active-device support and the alternation
    crosses basins very slowly, so the start matters more than anything else.
    A candidate's standing-start rate is a poor predictor of where its basin
    tops out; one solver round is a much better one. So the top few starts
    each get a pilot round and the best trajectory is the one continued."""
    prob = _Problem(gains, assignment, selection, config)
    cands = _start_candidates(prob)
    if not cands:
        p, rc = _strictly_feasible_start(prob)
        cands = [(p, rc, float(prob.true_rates(p)[2].sum()))]
    if prob.m == 0:
        p, rc, _ = cands[0]
        return AllocationResult(allocation=prob.to_allocation(p, rc),
                                device_rates=np.zeros(0),
                                objective_trace=(0.0,),
                                converged=True, iterations=0)

    best = None
    for p0, rc0, score0 in cands[:PILOT_WIDTH]:
        p1, rc1, obj1 = _one_round(prob, p0, rc0, score0)
        if best is None or obj1 > best[2]:
            best = (p1, rc1, obj1, score0)
    p, rc, obj, entry = best[0], best[1], best[2], best[3]
    trace = [entry, obj]
    if obj < entry - 1e-8:
        raise NoProgress(f"objective fell from {entry:.9f} to {obj:.9f}")
    converged = abs(obj - entry) <= config.outer_tol
    iters = 1
    jump_wait = 0
    if not converged:
        p_prev = p
        for it in range(2, config.max_iters_alt + 1):
            iters = it
            p_prev, (p, rc, obj) = p, _one_round(prob, p, rc, trace[-1], WARM_T0)
            scanned = False
            if obj - trace[-1] < JUMP_TRIGGER and jump_wait <= 0:
                scanned = True
                jump = _transfer_jump(prob, p, obj)
                if jump is None:
                    jump = _extrapolate_jump(prob, p_prev, p, obj)
                if jump is not None:
                    p, rc, obj = jump
                else:
                    jump_wait = JUMP_COOLDOWN
            else:
                jump_wait -= 1
            if obj < trace[-1] - 1e-8:
                raise NoProgress(
                    f"objective fell from {trace[-1]:.9f} to {obj:.9f}")
            if abs(obj - trace[-1]) <= config.outer_tol and not scanned:
                # about to settle inside a cooldown: scan once more so
                # convergence is never declared with a jump still available
                jump = _transfer_jump(prob, p, obj)
                if jump is None:
                    jump = _extrapolate_jump(prob, p_prev, p, obj)
                if jump is not None:
                    p, rc, obj = jump
                    jump_wait = 0
            delta = obj - trace[-1]
            trace.append(obj)
            if abs(delta) <= config.outer_tol:
                converged = True
                break
    _, priv_rates, dev_rates = prob.true_rates(p)
    return AllocationResult(allocation=prob.to_allocation(p, rc),
                            device_rates=dev_rates,
                            objective_trace=tuple(trace),
                            converged=converged, iterations=iters)
