"""Compare the JIT kernels against the plain-python fallback.

Times the two hot entry points (the barrier solve and the auxiliary /
surrogate evaluations) on one representative allocation problem. Each
backend runs in a fresh subprocess so module import state cannot leak;
the python fallback gets proportionally fewer calls because it is orders
of magnitude slower, and both backends are checked for agreement on the
solution they return.

Usage: python3 benchmarks/bench_backends.py [--config PATH]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
import flexrs
from flexrs import _kernels
from flexrs.allocator import _Problem, _start_candidates, BARRIER_T0, \
    BARRIER_MU, NEWTON_TOL, MAX_NEWTON
from flexrs.harness import _draw_scenario
from flexrs.precoding import gain_tables
from flexrs.scheduling import abs_schedule
from flexrs.rates import RSSelection

cfg_path = sys.argv[1]
cfg = flexrs.load_config(cfg_path) if cfg_path != "-" else flexrs.reference_config()

scen, pre = _draw_scenario(cfg, 0)
gains = gain_tables(scen.user_channels, scen.device_channels, pre)
assign, _, _ = abs_schedule(gains.device_gain[1:, :], cfg.abs_tolerance,
                            cfg.max_iters_abs)
prob = _Problem(gains, assign, RSSelection.all_ones(cfg.n_users), cfg)
p0, rc0, _ = _start_candidates(prob)[0]
y = prob.aux(p0)
x0 = prob.pack(p0, rc0)

def one_solve():
    return _kernels.solve_barrier(
        x0, 0, prob.p_base, prob.free_idx, prob.inv_free,
        prob.a, prob.own, prob.w, y,
        prob.n_c, prob.k, prob.m, prob.s_arr, prob.sel_pos, prob.r_th,
        1.0, 1.0, BARRIER_T0, BARRIER_MU, cfg.inner_tol, NEWTON_TOL,
        MAX_NEWTON)

x_ref, _ = one_solve()          # warmup; JIT compiles here

reps = 200 if _kernels.BACKEND == "numba" else 2
t0 = time.perf_counter()
for _ in range(reps):
    one_solve()
solve_s = (time.perf_counter() - t0) / reps

reps_aux = 20000 if _kernels.BACKEND == "numba" else 200
t0 = time.perf_counter()
for _ in range(reps_aux):
    _kernels.aux_values(p0, prob.a, prob.own, prob.w, 1.0)
    _kernels.surrogate_f(p0, y, prob.a, prob.own, prob.w, 1.0)
aux_s = (time.perf_counter() - t0) / reps_aux

print(json.dumps({"backend": _kernels.BACKEND, "solve_s": solve_s,
                  "aux_s": aux_s, "x_sum": float(np.sum(x_ref))}))
"""


def run_backend(backend: str, cfg_path: str) -> dict:
    env = dict(os.environ, FLEXRS_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", WORKER, cfg_path],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default="-",
                    help="config JSON path (default: built-in full-scale)")
    args = ap.parse_args()

    nb, np_ = (run_backend(b, args.config) for b in ("numba", "numpy"))
    if abs(nb["x_sum"] - np_["x_sum"]) > 1e-9 * max(1.0, abs(nb["x_sum"])):
        print("WARNING: backends disagree on the barrier solution:",
              nb["x_sum"], "vs", np_["x_sum"])

    print(f"{'kernel':<22} {'numba s/call':>14} {'numpy s/call':>14} {'speedup':>9}")
    for label, key in (("barrier solve", "solve_s"),
                       ("aux + surrogate eval", "aux_s")):
        print(f"{label:<22} {nb[key]:>14.6f} {np_[key]:>14.6f} "
              f"{np_[key] / nb[key]:>8.0f}x")


if __name__ == "__main__":
    main()
