"""Time the numba and numpy backends of each hot loop on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends run in one process (the ``use_numba`` switch bypasses the
PASQL_BACKEND default) and their outputs are checked for bitwise equality.
"""
import argparse
import time
import warnings

import numpy as np

from pasql import _accel, agents, envs, kernels, learner, policies
from pasql.evaluation import _code_places, horizon_for
from pasql.kernels import pmf_to_cdf
from pasql.reference import BEHAVIORS


def best_of(fn, repeat):
    out, best = None, float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def bench_learner(use_numba, steps):
    model = envs.env_fig4(0.01)
    ag = agents.observation_agent(2, 2)
    mu = policies.behavior_from_matrix(BEHAVIORS["mu1"])
    cfg = learner.LearnConfig(steps, 2, seed=0, schedule=learner.LrSchedule.poly())
    return learner.run_pasql(model, ag, mu, cfg, use_numba=use_numba).final.q


def bench_rollouts(use_numba, L):
    env = envs.env_example1()
    phi = agents.observation_agent(2, 2).phi
    place, count = _code_places(2, 2, L, np.arange(2))
    codes = np.arange(count, dtype=np.int64)
    T = horizon_for(0.9, 1.0, 1e-4)
    return kernels.deterministic_rollouts(env, codes, 1, env.observe(1), phi, 0, 0, place, L, 2, 2, 0.9, T,
                                          use_numba=use_numba)


def bench_mc(use_numba, n):
    model = envs.env_fig4(0.01)
    ag = agents.observation_agent(2, 2)
    pi = policies.PeriodicPolicy.from_digits("1001", 2, 2, 2)
    h = horizon_for(0.9, 1.0, 1e-3)
    u = np.random.Generator(np.random.Philox(0)).random((n, 2 + 2 * h))
    return kernels.mc_returns(u, pmf_to_cdf(model.rho), pmf_to_cdf(model.init_obs),
                              pmf_to_cdf(model.trans.reshape(6, 2, -1)), 2, np.ascontiguousarray(model.reward),
                              ag.phi, 0, 0, pmf_to_cdf(pi.probs), 0.9, h, use_numba=use_numba)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")
    warnings.simplefilter("ignore")
    cases = [
        ("learner, 50k steps", bench_learner, 50_000),
        ("rollouts, L=8 (65536 policies)", bench_rollouts, 8),
        ("monte carlo, 5000 rollouts", bench_mc, 5_000),
    ]
    print(f"{'kernel':34s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s}  identical")
    for name, fn, arg in cases:
        fn(True, arg)  # compile, or load from the cache
        t_nb, out_nb = best_of(lambda: fn(True, arg), args.repeat)
        t_np, out_np = best_of(lambda: fn(False, arg), args.repeat)
        print(f"{name:34s} {t_nb:9.4f}s {t_np:9.4f}s {t_np / t_nb:7.1f}x  {np.array_equal(out_nb, out_np)}")


if __name__ == "__main__":
    main()
