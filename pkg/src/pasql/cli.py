"""Command-line interface: ``pasql <command> [options]``.

Exit codes: 0 success, 1 computation error or failed check, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments as ex
from .bound import compute_eps_delta, finite_horizon_optimum, suboptimality_bound
from .chain import build_joint_kernel, check_assumption2, cyclic_stationary
from .evaluation import brute_force_best, cross_product_eval, mc_eval, rollout_eval_deterministic
from .learner import LearnConfig, LrSchedule, run_pasql
from .models import GenerativePomdp, TabularPomdp, check_model
from .periodic_dp import induce_periodic_mdp, solve_periodic_q
from .policies import PeriodicPolicy, greedy, load_policy, save_policy


class UsageError(Exception):
    pass


def _out(args) -> Path:
    out = Path(args.out or os.environ.get("PASQL_OUT", "pasql_out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _seeds(args, default):
    if not args.seed_list:
        return default
    return [int(s) for s in args.seed_list.split(",")]


def _env_agent(args):
    env = ex.make_env(args.env)
    return env, ex.make_agent(args.agent, env)


def _tabular(env) -> TabularPomdp:
    if not isinstance(env, TabularPomdp):
        raise UsageError(f"this command needs a tabular model, {env.name!r} is simulator-only")
    return check_model(env)


def _policy(args, agent, nA) -> PeriodicPolicy:
    if args.policy:
        return load_policy(args.policy)
    if args.actions:
        return PeriodicPolicy.from_digits(args.actions, args.L, agent.nZ, nA)
    raise UsageError("give --policy FILE or --actions DIGITS")


def _schedule(args) -> LrSchedule:
    if args.schedule == "exp":
        return LrSchedule.exponential(args.lr_start, args.lr_end, args.lr_horizon or args.steps)
    if args.schedule == "poly":
        return LrSchedule.poly(args.lr_c, args.omega)
    return LrSchedule.constant(args.alpha)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# ----------------------------------------------------------------- commands


def cmd_learn(args):
    env, agent = _env_agent(args)
    mu = ex.parse_behavior(args.behavior)
    seeds = _seeds(args, [args.seed])
    out = _out(args)
    for seed in seeds:
        cfg = LearnConfig(args.steps, mu.L, seed, args.log_every, _schedule(args), args.q_init, args.unchecked)
        trace = run_pasql(env, agent, mu, cfg)
        ex.write_trace(out / f"trace_seed{seed}.csv", trace)
        meta = dict(trace.metadata, behavior=mu.probs.tolist())
        (out / f"trace_seed{seed}.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
        print(f"seed {seed}: final Q (phase, z, a)")
        for (ell, z, a), v in np.ndenumerate(trace.final.q):
            print(f"  {ell} {z} {a} {ex.fmt(v)}")
    return 0


def cmd_eval(args):
    env, agent = _env_agent(args)
    pi = _policy(args, agent, env.nA)
    if args.method == "rollout" or isinstance(env, GenerativePomdp):
        res = rollout_eval_deterministic(env, agent, pi, args.tail_tol)
        J, extra = res.J, ""
    elif args.method == "mc":
        J, se = mc_eval(_tabular(env), agent, pi, n_rollouts=args.rollouts, seed=_seeds(args, [0])[0])
        extra = f" (stderr {ex.fmt(se)})"
    else:
        J, extra = cross_product_eval(_tabular(env), agent, pi), ""
    code = pi.digits() if pi.deterministic else "stochastic"
    _write_rows(_out(args) / "eval.csv", ["policy", "J"], [[code, ex.fmt(J)]])
    print(f"J = {ex.fmt(J)}{extra}")
    return 0


def cmd_search(args):
    env, agent = _env_agent(args)
    res = brute_force_best(env, agent, args.L, args.tail_tol)
    out = _out(args)
    _write_rows(out / "search.csv", ["L", "policy", "J", "n_policies"],
                [[args.L, res.policy.digits(), ex.fmt(res.J), res.n_policies]])
    save_policy(res.policy, out / "best_policy.json", meta={"J": res.J, "tie_break": "smallest code"})
    print(f"J*_{args.L} = {ex.fmt(res.J)}  policy {res.policy.digits()}  ({res.n_policies} policies)")
    return 0


def cmd_limit(args):
    env, agent = _env_agent(args)
    model = _tabular(env)
    mu = ex.parse_behavior(args.behavior)
    _, _, q = ex.theoretical_limit(model, agent, mu, args.tol or 1e-10, args.unchecked)
    pi = greedy(q)
    out = _out(args)
    ex.write_qtuple(out / "limit.csv", q)
    save_policy(pi, out / "greedy_policy.json", meta={"tie_break": "lowest action index", "tie_tol": 1e-9})
    if q.unvisited.any():
        print("warning: some (phase, z) have zero limiting probability; their rows are filled uniformly",
              file=sys.stderr)
    print(f"greedy policy {pi.digits()}  J = {ex.fmt(cross_product_eval(model, agent, pi))}")
    return 0


def cmd_bound(args):
    env, agent = _env_agent(args)
    model = _tabular(env)
    mu = ex.parse_behavior(args.behavior)
    _, pmdp, q = ex.theoretical_limit(model, agent, mu, args.tol or 1e-10, args.unchecked)
    eps, delta = compute_eps_delta(model, agent, pmdp, args.H)
    rep = suboptimality_bound(eps, delta, q, model.gamma, mu.L, args.H)
    rows = [[ell, ex.fmt(eps[ell]), ex.fmt(delta[ell]), ex.fmt(rep.span[ell]), ex.fmt(rep.bound)]
            for ell in range(mu.L)]
    _write_rows(_out(args) / "bound.csv", ["phase", "eps", "delta", "span", "bound"], rows)
    J = cross_product_eval(model, agent, greedy(q))
    Jh = finite_horizon_optimum(model, agent, args.H)
    tail = model.gamma ** args.H * model.r_max / (1 - model.gamma)
    print(f"bound = {ex.fmt(rep.bound)} (depth {args.H}; {rep.notes[0]})")
    print(f"J(greedy) = {ex.fmt(J)}; depth-{args.H} optimum = {ex.fmt(Jh)}; tail allowance = {ex.fmt(tail)}")
    return 0


def cmd_chain(args):
    env, agent = _env_agent(args)
    model = _tabular(env)
    mu = ex.parse_behavior(args.behavior)
    jk = build_joint_kernel(model, agent, mu)
    zeta = cyclic_stationary(jk, unchecked=args.unchecked)
    rep = check_assumption2(jk, agent, zeta)
    rows = []
    for ell in range(zeta.L):
        for (s, y, z, a), p in np.ndenumerate(zeta.joint(ell)):
            if p > 0:
                rows.append([ell, s, y, z, a, ex.fmt(p, 12)])
    _write_rows(_out(args) / "chain.csv", ["phase", "s", "y", "z", "a", "prob"], rows)
    print(rep.summary())
    print("assumption check:", "pass" if rep.ok else "FAIL")
    return 0 if rep.ok or args.unchecked else 1


def cmd_convergence(args):
    if args.config:
        cfg = ex.ExperimentConfig.from_file(args.config)
    else:
        sched = {"kind": args.schedule}
        if args.schedule == "exp":
            sched.update(start=args.lr_start, end=args.lr_end, horizon=args.lr_horizon or args.steps)
        elif args.schedule == "poly":
            sched.update(c=args.lr_c, omega=args.omega)
        else:
            sched.update(alpha=args.alpha)
        cfg = ex.ExperimentConfig(args.env, args.agent, args.behavior, ex.parse_behavior(args.behavior).L,
                                  args.steps, args.log_every, sched, args.q_init,
                                  _seeds(args, list(range(5))), args.unchecked)
    summary = ex.run_convergence(cfg, _out(args), args.jobs)
    print(f"median final sup-norm error vs limit: {ex.fmt(summary['median_final_sup_error'])}")
    return 0


def cmd_repro(args):
    out = _out(args)
    names = list(ex.REPRO) if args.table == "all" else [args.table]
    ok = True
    for name in names:
        checks = ex.REPRO[name]()
        ex.write_checks(out / f"repro_{name}.csv", checks)
        for c in checks:
            status = "pass" if c.ok else "FAIL"
            print(f"{name:16s} {c.name:34s} expected {ex.fmt(c.expected):>12s} got {ex.fmt(c.got):>12s} {status}")
        ok &= all(c.ok for c in checks)
    return 0 if ok else 1


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (default $PASQL_OUT or ./pasql_out)")
    common.add_argument("--seed-list", help="comma-separated seeds")
    common.add_argument("--tol", type=float, help="DP tolerance (default 1e-10)")
    common.add_argument("--unchecked", action="store_true", help="run despite failed assumption checks")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--env", default="fig4:p=0.01", help="built-in name[:k=v,...] or model file")
    model.add_argument("--agent", default="obs", help="obs, frame:m=M[,actions=0|1], or agent file")

    behave = argparse.ArgumentParser(add_help=False)
    behave.add_argument("--behavior", default="mu1", help="mu1..mu3, mubar1..mubar3, or 'p,p;p,p' matrix")

    learn = argparse.ArgumentParser(add_help=False)
    learn.add_argument("--steps", type=int, default=1_000_000)
    learn.add_argument("--log-every", type=int, default=0)
    learn.add_argument("--schedule", choices=["exp", "poly", "const"], default="exp")
    learn.add_argument("--lr-start", type=float, default=1e-3)
    learn.add_argument("--lr-end", type=float, default=1e-5)
    learn.add_argument("--lr-horizon", type=float, default=None)
    learn.add_argument("--lr-c", type=float, default=1.0)
    learn.add_argument("--omega", type=float, default=0.85)
    learn.add_argument("--alpha", type=float, default=0.1)
    learn.add_argument("--q-init", type=float, default=0.0)

    p = argparse.ArgumentParser(prog="pasql", description="Periodic agent-state Q-learning laboratory.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("learn", parents=[common, model, behave, learn], help="run the learner")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_learn)

    s = sub.add_parser("eval", parents=[common, model], help="evaluate a policy")
    s.add_argument("--policy", help="policy file")
    s.add_argument("--actions", help="deterministic policy as a digit string (phase-major)")
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--method", choices=["exact", "mc", "rollout"], default="exact")
    s.add_argument("--rollouts", type=int, default=10_000)
    s.add_argument("--tail-tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("search", parents=[common, model], help="brute-force the best periodic policy")
    s.add_argument("--L", type=int, default=1)
    s.add_argument("--tail-tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("limit", parents=[common, model, behave], help="theoretical limit and its greedy policy")
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("bound", parents=[common, model, behave], help="truncated sub-optimality bound")
    s.add_argument("--H", type=int, default=8, help="history depth")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("chain", parents=[common, model, behave], help="cyclic limiting distribution")
    s.set_defaults(func=cmd_chain)

    s = sub.add_parser("convergence", parents=[common, model, behave, learn], help="multi-seed learning runs")
    s.add_argument("--config", help="experiment config file (JSON)")
    s.add_argument("--jobs", type=int, default=None, help="worker processes (default: all cores)")
    s.set_defaults(func=cmd_convergence)

    s = sub.add_parser("repro", parents=[common], help="regenerate published numbers")
    s.add_argument("table", choices=["all", *ex.REPRO])
    s.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    warnings.simplefilter("default")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"pasql: error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as e:
        print(f"pasql: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
