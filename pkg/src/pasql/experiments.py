"""Experiment orchestration: argument parsing, reproduction checks, multi-seed convergence runs."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import reference as ref
from .agents import AgentStateMachine, load_agent, make_frame_stack, observation_agent
from .chain import JointKernel, augmented_chain, build_joint_kernel, cyclic_stationary, l_step_kernels
from .envs import BUILTIN_ENVS, env_example1, env_example2, env_example3, env_fig4, example3_period3_policy
from .evaluation import brute_force_best, cross_product_eval, eval_stochastic_stationary, rollout_eval_deterministic
from .learner import LearnConfig, LrSchedule, run_pasql
from .models import load_model
from .periodic_dp import induce_periodic_mdp, solve_periodic_q
from .policies import PeriodicPolicy, QTuple, behavior_from_matrix, greedy


def fmt(x, digits=9) -> str:
    return f"{x:.{digits}g}"


# ------------------------------------------------------------------ argument parsing


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        k, _, v = part.partition("=")
        if not _:
            raise ValueError(f"expected key=value, got {part!r}")
        out[k.strip()] = float(v) if any(c in v for c in ".e") else int(v)
    return out


def make_env(spec: str):
    """``name[:k=v,...]`` for a built-in environment, or a path to a model file."""
    name, _, params = spec.partition(":")
    if name in BUILTIN_ENVS:
        return BUILTIN_ENVS[name](**_kv(params))
    if Path(spec).exists():
        return load_model(spec)
    raise ValueError(f"unknown environment {spec!r}; built-ins: {', '.join(BUILTIN_ENVS)}")


def make_agent(spec: str, env) -> AgentStateMachine:
    """``obs`` (agent state = last observation), ``frame:m=2[,actions=0]``, or an agent file."""
    name, _, params = spec.partition(":")
    if name in ("obs", "observation"):
        return observation_agent(env.nY, env.nA)
    if name == "frame":
        kv = _kv(params)
        return make_frame_stack(int(kv.get("m", 1)), env.nY, env.nA, bool(kv.get("actions", 1)))
    if Path(spec).exists():
        return load_agent(spec)
    raise ValueError(f"unknown agent spec {spec!r}")


def parse_behavior(text: str) -> PeriodicPolicy:
    """Named behavior (``mu1``...) or a matrix ``"0.2,0.8;0.8,0.2"`` of mu(action 0 | z), rows z, columns phase."""
    if text in ref.BEHAVIORS:
        return behavior_from_matrix(ref.BEHAVIORS[text])
    rows = [[float(x) for x in row.split(",")] for row in text.split(";")]
    return behavior_from_matrix(rows)


def theoretical_limit(model, agent, mu, tol=1e-10, unchecked=False):
    """(cyclic distribution, periodic MDP, limit QTuple) for a behavior policy."""
    jk = build_joint_kernel(model, agent, mu)
    zeta = cyclic_stationary(jk, unchecked=unchecked)
    pmdp = induce_periodic_mdp(model, agent, zeta)
    return zeta, pmdp, solve_periodic_q(pmdp, tol)


# ------------------------------------------------------------------- repro


@dataclass
class Check:
    name: str
    expected: float
    got: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(abs(self.got - self.expected) <= self.tol)


def repro_jstar():
    env = env_example1()
    agent = observation_agent(2, 2)
    return [Check(f"J*_{L}", exp, brute_force_best(env, agent, L).J, ref.JSTAR_TOL)
            for L, exp in enumerate(ref.JSTAR_EXAMPLE1, start=1)]


def _limit_checks(L, names, expected):
    model = env_fig4(0.01)
    agent = observation_agent(2, 2)
    checks = [Check(f"J*_{L}", expected[0], brute_force_best(model, agent, L).J, ref.FIG4_TOL)]
    for name, exp in zip(names, expected[1:]):
        _, _, q = theoretical_limit(model, agent, parse_behavior(name))
        checks.append(Check(f"J(greedy {name})", exp, cross_product_eval(model, agent, greedy(q)), ref.FIG4_TOL))
    return checks


def repro_periodic():
    return _limit_checks(2, ["mu1", "mu2", "mu3"], ref.PERIODIC_FIG4)


def repro_stationary():
    return _limit_checks(1, ["mubar1", "mubar2", "mubar3"], ref.STATIONARY_FIG4)


def two_state_kernel() -> JointKernel:
    return JointKernel(np.array([ref.TWO_STATE_P0, ref.TWO_STATE_P1]), init=[0.5, 0.5], init_phase=0)


def repro_two_state():
    jk = two_state_kernel()
    zeta = cyclic_stationary(jk)
    checks = [Check(f"zeta^{ell}[{i}]", ref.TWO_STATE_ZETA[ell][i], zeta.zeta[ell, i], ref.ZETA_TOL)
              for ell in range(2) for i in range(2)]
    for ell, K in enumerate(l_step_kernels(jk)):
        err = np.abs(K - np.array(ref.TWO_STATE_LSTEP[ell])).max()
        checks.append(Check(f"L-step kernel {ell} max error", 0.0, err, 1e-15))
    pbar = augmented_chain(jk)
    checks.append(Check("augmented chain max error", 0.0, np.abs(pbar - np.array(ref.TWO_STATE_AUGMENTED)).max(), 0.0))
    blocks = np.zeros((4, 4))
    for ell, K in enumerate(l_step_kernels(jk)):
        blocks[2 * ell:2 * ell + 2, 2 * ell:2 * ell + 2] = K
    checks.append(Check("augmented^L vs blockdiag", 0.0, np.abs(pbar @ pbar - blocks).max(), 1e-12))
    return checks


def example2_sweep(step=0.01):
    model = env_example2()
    ps = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    return ps, np.array([eval_stochastic_stationary(model, p) for p in ps])


def repro_example2():
    ps, js = example2_sweep()
    i = int(np.argmax(js))
    return [
        Check("p*", ref.EXAMPLE2_PSTAR, ps[i], ref.EXAMPLE2_PSTAR_TOL),
        Check("J(p=1)", ref.EXAMPLE2_J_AT_1, js[-1], 0.0),
        Check("J(p*) - max(J(0), J(1)) > 0", 1.0, float(js[i] > max(js[0], js[-1]) + 1e-6), 0.0),
    ]


def repro_example3():
    checks = []
    for n in ref.EXAMPLE3_NS:
        env = env_example3(n)
        pi = PeriodicPolicy.from_actions(example3_period3_policy(), env.nA)
        res = rollout_eval_deterministic(env, observation_agent(env.nY, env.nA), pi)
        for g, (ret, arr) in enumerate(zip(res.returns, res.arrival_times)):
            checks.append(Check(f"n={n} goal{g + 1} return", 1.0, ret, 0.0))
            checks.append(Check(f"n={n} goal{g + 1} arrival", 3 * n + 3 + g, float(arr), 0.0))
    return checks


REPRO = {
    "intro_jstar": repro_jstar,
    "table2": repro_periodic,
    "table3": repro_stationary,
    "appendixB_zeta": repro_two_state,
    "example2_sweep": repro_example2,
    "example3_policy": repro_example3,
}


def write_checks(path, checks):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["check", "expected", "got", "tol", "pass"])
        for c in checks:
            w.writerow([c.name, fmt(c.expected, 12), fmt(c.got, 12), fmt(c.tol), int(c.ok)])


# -------------------------------------------------------------- convergence


@dataclass
class ExperimentConfig:
    env: str = "fig4:p=0.01"
    agent: str = "obs"
    behavior: str = "mu1"
    L: int = 2
    total_steps: int = 1_000_000
    log_every: int = 10_000
    schedule: dict = field(default_factory=lambda: {"kind": "exp", **ref.EXP_SCHEDULE})
    q_init: float = 0.0
    seeds: list = field(default_factory=lambda: list(range(5)))
    unchecked: bool = False

    def __post_init__(self):
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError(f"seeds must be distinct, got {self.seeds}")

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls(**json.loads(Path(path).read_text()))

    def learn_config(self, seed) -> LearnConfig:
        return LearnConfig(self.total_steps, self.L, seed, self.log_every, LrSchedule(**self.schedule),
                           self.q_init, self.unchecked)


def _one_seed(args):
    cfg, seed = args
    env = make_env(cfg.env)
    agent = make_agent(cfg.agent, env)
    return seed, run_pasql(env, agent, parse_behavior(cfg.behavior), cfg.learn_config(seed))


def write_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "phase", "z", "a", "q"])
        for step, qt in trace.snapshots:
            for (ell, z, a), v in np.ndenumerate(qt.q):
                w.writerow([step, ell, z, a, fmt(v)])


def write_qtuple(path, q: QTuple):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "z", "a", "q", "unvisited"])
        for (ell, z, a), v in np.ndenumerate(q.q):
            w.writerow([ell, z, a, fmt(v), int(q.unvisited[ell, z])])


def run_convergence(cfg: ExperimentConfig, out: Path, jobs: int = None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    jobs = jobs or os.cpu_count() or 1
    tasks = [(cfg, s) for s in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_one_seed, tasks))
    else:
        results = [_one_seed(t) for t in tasks]
    results.sort(key=lambda r: r[0])
    for seed, trace in results:
        write_trace(out / f"trace_seed{seed}.csv", trace)
    env = make_env(cfg.env)
    agent = make_agent(cfg.agent, env)
    _, _, limit = theoretical_limit(env, agent, parse_behavior(cfg.behavior), unchecked=cfg.unchecked)
    write_qtuple(out / "limit.csv", limit)
    steps = [s for s, _ in results[0][1].snapshots]
    stack = np.stack([[qt.q for _, qt in trace.snapshots] for _, trace in results])  # (seed, step, l, z, a)
    med = np.median(stack, axis=0)
    q25, q75 = np.percentile(stack, [25, 75], axis=0)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "phase", "z", "a", "median", "q25", "q75", "limit"])
        for i, step in enumerate(steps):
            for (ell, z, a), v in np.ndenumerate(med[i]):
                w.writerow([step, ell, z, a, fmt(v), fmt(q25[i, ell, z, a]), fmt(q75[i, ell, z, a]),
                            fmt(limit.q[ell, z, a])])
    errs = np.abs(stack[:, -1] - limit.q).reshape(len(results), -1).max(axis=1)
    summary = {"config": asdict(cfg), "final_sup_error": {str(s): float(e) for (s, _), e in zip(results, errs)},
               "median_final_sup_error": float(np.median(errs))}
    (out / "convergence.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    return summary
