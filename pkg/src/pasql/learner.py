"""Online tabular (periodic) agent-state Q-learning."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _accel, kernels
from .agents import AgentStateMachine
from .kernels import LR_CONST, LR_EXP, LR_POLY, pmf_to_cdf
from .models import GenerativePomdp, TabularPomdp
from .policies import PeriodicPolicy, QTuple

CHUNK = 1 << 16


class AssumptionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LrSchedule:
    """Learning-rate schedule.

    ``poly``: ``c / n**omega`` with ``n`` the visit count of the updated cell.
    ``exp``: ``start * (end / start) ** (t / horizon)``.
    ``const``: ``alpha``.
    """

    kind: str = "poly"
    c: float = 1.0
    omega: float = 0.85
    start: float = 1e-3
    end: float = 1e-5
    horizon: float = 1e6
    alpha: float = 0.1

    @classmethod
    def poly(cls, c=1.0, omega=0.85):
        return cls("poly", c=c, omega=omega)

    @classmethod
    def exponential(cls, start=1e-3, end=1e-5, horizon=1e6):
        return cls("exp", start=start, end=end, horizon=horizon)

    @classmethod
    def constant(cls, alpha):
        return cls("const", alpha=alpha)

    def check(self, unchecked: bool = False) -> None:
        if self.kind == "poly":
            if self.c <= 0:
                raise ValueError(f"c must be positive, got {self.c}")
            if not 0.5 < self.omega <= 1.0 and not unchecked:
                raise ValueError(f"omega={self.omega} outside (0.5, 1]: the step sizes are not square-summable "
                                 "or not divergent; pass unchecked=True to run anyway")
        elif self.kind == "exp":
            if self.start <= 0 or self.end <= 0 or self.horizon <= 0:
                raise ValueError("exponential schedule needs positive start, end and horizon")
            warnings.warn("the exponential schedule has summable step sizes; convergence to the "
                          "theoretical limit is not guaranteed", AssumptionWarning, stacklevel=3)
        elif self.kind == "const":
            if not 0 < self.alpha <= 1:
                raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
            if not unchecked:
                warnings.warn("a constant step size is not square-summable", AssumptionWarning, stacklevel=3)
        else:
            raise ValueError(f"unknown schedule kind {self.kind!r}")

    def kernel_params(self):
        if self.kind == "poly":
            return LR_POLY, float(self.c), float(self.omega), 1.0
        if self.kind == "exp":
            return LR_EXP, float(self.start), float(self.end / self.start), float(self.horizon)
        return LR_CONST, float(self.alpha), 0.0, 1.0


def lr_value(schedule: LrSchedule, t: int, visit_count: int) -> float:
    """Step size at time ``t`` (>= 1) for a cell on its ``visit_count``-th visit."""
    if t < 1:
        raise ValueError("t starts at 1")
    kind, p0, p1, p2 = schedule.kernel_params()
    if kind == LR_POLY:
        if visit_count < 1:
            raise ValueError("visit_count starts at 1")
        return p0 / np.int64(visit_count) ** p1
    if kind == LR_EXP:
        return p0 * p1 ** (t / p2)
    return p0


@dataclass(frozen=True)
class LearnConfig:
    total_steps: int
    L: int = 1
    seed: int = 0
    log_every: int = 0  # 0: only the final snapshot
    schedule: LrSchedule = field(default_factory=LrSchedule)
    q_init: float = 0.0
    unchecked: bool = False

    def __post_init__(self):
        if self.total_steps < 1:
            raise ValueError("total_steps must be >= 1")
        if self.L < 1:
            raise ValueError("L must be >= 1")
        if self.log_every < 0:
            raise ValueError("log_every must be >= 0")


@dataclass
class QTrace:
    snapshots: list  # [(step, QTuple)], strictly increasing steps
    final: QTuple
    visits: np.ndarray
    metadata: dict


def _snapshot_steps(cfg: LearnConfig):
    every = cfg.log_every or cfg.total_steps
    steps = list(range(every, cfg.total_steps + 1, every))
    if not steps or steps[-1] != cfg.total_steps:
        steps.append(cfg.total_steps)
    return steps


def _streams(seed: int):
    env_ss, pol_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.Philox(env_ss)), np.random.Generator(np.random.Philox(pol_ss))


def run_pasql(env, agent: AgentStateMachine, mu: PeriodicPolicy, cfg: LearnConfig, use_numba=None) -> QTrace:
    """One continuing trajectory of PASQL; time starts at 1 and step ``t`` updates phase ``t mod L``."""
    if mu.L != cfg.L:
        raise ValueError(f"behavior policy has period {mu.L}, config has L={cfg.L}")
    if mu.nZ != agent.nZ or mu.nA != agent.nA or agent.nY != env.nY or agent.nA != env.nA:
        raise ValueError("environment, agent and behavior policy dimensions disagree")
    if not env.gamma < 1.0:
        raise ValueError(f"learning needs gamma < 1, got {env.gamma}")
    cfg.schedule.check(cfg.unchecked)
    L, nZ, nA = cfg.L, agent.nZ, agent.nA
    q = np.full((L, nZ, nA), float(cfg.q_init))
    visits = np.zeros((L, nZ, nA), dtype=np.int64)
    env_rng, pol_rng = _streams(cfg.seed)
    mu_cdf = pmf_to_cdf(mu.probs)
    lr = cfg.schedule.kernel_params()
    snaps = []

    if isinstance(env, TabularPomdp):
        s = int(kernels._draw(pmf_to_cdf(env.rho), env_rng.random()))
        y = int(kernels._draw(pmf_to_cdf(env.init_obs[s]), env_rng.random()))
        trans_cdf = pmf_to_cdf(env.trans.reshape(env.nS, nA, -1))
        reward = np.ascontiguousarray(env.reward)

        def advance(t, n, s, z):
            u_act = pol_rng.random(n)
            u_env = env_rng.random(n)
            return kernels.pasql_steps(q, visits, t, n, s, z, env.gamma, reward, trans_cdf, env.nY,
                                       agent.phi, mu_cdf, u_act, u_env, *lr, use_numba=use_numba)
    elif isinstance(env, GenerativePomdp):
        starts = env.starts()
        s = starts[int(env_rng.integers(len(starts)))]
        y = env.observe(s)

        def advance(t, n, s, z):
            return _generative_steps(env, agent, q, visits, t, n, s, z, mu_cdf, pol_rng, env_rng, lr)
    else:
        raise TypeError(f"unsupported environment type {type(env).__name__}")

    z = agent.first(y)
    t = 1
    for target in _snapshot_steps(cfg):
        while t <= target:
            n = min(CHUNK, target - t + 1)
            s, z = advance(t, n, s, z)
            t += n
        snaps.append((target, QTuple(q.copy())))
    meta = {
        "algorithm": "pasql" if L > 1 else "asql",
        "env": getattr(env, "name", "model"),
        "agent": agent.name,
        "z0": agent.z0,
        "a0": agent.a0,
        "time_origin": 1,
        "phase_of_t": "t mod L",
        "rng": "numpy Philox; SeedSequence(seed).spawn(2) -> (env, policy)",
        "backend": _accel.backend_name() if use_numba is None else ("numba" if use_numba else "numpy"),
        **{k: v for k, v in asdict(cfg).items() if k != "schedule"},
        "schedule": asdict(cfg.schedule),
    }
    return QTrace(snaps, snaps[-1][1], visits, meta)


def run_asql(env, agent, mu_stationary: PeriodicPolicy, cfg: LearnConfig, use_numba=None) -> QTrace:
    if mu_stationary.L != 1 or cfg.L != 1:
        raise ValueError("ASQL needs a stationary behavior policy and L=1")
    return run_pasql(env, agent, mu_stationary, cfg, use_numba)


def _generative_steps(env, agent, q, visits, t0, n, s, z, mu_cdf, pol_rng, env_rng, lr):
    """Python loop for simulator-only environments; restarts episodes without resetting the phase."""
    kind, p0, p1, p2 = lr
    L, _, nA = q.shape
    u_act = pol_rng.random(n)
    starts = env.starts()
    phi = agent.phi
    for i in range(n):
        t = t0 + i
        ell = t % L
        a = kernels._draw(mu_cdf[ell, z], u_act[i])
        s2, y2, r, done = env.step(s, a, env_rng)
        z2 = phi[z, y2, a]
        nxt = (ell + 1) % L
        best = 0.0 if done else q[nxt, z2].max()
        visits[ell, z, a] += 1
        if kind == LR_POLY:
            alpha = p0 / visits[ell, z, a] ** p1
        elif kind == LR_EXP:
            alpha = p0 * p1 ** (t / p2)
        else:
            alpha = p0
        q[ell, z, a] += alpha * (r + env.gamma * best - q[ell, z, a])
        if done:
            s2 = starts[int(env_rng.integers(len(starts)))]
            z2 = agent.first(env.observe(s2))
        s, z = s2, z2
    return s, z
