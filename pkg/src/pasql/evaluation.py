"""Policy evaluation and exhaustive search over deterministic periodic policies.

Convention: the first decision (at the first observation) uses phase 0 of
the evaluated policy.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .agents import AgentStateMachine
from .kernels import pmf_to_cdf
from .models import GenerativePomdp, TabularPomdp
from .policies import TIE_TOL, PeriodicPolicy

ENUM_CAP = 1 << 24
TAIL_TOL = 1e-4


@dataclass(frozen=True, eq=False)
class CrossProductChain:
    """Per-phase reward ``r[l, s, z]`` and kernel ``P[l, (s,z), (s',z')]`` under a fixed policy."""

    r: np.ndarray
    P: np.ndarray
    init: np.ndarray  # law of (s_1, z_1), flattened
    gamma: float

    @property
    def L(self) -> int:
        return self.r.shape[0]


def _check_dims(model, agent, pi):
    if agent.nY != model.nY or agent.nA != model.nA:
        raise ValueError(f"agent is for (nY={agent.nY}, nA={agent.nA}), model has ({model.nY}, {model.nA})")
    if pi.nZ != agent.nZ or pi.nA != model.nA:
        raise ValueError(f"policy is for (nZ={pi.nZ}, nA={pi.nA}), expected ({agent.nZ}, {model.nA})")


def initial_sz(model: TabularPomdp, agent: AgentStateMachine) -> np.ndarray:
    """(nS, nZ) law of (s_1, z_1) with ``z_1 = phi(z0, y_1, a0)`` and ``y_1`` drawn from ``init_obs``."""
    out = np.zeros((model.nS, agent.nZ))
    for y in range(model.nY):
        out[:, agent.first(y)] += model.rho * model.init_obs[:, y]
    return out


def cross_product_chain(model: TabularPomdp, agent: AgentStateMachine, pi: PeriodicPolicy) -> CrossProductChain:
    _check_dims(model, agent, pi)
    nS, nZ = model.nS, agent.nZ
    n = nS * nZ
    onehot = np.eye(nZ)[agent.phi]  # (z, y', a, z')
    # G[s, z, a, s', z'] = sum_{y'} P(s', y' | s, a) 1{z' = phi(z, y', a)}
    G = np.einsum("sapy,zyaw->szapw", model.trans, onehot)
    r = np.einsum("lza,sa->lsz", pi.probs, model.reward)
    P = np.einsum("lza,szapw->lszpw", pi.probs, G).reshape(pi.L, n, n)
    return CrossProductChain(r, P, initial_sz(model, agent).ravel(), model.gamma)


def cross_product_values(cp: CrossProductChain) -> np.ndarray:
    """Value of each (s, z) at phase 0."""
    if not cp.gamma < 1.0:
        raise ValueError(f"exact evaluation needs gamma < 1, got {cp.gamma}")
    L = cp.L
    n = cp.P.shape[1]
    r_tilde = np.zeros(n)
    prod = np.eye(n)
    for k in range(L):
        r_tilde += cp.gamma ** k * (prod @ cp.r[k].ravel())
        prod = prod @ cp.P[k]
    return np.linalg.solve(np.eye(n) - cp.gamma ** L * prod, r_tilde)


def cross_product_eval(model: TabularPomdp, agent: AgentStateMachine, pi: PeriodicPolicy) -> float:
    """Exact discounted return of ``pi`` from the model's initial law."""
    cp = cross_product_chain(model, agent, pi)
    return float(cp.init @ cross_product_values(cp))


def horizon_for(gamma: float, r_max: float, tail_tol: float) -> int:
    """Smallest T with ``gamma**T * r_max / (1 - gamma) < tail_tol``."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"a truncation horizon needs gamma < 1, got {gamma}")
    if r_max == 0 or gamma == 0:
        return 1
    T = max(0, math.ceil(math.log(tail_tol * (1 - gamma) / r_max) / math.log(gamma)))
    while gamma ** T * r_max / (1 - gamma) >= tail_tol:
        T += 1
    return T


def mc_eval(model: TabularPomdp, agent: AgentStateMachine, pi: PeriodicPolicy, horizon: int = None,
            n_rollouts: int = 10_000, seed: int = 0, tail_tol: float = 1e-3, use_numba=None):
    """Monte-Carlo estimate ``(mean, stderr)`` of the discounted return."""
    _check_dims(model, agent, pi)
    if horizon is None:
        horizon = horizon_for(model.gamma, model.r_max, tail_tol)
    rng = np.random.Generator(np.random.Philox(seed))
    trans_cdf = pmf_to_cdf(model.trans.reshape(model.nS, model.nA, -1))
    args = (pmf_to_cdf(model.rho), pmf_to_cdf(model.init_obs), trans_cdf, model.nY,
            np.ascontiguousarray(model.reward), agent.phi, agent.z0, agent.a0, pmf_to_cdf(pi.probs),
            model.gamma, horizon)
    per_chunk = max(1, (1 << 22) // (2 + 2 * horizon))
    rets = []
    for lo in range(0, n_rollouts, per_chunk):
        m = min(per_chunk, n_rollouts - lo)
        rets.append(kernels.mc_returns(rng.random((m, 2 + 2 * horizon)), *args, use_numba=use_numba))
    rets = np.concatenate(rets)
    return float(rets.mean()), float(rets.std(ddof=1) / math.sqrt(len(rets))) if len(rets) > 1 else 0.0


# -------------------------------------------------------- generative environments


@dataclass
class RolloutResult:
    J: float
    returns: list  # one per start state
    arrival_times: list  # time index of the terminal state (initial state is time 1), or None
    horizon: int


def _policy_action(pi_actions, ell, z):
    return int(pi_actions[ell, z])


def rollout_eval_deterministic(env: GenerativePomdp, agent: AgentStateMachine, pi: PeriodicPolicy,
                               tail_tol: float = TAIL_TOL, max_steps: int = 1_000_000) -> RolloutResult:
    """Exact (to ``tail_tol``) return of a deterministic policy, averaged uniformly over start states."""
    if not env.deterministic:
        raise ValueError(f"environment {env.name!r} is stochastic")
    if not pi.deterministic:
        raise ValueError("policy is stochastic")
    if pi.nZ != agent.nZ or pi.nA != env.nA:
        raise ValueError("policy dimensions do not match agent/environment")
    episodic = env.gamma >= 1.0
    T = max_steps if episodic else horizon_for(env.gamma, env.reward_bound, tail_tol)
    acts = pi.actions()
    returns, arrivals = [], []
    for s in env.starts():
        z = agent.first(env.observe(s))
        ret, disc, arrival = 0.0, 1.0, None
        for k in range(T):
            a = _policy_action(acts, k % pi.L, z)
            s, y, r, done = env.step(s, a, None)
            ret += disc * r
            disc *= env.gamma
            z = int(agent.phi[z, y, a])
            if done:
                arrival = k + 2
                break
        else:
            if episodic:
                raise RuntimeError(f"episode did not terminate within {max_steps} steps")
        returns.append(ret)
        arrivals.append(arrival)
    return RolloutResult(float(np.mean(returns)), returns, arrivals, T)


def eval_stochastic_stationary(model: TabularPomdp, p: float) -> float:
    """Return of the memoryless policy playing action 1 w.p. ``p`` in a two-action, one-observation model."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if model.nA != 2:
        raise ValueError("needs a two-action model")
    P = model.state_kernel()
    Pp = (1 - p) * P[:, 0] + p * P[:, 1]
    rp = (1 - p) * model.reward[:, 0] + p * model.reward[:, 1]
    V = np.linalg.solve(np.eye(model.nS) - model.gamma * Pp, rp)
    return float(model.rho @ V)


# -------------------------------------------------------------------- search


def policy_count(nZ: int, nA: int, L: int) -> int:
    return nA ** (nZ * L)


def _check_cap(count: int, cap: int):
    if count > cap:
        raise ValueError(f"refusing to enumerate {count} policies (cap {cap})")


def enumerate_policies(nZ: int, nA: int, L: int, cap: int = ENUM_CAP):
    """All deterministic periodic policies in lexicographic order of their digit codes."""
    _check_cap(policy_count(nZ, nA, L), cap)
    for digits in itertools.product(range(nA), repeat=nZ * L):
        yield PeriodicPolicy.from_actions(np.array(digits).reshape(L, nZ), nA)


@dataclass
class SearchResult:
    J: float
    policy: PeriodicPolicy
    n_policies: int
    values: np.ndarray  # J of every enumerated policy, in enumeration order


def _code_places(nZ: int, nA: int, L: int, free_z: np.ndarray):
    """Place value of digit ``l * nZ + z``; agent states outside ``free_z`` get a place beyond every code."""
    n_free = len(free_z) * L
    place = np.full(L * nZ, nA ** n_free, dtype=np.int64)
    k = n_free - 1
    for ell in range(L):
        for z in free_z:
            place[ell * nZ + z] = nA ** k
            k -= 1
    return place, nA ** n_free


def _code_to_policy(code: int, place, nZ, nA, L) -> PeriodicPolicy:
    acts = (code // place) % nA
    return PeriodicPolicy.from_actions(acts.reshape(L, nZ), nA)


def _argmax_lex(values, tol=TIE_TOL):
    best = values.max()
    return int(np.flatnonzero(values >= best - tol)[0])


def brute_force_best(env, agent: AgentStateMachine, L: int, tail_tol: float = TAIL_TOL,
                     cap: int = ENUM_CAP, chunk: int = 1 << 16, use_numba=None) -> SearchResult:
    """Best deterministic period-``L`` policy.

    Only agent states reachable from ``z0`` carry free digits; the others
    are fixed to action 0.  Ties within ``TIE_TOL`` go to the smallest code.
    """
    nZ, nA = agent.nZ, env.nA
    free_z = agent.reachable()
    place, count = _code_places(nZ, nA, L, free_z)
    _check_cap(count, cap)
    if isinstance(env, TabularPomdp):
        values = np.array([cross_product_eval(env, agent, _code_to_policy(c, place, nZ, nA, L))
                           for c in range(count)])
    elif isinstance(env, GenerativePomdp):
        if not env.deterministic:
            raise ValueError("brute-force search on a generative model needs a deterministic simulator")
        T = horizon_for(env.gamma, env.reward_bound, tail_tol)
        values = np.zeros(count)
        starts = env.starts()
        for lo in range(0, count, chunk):
            codes = np.arange(lo, min(count, lo + chunk), dtype=np.int64)
            for s in starts:
                values[lo:lo + len(codes)] += kernels.deterministic_rollouts(
                    env, codes, s, env.observe(s), agent.phi, agent.z0, agent.a0, place, L, nZ, nA,
                    env.gamma, T, use_numba=use_numba)
        values /= len(starts)
    else:
        raise TypeError(f"unsupported environment type {type(env).__name__}")
    i = _argmax_lex(values)
    return SearchResult(float(values[i]), _code_to_policy(i, place, nZ, nA, L), count, values)
