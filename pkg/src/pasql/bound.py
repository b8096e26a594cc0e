"""Truncated history-tree estimates of the approximation errors and the resulting
sub-optimality bound for the greedy policy of a PASQL limit.

History depth ``tau`` (1-based) is evaluated at phase ``(tau - 1) mod L``,
matching the evaluation convention that the first decision uses phase 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .agents import AgentStateMachine
from .models import TabularPomdp
from .periodic_dp import PeriodicMdp
from .policies import QTuple

NODE_CAP = 1_000_000
DEFAULT_DEPTH = 8
_KEY_DECIMALS = 12


@dataclass(frozen=True)
class IpmSpec:
    """Total-variation IPM: functions with span at most one."""

    variant: str = "total_variation"

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Row-wise ``sup_{span f <= 1} |p f - q f|``, i.e. half the L1 distance."""
        return 0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum(axis=-1)

    def rho(self, v: np.ndarray) -> float:
        """Minkowski functional of the class: the span."""
        return float(np.max(v) - np.min(v))


TV = IpmSpec()


@dataclass
class HistoryLevel:
    """All distinct (belief, z) pairs at one depth; ``prob`` is the summed path probability."""

    depth: int
    belief: np.ndarray  # (N, nS)
    z: np.ndarray  # (N,)
    prob: np.ndarray  # (N,)


def _dedupe(belief, z, prob):
    key = np.concatenate([np.round(belief, _KEY_DECIMALS), z[:, None]], axis=1)
    _, first, inv = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    merged = np.zeros(len(first))
    np.add.at(merged, inv, prob)
    return belief[first], z[first], merged, inv


def root_level(model: TabularPomdp, agent: AgentStateMachine) -> HistoryLevel:
    joint = model.rho[:, None] * model.init_obs  # (s, y1)
    py = joint.sum(axis=0)
    ys = np.flatnonzero(py > 0)
    belief = (joint[:, ys] / py[ys]).T
    z = np.array([agent.first(y) for y in ys], dtype=np.int64)
    b, zz, p, _ = _dedupe(belief, z, py[ys])
    return HistoryLevel(1, b, zz, p)


def _children(model, agent, lvl: HistoryLevel, a: int):
    """Successor beliefs after action ``a`` for every node; returns (parent, y', belief', z', prob')."""
    nS, nY = model.nS, model.nY
    joint = np.einsum("ns,spy->npy", lvl.belief, model.trans[:, a])  # (N, s', y')
    py = joint.sum(axis=1)  # (N, y')
    parent, ys = np.nonzero(py > 0)
    belief = joint[parent, :, ys] / py[parent, ys][:, None]
    z = agent.phi[lvl.z[parent], ys, a]
    return parent, ys, belief, z, lvl.prob[parent] * py[parent, ys]


def expand(model: TabularPomdp, agent: AgentStateMachine, lvl: HistoryLevel, node_cap: int = NODE_CAP):
    """Next depth over all actions and observations, plus the child index of each (node, action, y')."""
    parts = [_children(model, agent, lvl, a) for a in range(model.nA)]
    belief = np.concatenate([p[2] for p in parts])
    z = np.concatenate([p[3] for p in parts])
    prob = np.concatenate([p[4] for p in parts])
    if len(z) > node_cap:
        raise ValueError(f"history tree exceeds node cap ({len(z)} > {node_cap}); lower the depth")
    b, zz, pr, inv = _dedupe(belief, z, prob)
    links = []
    off = 0
    for a, p in enumerate(parts):
        links.append((p[0], p[1], inv[off:off + len(p[0])]))
        off += len(p[0])
    return HistoryLevel(lvl.depth + 1, b, zz, pr), links


def compute_eps_delta(model: TabularPomdp, agent: AgentStateMachine, pmdp: PeriodicMdp,
                      H: int = DEFAULT_DEPTH, ipm: IpmSpec = TV, node_cap: int = NODE_CAP):
    """Per-phase maxima over reachable histories of depth 1..H of the reward and
    agent-state-transition mismatches.  These are truncated (lower) estimates of the sups."""
    if H < 1:
        raise ValueError("depth must be >= 1")
    L, nZ = pmdp.L, agent.nZ
    onehot = np.eye(nZ)[agent.phi]  # (z, y', a, z')
    obs = model.obs_kernel()  # (s, a, y')
    eps = np.zeros(L)
    delta = np.zeros(L)
    lvl = root_level(model, agent)
    for depth in range(1, H + 1):
        ell = (depth - 1) % L
        er = np.abs(lvl.belief @ model.reward - pmdp.r[ell, lvl.z])  # (N, a)
        py = np.einsum("ns,say->nay", lvl.belief, obs)
        pz = np.einsum("nay,nyaw->naw", py, onehot[lvl.z])
        dz = ipm.distance(pz, pmdp.P[ell, lvl.z])
        eps[ell] = max(eps[ell], float(er.max()))
        delta[ell] = max(delta[ell], float(dz.max()))
        if depth < H:
            lvl, _ = expand(model, agent, lvl, node_cap)
    return eps, delta


def finite_horizon_optimum(model: TabularPomdp, agent: AgentStateMachine, H: int, node_cap: int = NODE_CAP) -> float:
    """Optimal expected discounted reward over the first ``H`` decisions, any history-dependent policy."""
    levels = [root_level(model, agent)]
    links = []
    for _ in range(H - 1):
        nxt, lk = expand(model, agent, levels[-1], node_cap)
        levels.append(nxt)
        links.append(lk)
    v = np.zeros(len(levels[-1].z))
    obs = model.obs_kernel()
    for d in range(H - 1, -1, -1):
        lvl = levels[d]
        q = lvl.belief @ model.reward  # (N, a)
        if d < H - 1:
            for a, (parent, ys, child) in enumerate(links[d]):
                py = np.einsum("ns,sy->ny", lvl.belief, obs[:, a])
                np.add.at(q[:, a], parent, model.gamma * py[parent, ys] * v[child])
        v = q.max(axis=1)
    root = levels[0]
    return float(root.prob @ v)


@dataclass
class BoundReport:
    eps: np.ndarray
    delta: np.ndarray
    span: np.ndarray
    depth: int
    gamma: float
    L: int
    bound: float
    notes: list = field(default_factory=lambda: [
        "eps/delta are maxima over reachable histories up to the truncation depth: "
        "lower estimates of the suprema, so the bound is a heuristic, not a certificate"])


def suboptimality_bound(eps, delta, qtuple: QTuple, gamma: float, L: int, depth: int = 0,
                        ipm: IpmSpec = TV) -> BoundReport:
    eps = np.asarray(eps, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if qtuple.L != L or len(eps) != L or len(delta) != L:
        raise ValueError(f"period mismatch: L={L}, Q has {qtuple.L}, eps {len(eps)}, delta {len(delta)}")
    v = qtuple.values()
    span = np.array([ipm.rho(v[ell]) for ell in range(L)])
    total = sum(gamma ** ell * (eps[ell] + gamma * delta[ell] * span[(ell + 1) % L]) for ell in range(L))
    return BoundReport(eps, delta, span, depth, gamma, L, float(2.0 / (1.0 - gamma ** L) * total))
