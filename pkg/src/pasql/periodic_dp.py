"""The periodic MDP induced by a cyclic limit, and its cyclic dynamic program."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import AgentStateMachine
from .chain import CyclicDistribution
from .models import TabularPomdp
from .policies import QTuple

DP_TOL = 1e-10
MAX_ITERS = 1_000_000


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PeriodicMdp:
    """``r[l, z, a]`` and ``P[l, z, a, z']``; ``unvisited[l, z]`` marks rows filled uniformly."""

    r: np.ndarray
    P: np.ndarray
    gamma: float
    unvisited: np.ndarray = None

    def __post_init__(self):
        if self.unvisited is None:
            object.__setattr__(self, "unvisited", np.zeros(self.r.shape[:2], bool))

    @property
    def L(self) -> int:
        return self.r.shape[0]

    @property
    def nZ(self) -> int:
        return self.r.shape[1]

    @property
    def nA(self) -> int:
        return self.r.shape[2]


def induce_periodic_mdp(model: TabularPomdp, agent: AgentStateMachine, zeta: CyclicDistribution) -> PeriodicMdp:
    L, nZ, nA = zeta.L, agent.nZ, model.nA
    obs = model.obs_kernel()  # (s, a, y')
    # F[s, z, a, z'] = sum_{y'} P(y'|s,a) 1{z' = phi(z, y', a)}
    F = np.einsum("say,zyaw->szaw", obs, np.eye(nZ)[agent.phi])
    r = np.empty((L, nZ, nA))
    P = np.empty((L, nZ, nA, nZ))
    unvisited = np.zeros((L, nZ), bool)
    for ell in range(L):
        cond = zeta.s_given_z(ell)  # (z, s)
        missing = zeta.z(ell) <= 0
        r[ell] = cond @ model.reward
        P[ell] = np.einsum("zs,szaw->zaw", cond, F)
        r[ell, missing] = 0.0
        P[ell, missing] = 1.0 / nZ
        unvisited[ell] = missing
    return PeriodicMdp(r, P, model.gamma, unvisited)


def bellman(pmdp: PeriodicMdp, q: np.ndarray) -> np.ndarray:
    """One synchronous application of the periodic DP operator."""
    v = q.max(axis=2)
    nxt = np.roll(v, -1, axis=0)  # nxt[l] = V^{l+1}
    return pmdp.r + pmdp.gamma * np.einsum("lzaw,lw->lza", pmdp.P, nxt)


def sweep(pmdp: PeriodicMdp, q: np.ndarray) -> np.ndarray:
    """One Gauss-Seidel round in place, phases L-1 down to 0; returns ``q``."""
    L = pmdp.L
    for ell in range(L - 1, -1, -1):
        v = q[(ell + 1) % L].max(axis=1)
        q[ell] = pmdp.r[ell] + pmdp.gamma * pmdp.P[ell] @ v
    return q


def solve_periodic_q(pmdp: PeriodicMdp, tol: float = DP_TOL, max_iters: int = MAX_ITERS,
                     q0: np.ndarray = None) -> QTuple:
    """Cyclic value iteration, sweeping phases from L-1 down to 0 each round."""
    if not 0.0 <= pmdp.gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {pmdp.gamma}")
    q = np.zeros((pmdp.L, pmdp.nZ, pmdp.nA)) if q0 is None else np.array(q0, dtype=float)
    for it in range(1, max_iters + 1):
        old = q.copy()
        sweep(pmdp, q)
        if np.abs(q - old).max() <= tol:
            residual = float(np.abs(bellman(pmdp, q) - q).max())
            if residual <= tol:
                break
    else:
        raise ConvergenceError(f"no convergence after {max_iters} rounds")
    return QTuple(q, pmdp.unvisited, {"rounds": it, "residual": residual, "tol": tol})


def solve_periodic_mdp_v(pmdp: PeriodicMdp, tol: float = DP_TOL, max_iters: int = MAX_ITERS) -> np.ndarray:
    """(L, nZ) optimal values ``V^l``."""
    if not 0.0 <= pmdp.gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {pmdp.gamma}")
    L = pmdp.L
    v = np.zeros((L, pmdp.nZ))
    for _ in range(max_iters):
        old = v.copy()
        for ell in range(L - 1, -1, -1):
            v[ell] = (pmdp.r[ell] + pmdp.gamma * pmdp.P[ell] @ v[(ell + 1) % L]).max(axis=1)
        if np.abs(v - old).max() <= tol:
            return v
    raise ConvergenceError(f"no convergence after {max_iters} rounds")
