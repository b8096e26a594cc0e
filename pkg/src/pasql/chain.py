"""The joint chain over (s, y, z, a) induced by a periodic behavior policy."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from math import gcd

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import _accel
from ._accel import njit
from .agents import AgentStateMachine
from .kernels import _draw, pmf_to_cdf
from .models import TabularPomdp
from .policies import PeriodicPolicy

ROW_TOL = 1e-10
POS_TOL = 1e-12
STATIONARY_TOL = 1e-10
CROSS_PHASE_TOL = 1e-8


class AssumptionError(RuntimeError):
    """The behavior chain is not irreducible and aperiodic on its reachable class."""

    def __init__(self, report):
        self.report = report
        super().__init__(report.summary())


@dataclass(frozen=True, eq=False)
class JointKernel:
    """``kernels[l]`` is the law of X_{t+1} given X_t at times with phase ``l``.

    ``shape`` is the factor shape of the flat index (``(nS, nY, nZ, nA)`` for
    chains built from a model, or ``(n,)`` for a bare chain).  ``init`` is
    the law of X_1 and ``init_phase`` its phase.
    """

    kernels: np.ndarray
    init: np.ndarray
    init_phase: int = 0
    shape: tuple = ()

    def __post_init__(self):
        k = np.array(self.kernels, dtype=float)
        if k.ndim != 3 or k.shape[1] != k.shape[2]:
            raise ValueError(f"kernels must have shape (L, n, n), got {k.shape}")
        bad = np.abs(k.sum(axis=2) - 1.0) > ROW_TOL
        if bad.any():
            l, x = np.argwhere(bad)[0]
            raise ValueError(f"kernels[{l}] row {x} sums to {k[l, x].sum()!r}")
        k.setflags(write=False)
        object.__setattr__(self, "kernels", k)
        object.__setattr__(self, "init", np.asarray(self.init, dtype=float))
        object.__setattr__(self, "shape", tuple(self.shape) or (k.shape[1],))
        if int(np.prod(self.shape)) != k.shape[1]:
            raise ValueError(f"shape {self.shape} does not factor {k.shape[1]} states")

    @property
    def L(self) -> int:
        return self.kernels.shape[0]

    @property
    def n(self) -> int:
        return self.kernels.shape[1]

    def encode(self, *idx) -> int:
        return int(np.ravel_multi_index(idx, self.shape))

    def decode(self, x: int) -> tuple:
        return tuple(int(i) for i in np.unravel_index(x, self.shape))


def build_joint_kernel(model: TabularPomdp, agent: AgentStateMachine, mu: PeriodicPolicy) -> JointKernel:
    """Phase kernels ``P(s',y'|s,a) 1{z'=phi(z,y',a)} mu^{l+1}(a'|z')``.

    Time starts at 1, so X_1 carries phase ``1 mod L``.
    """
    nS, nA, nY = model.nS, model.nA, model.nY
    nZ = agent.nZ
    if agent.nY != nY or agent.nA != nA:
        raise ValueError(f"agent is for (nY={agent.nY}, nA={agent.nA}), model has ({nY}, {nA})")
    if mu.nZ != nZ or mu.nA != nA:
        raise ValueError(f"policy is for (nZ={mu.nZ}, nA={mu.nA}), expected ({nZ}, {nA})")
    L = mu.L
    shape = (nS, nY, nZ, nA)
    # G[s, z, a, s', y', z'] = P(s', y' | s, a) 1{z' = phi(z, y', a)}
    onehot = np.eye(nZ)[agent.phi]  # (z, y', a, z')
    G = np.einsum("sapy,zyaw->szapyw", model.trans, onehot)
    kernels = np.empty((L,) + shape + shape)
    for ell in range(L):
        nxt = mu.probs[(ell + 1) % L]  # (z', a')
        K = np.einsum("szapyw,wb->szapywb", G, nxt)
        # rows are indexed (s, y, z, a); y is irrelevant to the next step
        kernels[ell] = np.broadcast_to(K[:, None], (nS, nY, nZ, nA, nS, nY, nZ, nA))
    n = nS * nY * nZ * nA
    z1 = agent.phi[agent.z0, :, agent.a0]  # (y,)
    ph1 = 1 % L
    init = np.zeros(shape)
    for y in range(nY):
        init[:, y, z1[y], :] += (model.rho * model.init_obs[:, y])[:, None] * mu.probs[ph1, z1[y]][None, :]
    return JointKernel(kernels.reshape(L, n, n), init.ravel(), ph1, shape)


def l_step_kernels(jk: JointKernel) -> list:
    """``P_l P_{l+1} ... P_{l+L-1}`` (indices mod L) for every starting phase."""
    L = jk.L
    return [reduce(np.matmul, [jk.kernels[(ell + k) % L] for k in range(L)]) for ell in range(L)]


def augmented_chain(jk: JointKernel) -> np.ndarray:
    """Time-homogeneous chain over (x, phase); block (l, l+1) is ``P_l``."""
    L, n = jk.L, jk.n
    out = np.zeros((L * n, L * n))
    for ell in range(L):
        nxt = (ell + 1) % L
        out[ell * n:(ell + 1) * n, nxt * n:(nxt + 1) * n] += jk.kernels[ell]
    return out


# ------------------------------------------------------------ assumption check


def _period(adj: csr_matrix) -> int:
    """Period of a strongly connected digraph via BFS levels from node 0."""
    order, pred = breadth_first_order(adj, 0, directed=True, return_predecessors=True)
    level = np.full(adj.shape[0], -1)
    level[0] = 0
    for v in order[1:]:
        level[v] = level[pred[v]] + 1
    coo = adj.tocoo()
    diffs = level[coo.row] + 1 - level[coo.col]
    return reduce(gcd, (int(abs(d)) for d in diffs), 0)


@dataclass
class PhaseReport:
    phase: int
    n_reachable: int
    n_recurrent_classes: int
    n_transient: int
    period: int
    recurrent: np.ndarray = field(repr=False)

    @property
    def irreducible(self) -> bool:
        # a single closed class; transient states only carry vanishing mass
        return self.n_recurrent_classes == 1

    @property
    def aperiodic(self) -> bool:
        return self.period == 1


@dataclass
class AssumptionReport:
    phases: list
    positivity: np.ndarray = None  # (L, nZ, nA) booleans, on the reachable agent states
    min_visit_prob: float = float("nan")

    @property
    def chain_ok(self) -> bool:
        return all(p.irreducible and p.aperiodic for p in self.phases)

    @property
    def ok(self) -> bool:
        pos = True if self.positivity is None else bool(self.positivity.all())
        return self.chain_ok and pos

    def summary(self) -> str:
        lines = []
        for p in self.phases:
            lines.append(
                f"phase {p.phase}: reachable={p.n_reachable} recurrent_classes={p.n_recurrent_classes} "
                f"transient={p.n_transient} period={p.period}"
            )
        if self.positivity is not None:
            missing = np.argwhere(~self.positivity)
            lines.append(f"min zeta(z,a) = {self.min_visit_prob:.3g}; "
                         f"never-visited (phase,z,a): {[tuple(map(int, m)) for m in missing]}")
        return "\n".join(lines)


def _reachable(jk: JointKernel) -> np.ndarray:
    """(L, n) mask of joint states reachable at each phase from the initial law."""
    L, n = jk.L, jk.n
    seen = np.zeros((L, n), bool)
    frontier = np.zeros((L, n), bool)
    frontier[jk.init_phase] = jk.init > 0
    support = [k > 0 for k in jk.kernels]
    while frontier.any():
        seen |= frontier
        nxt = np.zeros_like(frontier)
        for ell in range(L):
            if frontier[ell].any():
                nxt[(ell + 1) % L] |= support[ell][frontier[ell]].any(axis=0)
        frontier = nxt & ~seen
    return seen


def analyze_phases(jk: JointKernel) -> list:
    reach = _reachable(jk)
    out = []
    for ell, K in enumerate(l_step_kernels(jk)):
        idx = np.flatnonzero(reach[ell])
        sub = csr_matrix(K[np.ix_(idx, idx)] > 0)
        _, labels = connected_components(sub, directed=True, connection="strong")
        # closed classes: no edge leaves the component
        coo = sub.tocoo()
        leaks = np.zeros(labels.max() + 1, bool)
        leaks[labels[coo.row][labels[coo.row] != labels[coo.col]]] = True
        closed = np.flatnonzero(~leaks)
        recurrent = np.isin(labels, closed)
        period = 0
        if len(closed) == 1:
            members = np.flatnonzero(labels == closed[0])
            period = _period(csr_matrix(K[np.ix_(idx[members], idx[members])] > 0))
        out.append(PhaseReport(ell, len(idx), len(closed), int((~recurrent).sum()), period, idx[recurrent]))
    return out


def check_assumption2(jk: JointKernel, agent: AgentStateMachine = None, zeta: "CyclicDistribution" = None,
                      tol_pos: float = POS_TOL) -> AssumptionReport:
    """Irreducibility/aperiodicity per phase, plus positivity of zeta^l(z, a) when
    the chain carries an agent-state factor."""
    report = AssumptionReport(analyze_phases(jk))
    if len(jk.shape) == 4 and report.chain_ok:
        if zeta is None:
            zeta = cyclic_stationary(jk, unchecked=True)
        zs = agent.reachable() if agent is not None else np.arange(jk.shape[2])
        za = np.stack([zeta.za(ell) for ell in range(jk.L)])[:, zs, :]
        report.positivity = za > tol_pos
        report.min_visit_prob = float(za.min())
    return report


# ------------------------------------------------------- stationary distributions


@dataclass(frozen=True, eq=False)
class CyclicDistribution:
    """``zeta[l]`` is the limiting law of X_t along times with phase ``l``."""

    zeta: np.ndarray
    shape: tuple
    residuals: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.zeta.shape[0]

    def joint(self, ell: int) -> np.ndarray:
        return self.zeta[ell].reshape(self.shape)

    def sz(self, ell: int) -> np.ndarray:
        """zeta^l(s, z)."""
        return self.joint(ell).sum(axis=(1, 3))

    def za(self, ell: int) -> np.ndarray:
        """zeta^l(z, a)."""
        return self.joint(ell).sum(axis=(0, 1))

    def z(self, ell: int) -> np.ndarray:
        return self.joint(ell).sum(axis=(0, 1, 3))

    def s_given_z(self, ell: int) -> np.ndarray:
        """(nZ, nS) table of zeta^l(s | z); rows with zeta^l(z) = 0 are zero."""
        sz = self.sz(ell)
        pz = sz.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(pz[None, :] > 0, sz / pz[None, :], 0.0)
        return out.T

    def s_given_za(self, ell: int) -> np.ndarray:
        """(nZ, nA, nS) table of zeta^l(s | z, a)."""
        sza = self.joint(ell).sum(axis=1)
        pza = sza.sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(pza[None] > 0, sza / pza[None], 0.0)
        return out.transpose(1, 2, 0)


def _stationary_on(K: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Stationary PMF of ``K`` restricted to the closed class ``idx``."""
    sub = K[np.ix_(idx, idx)]
    A = sub.T - np.eye(len(idx))
    A[-1, :] = 1.0
    b = np.zeros(len(idx))
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def cyclic_stationary(jk: JointKernel, unchecked: bool = False) -> CyclicDistribution:
    """Per-phase stationary laws of the L-step kernels on their recurrent class."""
    phases = analyze_phases(jk)
    report = AssumptionReport(phases)
    if not unchecked and not report.chain_ok:
        raise AssumptionError(report)
    Ks = l_step_kernels(jk)
    zeta = np.zeros((jk.L, jk.n))
    for ell, (K, ph) in enumerate(zip(Ks, phases)):
        if ph.n_recurrent_classes == 0:
            continue
        zeta[ell, ph.recurrent] = _stationary_on(K, ph.recurrent)
    stat = max(float(np.abs(zeta[ell] @ Ks[ell] - zeta[ell]).sum()) for ell in range(jk.L))
    cross = max(float(np.abs(zeta[ell] @ jk.kernels[ell] - zeta[(ell + 1) % jk.L]).sum()) for ell in range(jk.L))
    if not unchecked and (stat > STATIONARY_TOL or cross > CROSS_PHASE_TOL):
        raise RuntimeError(f"stationary residual {stat:.3g}, cross-phase residual {cross:.3g}")
    return CyclicDistribution(zeta, jk.shape, {"stationary": stat, "cross_phase": cross})


def power_iteration(jk: JointKernel, iters: int = 100_000, tol: float = 0.0) -> np.ndarray:
    """Cyclic limit by iterating the augmented chain from the initial law."""
    L, n = jk.L, jk.n
    x = np.asarray(jk.init, dtype=float).copy()
    ell = jk.init_phase
    for _ in range((-ell) % L):
        x = x @ jk.kernels[ell]
        ell = (ell + 1) % L
    K0 = l_step_kernels(jk)[0]
    for _ in range(iters):
        nx = x @ K0
        if tol and np.abs(nx - x).sum() <= tol:
            x = nx
            break
        x = nx
    out = np.empty((L, n))
    out[0] = x
    for ell in range(1, L):
        out[ell] = out[ell - 1] @ jk.kernels[ell - 1]
    return out


# ------------------------------------------------------------------ simulation


def _pair_counts(kernel_cdf, init_cdf, init_phase, u, L):
    n = kernel_cdf.shape[1]
    counts = np.zeros((L, n, n), dtype=np.int64)
    x = _draw(init_cdf, u[0])
    ell = init_phase
    for i in range(1, u.shape[0]):
        nx = _draw(kernel_cdf[ell, x], u[i])
        counts[ell, x, nx] += 1
        x = nx
        ell = (ell + 1) % L
    return counts


_pair_counts_jit = njit(_pair_counts)


def simulate_pair_counts(jk: JointKernel, steps: int, seed: int) -> np.ndarray:
    """Transition counts ``C[l, x, x']`` along one simulated trajectory of ``steps`` transitions."""
    u = np.random.Generator(np.random.Philox(seed)).random(steps + 1)
    fn = _pair_counts_jit if _accel.USE_NUMBA else _pair_counts
    return fn(pmf_to_cdf(jk.kernels), pmf_to_cdf(jk.init), jk.init_phase, u, jk.L)
