"""Built-in environments."""
from __future__ import annotations

import math

import numpy as np

from ._accel import njit
from .models import GenerativePomdp, TabularPomdp

# --------------------------------------------------------------------- Fig. 4

_FIG4_OBS = np.array([0, 0, 0, 1, 1, 1])


def _fig4_base():
    P = np.zeros((6, 2, 6))
    R = np.zeros((6, 2))
    # action 0
    P[0, 0, 1] = 1.0
    P[1, 0, [0, 3]] = 0.5
    P[2, 0, [0, 3]] = 0.5
    P[3, 0, 4] = 1.0
    P[4, 0, [3, 0]] = 0.5
    P[5, 0, [3, 0]] = 0.5
    # action 1
    P[0, 1, 2] = 1.0
    P[1, 1, [0, 3]] = 0.5
    P[2, 1, [0, 3]] = 0.5
    P[3, 1, 5] = 1.0
    P[4, 1, [3, 0]] = 0.5
    P[5, 1, [3, 0]] = 0.5
    R[2, 0] = 1.0  # green
    R[4, 1] = 1.0  # green
    R[3, 0] = 0.5  # blue
    R[0, 1] = 0.5  # blue
    return P, R


def env_fig4(p: float = 0.01) -> TabularPomdp:
    """Six-state two-observation model; each action's state kernel is ``p I + (1-p) P``.

    Rewards are the base model's r(s, a), unchanged by ``p``.  Observations
    are a deterministic function of the landing state: 0 on {0,1,2}, 1 on
    {3,4,5}.  The first state is 0.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    P, R = _fig4_base()
    P = p * np.eye(6)[:, None, :] + (1.0 - p) * P
    trans = np.zeros((6, 2, 6, 2))
    for sp in range(6):
        trans[:, :, sp, _FIG4_OBS[sp]] = P[:, :, sp]
    return TabularPomdp(
        trans=trans,
        reward=R,
        gamma=0.9,
        rho=np.eye(6)[0],
        init_obs=np.eye(2)[_FIG4_OBS],
        labels={"A": ["0", "1"], "Y": ["white", "gray"]},
        name=f"fig4_p{p:g}",
    )


# ------------------------------------------------------------------ Example 2


def env_example2() -> TabularPomdp:
    """Three states, one observation; stochastic stationary policies beat deterministic ones."""
    P = np.zeros((3, 2, 3))
    P[0, 0, 0] = 1.0
    P[1, 0, [0, 2]] = 0.5
    P[2, 0, 2] = 1.0
    P[0, 1, [0, 1]] = 0.5
    P[1, 1, 1] = 1.0
    P[2, 1, [2, 1]] = 0.5
    R = np.array([[-1.0, -0.5], [0.0, -0.5], [2.0, -0.5]])
    return TabularPomdp(
        trans=P[..., None],
        reward=R,
        gamma=0.9,
        rho=np.eye(3)[0],
        init_obs=np.ones((3, 1)),
        name="example2",
    )


# ------------------------------------------------------------------ Example 1


def in_d0(s: int) -> bool:
    """``s = n(n+1)/2 + 1`` for some n >= 0, i.e. ``8(s-1)+1`` is a perfect square."""
    x = 8 * (s - 1) + 1
    if x < 1:
        return False
    r = math.isqrt(x)
    return r * r == x


@njit
def _in_d0_scalar(s):
    x = 8 * (s - 1) + 1
    if x < 1:
        return False
    r = np.int64(np.sqrt(np.float64(x)))
    while r * r > x:
        r -= 1
    while (r + 1) * (r + 1) <= x:
        r += 1
    return r * r == x


@njit
def example1_jit_step(s, a):
    good = (a == 0) == _in_d0_scalar(s)
    if good:
        sp = s + 1
        r = 1.0
    else:
        sp = np.int64(1)
        r = -1.0
    return sp, 1 if sp % 2 == 0 else 0, r, False


def _in_d0_array(s):
    x = 8 * (s.astype(np.int64) - 1) + 1
    r = np.floor(np.sqrt(np.maximum(x, 0).astype(np.float64))).astype(np.int64)
    r -= r * r > x
    r += (r + 1) * (r + 1) <= x
    return (x >= 1) & (r * r == x)


def example1_batch_step(s, a):
    good = (a == 0) == _in_d0_array(s)
    sp = np.where(good, s + 1, 1)
    r = np.where(good, 1.0, -1.0)
    return sp, (sp % 2 == 0).astype(np.int64), r, np.zeros(s.shape, bool)


def _example1_step(s, a, rng=None):
    good = (a == 0) == in_d0(s)
    sp = s + 1 if good else 1
    return sp, int(sp % 2 == 0), (1.0 if good else -1.0), False


def env_example1(gamma: float = 0.9) -> GenerativePomdp:
    """Countable-state deterministic model observed only through parity.

    Action 0 is correct on the triangular-plus-one states, action 1
    elsewhere; a correct action moves right with reward +1, a wrong one
    resets to state 1 with reward -1.
    """
    return GenerativePomdp(
        name="example1",
        nA=2,
        nY=2,
        step=_example1_step,
        observe=lambda s: int(s % 2 == 0),
        initial_state=1,
        gamma=gamma,
        reward_bound=1.0,
        deterministic=True,
        batch_step=example1_batch_step,
        jit_step=example1_jit_step,
    )


# ------------------------------------------------------------------ Example 3

LEFT, RIGHT, STAY, UP, DOWN = range(5)
EX3_ACTIONS = ["left", "right", "stay", "up", "down"]


def env_example3(n: int, gamma: float = 1.0) -> GenerativePomdp:
    """T-maze with a corridor of ``2n`` indistinguishable cells.

    State code is ``goal * (2n + 3) + pos`` with pos 0 the start cell,
    ``1..2n`` the corridor, ``2n+1`` the junction and ``2n+2`` the absorbing
    end.  Goal 0 sits up, goal 1 down.  Observations: goal+1 at the start
    cell, 0 in the corridor, 3 at the junction.  Actions unavailable at a
    position are no-ops with reward 0.
    """
    if n < 1:
        raise ValueError(f"corridor half-length must be >= 1, got {n}")
    junction = 2 * n + 1
    end = 2 * n + 2
    width = 2 * n + 3

    def observe(state):
        goal, pos = divmod(state, width)
        if pos == 0:
            return goal + 1
        if pos == junction:
            return 3
        return 0

    def step(state, a, rng=None):
        goal, pos = divmod(state, width)
        if pos == end:
            return state, 0, 0.0, True
        if pos == junction:
            if a in (UP, DOWN):
                r = 1.0 if (a == UP) == (goal == 0) else -1.0
                return goal * width + end, 0, r, True
            return state, observe(state), 0.0, False
        if a == RIGHT:
            pos += 1
        elif a == LEFT and pos > 0:
            pos -= 1
        nxt = goal * width + pos
        return nxt, observe(nxt), 0.0, False

    return GenerativePomdp(
        name=f"example3_n{n}",
        nA=5,
        nY=4,
        step=step,
        observe=observe,
        initial_state=0,
        gamma=gamma,
        reward_bound=1.0,
        deterministic=True,
        initial_states=(0, width),
    )


def example3_period3_policy():
    """The period-3 junction policy as an (L=3, nY=4) action table; don't-care entries are STAY."""
    return np.array([
        [RIGHT, RIGHT, STAY, STAY],
        [RIGHT, STAY, RIGHT, UP],
        [STAY, STAY, STAY, DOWN],
    ])


# -------------------------------------------------------------------- helpers


def fully_observed(model: TabularPomdp) -> TabularPomdp:
    """Same dynamics and rewards, but the observation is the landing state."""
    nS, nA = model.nS, model.nA
    P = model.state_kernel()
    trans = np.zeros((nS, nA, nS, nS))
    idx = np.arange(nS)
    trans[:, :, idx, idx] = P
    return TabularPomdp(trans=trans, reward=model.reward, gamma=model.gamma, rho=model.rho,
                        init_obs=np.eye(nS), name=model.name + "_full")


BUILTIN_ENVS = {
    "fig4": env_fig4,
    "example1": env_example1,
    "example2": env_example2,
    "example3": env_example3,
}
