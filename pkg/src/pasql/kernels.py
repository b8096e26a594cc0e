"""Hot loops, each with a numba-compiled and a numpy/Python implementation.

Both implementations consume the same pre-drawn uniforms and perform the
same floating-point operations in the same order, so they return
bitwise-identical results.  ``_accel.USE_NUMBA`` picks the default.
"""
import numpy as np

from . import _accel
from ._accel import njit

LR_POLY, LR_EXP, LR_CONST = 0, 1, 2


def pmf_to_cdf(p):
    """Cumulative table along the last axis, with the tail after the last
    positive entry pinned to exactly 1.0 so that ``u < cdf`` always hits a
    positive-probability index for ``u`` in [0, 1)."""
    p = np.asarray(p, dtype=float)
    cdf = np.cumsum(p, axis=-1)
    last = p.shape[-1] - 1 - np.argmax((p > 0)[..., ::-1], axis=-1)
    ks = np.arange(p.shape[-1])
    cdf[ks >= last[..., None]] = 1.0
    return np.ascontiguousarray(cdf)


@njit
def _draw(cdf, u):
    k = 0
    while u >= cdf[k]:
        k += 1
    return k


# ------------------------------------------------------------------ learner


def _pasql_steps(q, visits, t0, n, s, z, gamma, reward, trans_cdf, nY, phi, mu_cdf,
                 u_act, u_env, lr_kind, p0, p1, p2):
    L = q.shape[0]
    nA = q.shape[2]
    for i in range(n):
        t = t0 + i
        ell = t % L
        a = _draw(mu_cdf[ell, z], u_act[i])
        r = reward[s, a]
        k = _draw(trans_cdf[s, a], u_env[i])
        s2 = k // nY
        y2 = k % nY
        z2 = phi[z, y2, a]
        nxt = (ell + 1) % L
        best = q[nxt, z2, 0]
        for b in range(1, nA):
            if q[nxt, z2, b] > best:
                best = q[nxt, z2, b]
        visits[ell, z, a] += 1
        if lr_kind == LR_POLY:
            alpha = p0 / visits[ell, z, a] ** p1
        elif lr_kind == LR_EXP:
            alpha = p0 * p1 ** (t / p2)
        else:
            alpha = p0
        q[ell, z, a] += alpha * (r + gamma * best - q[ell, z, a])
        s = s2
        z = z2
    return s, z


_pasql_steps_jit = njit(_pasql_steps)


def pasql_steps(*args, use_numba=None):
    """Run ``n`` PASQL steps in place on ``q``/``visits``; returns the final (s, z)."""
    fn = _pasql_steps_jit if (_accel.USE_NUMBA if use_numba is None else use_numba) else _pasql_steps
    s, z = fn(*args)
    return int(s), int(z)


# ------------------------------------------- deterministic rollouts by policy code


def _det_rollouts_numba(step_fn, codes, s1, y1, phi, z0, a0, place, L, nZ, nA, gamma, horizon):
    out = np.empty(codes.shape[0])
    for i in range(codes.shape[0]):
        code = codes[i]
        s = s1
        z = phi[z0, y1, a0]
        ret = 0.0
        disc = 1.0
        for k in range(horizon):
            ell = k % L
            a = (code // place[ell * nZ + z]) % nA
            s, y, r, done = step_fn(s, a)
            ret += disc * r
            disc *= gamma
            z = phi[z, y, a]
            if done:
                break
        out[i] = ret
    return out


_det_rollouts_jit = njit(_det_rollouts_numba)


def _det_rollouts_numpy(batch_step, codes, s1, y1, phi, z0, a0, place, L, nZ, nA, gamma, horizon):
    n = codes.shape[0]
    s = np.full(n, s1, dtype=np.int64)
    z = np.full(n, phi[z0, y1, a0], dtype=np.int64)
    alive = np.ones(n, bool)
    ret = np.zeros(n)
    disc = 1.0
    for k in range(horizon):
        ell = k % L
        a = (codes // place[ell * nZ + z]) % nA
        s_new, y, r, done = batch_step(s, a)
        ret += disc * np.where(alive, r, 0.0)
        disc *= gamma
        s = np.where(alive, s_new, s)
        z = np.where(alive, phi[z, y, a], z)
        alive &= ~done
        if not alive.any():
            break
    return ret


def deterministic_rollouts(env, codes, s1, y1, phi, z0, a0, place, L, nZ, nA, gamma, horizon, use_numba=None):
    """Discounted return of every deterministic periodic policy in ``codes``.

    A code's base-``nA`` digit at place ``place[l * nZ + z]`` is the action
    for phase ``l`` and agent state ``z``.  The first step uses phase 0.
    """
    use = _accel.USE_NUMBA if use_numba is None else use_numba
    args = (codes, s1, y1, phi, z0, a0, place, L, nZ, nA, gamma, horizon)
    if use and env.jit_step is not None:
        return _det_rollouts_jit(env.jit_step, *args)
    if env.batch_step is not None:
        return _det_rollouts_numpy(env.batch_step, *args)
    raise ValueError(f"environment {env.name!r} has no vectorized step")


# --------------------------------------------------- Monte-Carlo on tabular models


def _mc_returns_numba(u, rho_cdf, init_cdf, trans_cdf, nY, reward, phi, z0, a0, pi_cdf, gamma, horizon):
    n = u.shape[0]
    L = pi_cdf.shape[0]
    out = np.empty(n)
    for i in range(n):
        s = _draw(rho_cdf, u[i, 0])
        y = _draw(init_cdf[s], u[i, 1])
        z = phi[z0, y, a0]
        ret = 0.0
        disc = 1.0
        for k in range(horizon):
            a = _draw(pi_cdf[k % L, z], u[i, 2 + 2 * k])
            ret += disc * reward[s, a]
            disc *= gamma
            j = _draw(trans_cdf[s, a], u[i, 3 + 2 * k])
            s = j // nY
            z = phi[z, j % nY, a]
        out[i] = ret
    return out


_mc_returns_jit = njit(_mc_returns_numba)


def _count_le(cdf_rows, u):
    return (cdf_rows <= u[:, None]).sum(axis=1)


def _mc_returns_numpy(u, rho_cdf, init_cdf, trans_cdf, nY, reward, phi, z0, a0, pi_cdf, gamma, horizon):
    n = u.shape[0]
    L = pi_cdf.shape[0]
    s = _count_le(np.broadcast_to(rho_cdf, (n, rho_cdf.shape[0])), u[:, 0])
    y = _count_le(init_cdf[s], u[:, 1])
    z = phi[z0, y, a0]
    ret = np.zeros(n)
    disc = 1.0
    for k in range(horizon):
        a = _count_le(pi_cdf[k % L, z], u[:, 2 + 2 * k])
        ret += disc * reward[s, a]
        disc *= gamma
        j = _count_le(trans_cdf[s, a], u[:, 3 + 2 * k])
        s = j // nY
        z = phi[z, j % nY, a]
    return ret


def mc_returns(*args, use_numba=None):
    """Discounted returns of independent rollouts; ``u`` has one row of uniforms per rollout."""
    fn = _mc_returns_jit if (_accel.USE_NUMBA if use_numba is None else use_numba) else _mc_returns_numpy
    return fn(*args)
