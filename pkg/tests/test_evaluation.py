import numpy as np
import pytest

from pasql import agents, envs, evaluation as ev, policies
from pasql.experiments import example2_sweep

from conftest import random_model, random_policy

G = 0.9


def augmented_eval(model, agent, pi):
    """Value on the time-homogeneous chain over (s, z, phase), solved in one linear system."""
    nS, nZ, L = model.nS, agent.nZ, pi.L
    n = nS * nZ
    r = np.zeros(L * n)
    P = np.zeros((L * n, L * n))
    for ell in range(L):
        nxt = (ell + 1) % L
        for s in range(nS):
            for z in range(nZ):
                i = ell * n + s * nZ + z
                for a in range(model.nA):
                    pa = pi.probs[ell, z, a]
                    r[i] += pa * model.reward[s, a]
                    for s2 in range(nS):
                        for y2 in range(model.nY):
                            z2 = agent.phi[z, y2, a]
                            P[i, nxt * n + s2 * nZ + z2] += pa * model.trans[s, a, s2, y2]
    V = np.linalg.solve(np.eye(L * n) - model.gamma * P, r)
    J = 0.0
    for s in range(nS):
        for y in range(model.nY):
            J += model.rho[s] * model.init_obs[s, y] * V[s * nZ + agent.first(y)]
    return J


def test_cross_product_matches_augmented_oracle():
    rng = np.random.default_rng(0)
    for trial in range(5):
        m = random_model(rng, nS=3, nA=2, nY=2, sparse=bool(trial % 2))
        ag = agents.make_frame_stack(1, 2, 2)
        for L in (1, 2, 3):
            pi = policies.PeriodicPolicy(random_policy(rng, L, ag.nZ, 2))
            assert ev.cross_product_eval(m, ag, pi) == pytest.approx(augmented_eval(m, ag, pi), abs=1e-10)


@pytest.mark.slow
def test_cross_product_matches_monte_carlo():
    rng = np.random.default_rng(1)
    for _ in range(5):
        m = random_model(rng, nS=3, nA=2, nY=2, sparse=True)
        ag = agents.observation_agent(2, 2)
        for _ in range(3):
            L = int(rng.integers(1, 4))
            pi = policies.PeriodicPolicy(random_policy(rng, L, 2, 2))
            mean, se = ev.mc_eval(m, ag, pi, n_rollouts=20_000, seed=int(rng.integers(1 << 30)), tail_tol=1e-6)
            assert abs(mean - ev.cross_product_eval(m, ag, pi)) <= 3 * se


def test_zero_reward_is_zero(fig4, obs_agent):
    zero = type(fig4)(trans=fig4.trans, reward=np.zeros((6, 2)), gamma=0.9, rho=fig4.rho)
    pi = policies.PeriodicPolicy.from_actions([[0, 1], [1, 0]], 2)
    assert ev.cross_product_eval(zero, obs_agent, pi) == 0.0
    assert ev.mc_eval(zero, obs_agent, pi, n_rollouts=100) == (0.0, 0.0)


def test_best_periodic_policy_value(fig4, obs_agent):
    pi = policies.PeriodicPolicy.from_digits("1001", 2, 2, 2)
    assert ev.cross_product_eval(fig4, obs_agent, pi) == pytest.approx(6.793, abs=1e-3)


def test_mc_best_periodic_policy(fig4, obs_agent):
    pi = policies.PeriodicPolicy.from_digits("1001", 2, 2, 2)
    mean, se = ev.mc_eval(fig4, obs_agent, pi, n_rollouts=20_000, seed=5)
    assert abs(mean - 6.793) <= 3 * se + 5e-4


def test_mc_is_seed_deterministic(fig4, obs_agent):
    pi = policies.PeriodicPolicy.from_digits("1001", 2, 2, 2)
    assert ev.mc_eval(fig4, obs_agent, pi, n_rollouts=500, seed=1) == ev.mc_eval(fig4, obs_agent, pi,
                                                                                    n_rollouts=500, seed=1)


def test_mc_example2_stochastic_policy():
    m = envs.env_example2()
    ag = agents.observation_agent(1, 2)
    p = 0.39
    pi = policies.PeriodicPolicy.stationary([[1 - p, p]])
    P = m.state_kernel()
    exact = np.linalg.solve(np.eye(3) - G * ((1 - p) * P[:, 0] + p * P[:, 1]),
                            (1 - p) * m.reward[:, 0] + p * m.reward[:, 1])[0]
    assert ev.eval_stochastic_stationary(m, p) == pytest.approx(exact, abs=1e-12)
    mean, se = ev.mc_eval(m, ag, pi, n_rollouts=20_000, seed=2, tail_tol=1e-5)
    assert abs(mean - exact) <= 3 * se


def test_example2_sweep():
    ps, js = example2_sweep()
    assert js[-1] == pytest.approx(-5.0, abs=1e-12)
    i = int(np.argmax(js))
    assert abs(ps[i] - 0.39) <= 0.02
    assert js[i] > max(js[0], js[-1]) + 1e-6
    m = envs.env_example2()
    ag = agents.observation_agent(1, 2)
    det0 = policies.PeriodicPolicy.from_actions([[0]], 2)
    assert ev.eval_stochastic_stationary(m, 0.0) == pytest.approx(ev.cross_product_eval(m, ag, det0), abs=1e-12)


def test_example1_closed_forms():
    env = envs.env_example1()
    ag = agents.observation_agent(2, 2)
    always0 = policies.PeriodicPolicy.from_actions([[0, 0]], 2)
    alt = policies.PeriodicPolicy.from_actions([[0, 1]], 2)  # odd (y=0) -> 0, even (y=1) -> 1
    r0 = ev.rollout_eval_deterministic(env, ag, always0)
    assert r0.J == pytest.approx((1 + G - G * G) / (1 - G ** 3), abs=1e-4)
    assert r0.horizon == 110
    assert ev.rollout_eval_deterministic(env, ag, alt).J == pytest.approx(1 / (1 + G), abs=1e-4)


def test_rollout_rejects_stochastic():
    env = envs.env_example1()
    ag = agents.observation_agent(2, 2)
    with pytest.raises(ValueError):
        ev.rollout_eval_deterministic(env, ag, policies.PeriodicPolicy.stationary([[0.5, 0.5], [1, 0]]))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_example3_period3_policy(n):
    env = envs.env_example3(n)
    pi = policies.PeriodicPolicy.from_actions(envs.example3_period3_policy(), 5)
    res = ev.rollout_eval_deterministic(env, agents.observation_agent(4, 5), pi)
    assert res.returns == [1.0, 1.0]
    assert res.arrival_times == [3 * n + 3, 3 * n + 4]


def test_enumeration_counts():
    assert sum(1 for _ in ev.enumerate_policies(2, 2, 1)) == 4
    pols = list(ev.enumerate_policies(2, 2, 2))
    assert len(pols) == 16 and pols[1].digits() == "0001" and pols[-1].digits() == "1111"
    assert ev.policy_count(2, 2, 10) == 1_048_576
    with pytest.raises(ValueError, match="1048576"):
        next(ev.enumerate_policies(2, 2, 10, cap=1 << 16))


def test_search_matches_enumeration(fig4, obs_agent):
    res = ev.brute_force_best(fig4, obs_agent, 2)
    vals = [ev.cross_product_eval(fig4, obs_agent, p) for p in ev.enumerate_policies(2, 2, 2)]
    assert np.allclose(res.values, vals)
    assert res.J == pytest.approx(6.793, abs=1e-3) and res.policy.digits() == "1001"
    res1 = ev.brute_force_best(fig4, obs_agent, 1)
    assert res1.J == pytest.approx(2.633, abs=1e-3)
    assert res1.J <= res.J + 1e-9


def test_search_ties_pick_smallest_code():
    zero = envs.env_fig4(0.01)
    zero = type(zero)(trans=zero.trans, reward=np.zeros((6, 2)), gamma=0.9, rho=zero.rho)
    res = ev.brute_force_best(zero, agents.observation_agent(2, 2), 2)
    assert res.policy.digits() == "0000"


def test_search_matches_single_rollouts():
    env = envs.env_example1()
    ag = agents.observation_agent(2, 2)
    res = ev.brute_force_best(env, ag, 3)
    assert res.J == pytest.approx(7.479, abs=1e-3)
    assert ev.rollout_eval_deterministic(env, ag, res.policy).J == pytest.approx(res.J, abs=1e-12)
    # spot-check the vectorized values against the scalar evaluator
    for code in (0, 5, 17, 63):
        pol = ev._code_to_policy(code, *ev._code_places(2, 2, 3, np.arange(2))[:1], 2, 2, 3)
        assert ev.rollout_eval_deterministic(env, ag, pol).J == pytest.approx(res.values[code], abs=1e-12)


def test_example1_divisibility_and_non_monotonicity():
    env = envs.env_example1()
    ag = agents.observation_agent(2, 2)
    J = {L: ev.brute_force_best(env, ag, L).J for L in (1, 2, 3, 4, 6)}
    assert J[1] <= J[2] + 1e-9 and J[2] <= J[4] + 1e-9 and J[2] <= J[6] + 1e-9 and J[3] <= J[6] + 1e-9
    assert J[3] > J[4]


def test_horizon_rule():
    T = ev.horizon_for(0.9, 1.0, 1e-4)
    assert 0.9 ** T / 0.1 < 1e-4 <= 0.9 ** (T - 1) / 0.1
    with pytest.raises(ValueError):
        ev.horizon_for(1.0, 1.0, 1e-4)
