import numpy as np
import pytest

from pasql import agents, chain, envs, policies
from pasql.experiments import two_state_kernel
from pasql.reference import TWO_STATE_AUGMENTED, TWO_STATE_LSTEP, TWO_STATE_ZETA

from conftest import random_model, random_policy


def _fig4_chain(fig4, obs_agent, mu):
    return chain.build_joint_kernel(fig4, obs_agent, mu)


def test_rows_sum_to_one(fig4, obs_agent, behaviors):
    for mu in behaviors.values():
        jk = _fig4_chain(fig4, obs_agent, mu)
        assert np.allclose(jk.kernels.sum(axis=2), 1.0, atol=1e-12)
        assert jk.init.sum() == pytest.approx(1.0)


def test_random_models_rows_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(5):
        m = random_model(rng, sparse=True)
        ag = agents.make_frame_stack(2, 2, 2)
        mu = policies.PeriodicPolicy(random_policy(rng, 3, ag.nZ, 2))
        jk = chain.build_joint_kernel(m, ag, mu)
        assert np.abs(jk.kernels.sum(axis=2) - 1).max() < 1e-12


def test_single_agent_state_marginal_is_averaged_kernel():
    rng = np.random.default_rng(1)
    m = random_model(rng, nS=4, nA=3, nY=2)
    ag = agents.AgentStateMachine(np.zeros((1, 2, 3), dtype=int))
    pol = random_policy(rng, 1, 1, 3)
    jk = chain.build_joint_kernel(m, ag, policies.PeriodicPolicy(pol))
    K = jk.kernels[0].reshape(jk.shape + jk.shape)  # (s,y,z,a, s',y',z',a')
    # law of s' given s, marginalized over (y', z', a') and averaged over a ~ mu
    ss = np.einsum("sapqrb,a->sp", K[:, 0, 0], pol[0, 0])
    expected = np.einsum("sap,a->sp", m.state_kernel(), pol[0, 0])
    assert np.allclose(ss, expected, atol=1e-14)


def test_dimension_mismatch(fig4, behaviors):
    with pytest.raises(ValueError):
        chain.build_joint_kernel(fig4, agents.observation_agent(3, 2), behaviors["mu1"])


def test_two_state_lstep_and_augmented():
    jk = two_state_kernel()
    for got, want in zip(chain.l_step_kernels(jk), TWO_STATE_LSTEP):
        assert np.allclose(got, want, atol=1e-15)
    pbar = chain.augmented_chain(jk)
    assert np.array_equal(pbar, np.array(TWO_STATE_AUGMENTED))


def test_lstep_trivial_cases():
    P = np.array([[[0.3, 0.7], [0.6, 0.4]]])
    jk = chain.JointKernel(P, [1, 0])
    assert np.array_equal(chain.l_step_kernels(jk)[0], P[0])
    assert np.array_equal(chain.augmented_chain(jk), P[0])
    eye = chain.JointKernel(np.stack([np.eye(3)] * 4), [1, 0, 0])
    assert all(np.array_equal(K, np.eye(3)) for K in chain.l_step_kernels(eye))


def test_two_state_zeta():
    jk = two_state_kernel()
    rep = chain.check_assumption2(jk)
    assert rep.chain_ok
    z = chain.cyclic_stationary(jk)
    assert np.allclose(z.zeta, TWO_STATE_ZETA, atol=1e-10, rtol=0)


def test_swap_is_periodic():
    jk = chain.JointKernel(np.array([[[0.0, 1.0], [1.0, 0.0]]]), [1, 0])
    rep = chain.check_assumption2(jk)
    assert rep.phases[0].period == 2 and not rep.phases[0].aperiodic
    with pytest.raises(chain.AssumptionError):
        chain.cyclic_stationary(jk)
    assert chain.cyclic_stationary(jk, unchecked=True).zeta.sum() == pytest.approx(1.0)


def test_two_closed_classes_not_irreducible():
    jk = chain.JointKernel(np.array([np.eye(2)]), [0.5, 0.5])
    rep = chain.check_assumption2(jk)
    assert rep.phases[0].n_recurrent_classes == 2 and not rep.chain_ok


def test_transient_start_gets_zero_mass():
    P = np.array([[[0.0, 0.5, 0.5], [0.0, 0.5, 0.5], [0.0, 0.3, 0.7]]])
    jk = chain.JointKernel(P, [1, 0, 0])
    rep = chain.check_assumption2(jk)
    assert rep.chain_ok and rep.phases[0].n_transient == 1
    z = chain.cyclic_stationary(jk).zeta[0]
    assert z[0] == 0 and z @ P[0] == pytest.approx(z)


def test_doubly_stochastic_uniform():
    P = np.array([[[0.2, 0.5, 0.3], [0.5, 0.3, 0.2], [0.3, 0.2, 0.5]]])
    z = chain.cyclic_stationary(chain.JointKernel(P, [1, 0, 0])).zeta[0]
    assert np.allclose(z, 1 / 3, atol=1e-14)


def test_fig4_mu2_passes(fig4, obs_agent, behaviors):
    jk = _fig4_chain(fig4, obs_agent, behaviors["mu2"])
    rep = chain.check_assumption2(jk, obs_agent)
    assert rep.ok and all(p.aperiodic for p in rep.phases)


def test_fig4_mu1_linear_solve_matches_power_iteration(fig4, obs_agent, behaviors):
    jk = _fig4_chain(fig4, obs_agent, behaviors["mu1"])
    z = chain.cyclic_stationary(jk)
    assert np.abs(z.zeta - chain.power_iteration(jk, 100_000)).max() <= 1e-8


@pytest.mark.parametrize("name", ["mu1", "mu2", "mu3"])
def test_residuals(fig4, obs_agent, behaviors, name):
    jk = _fig4_chain(fig4, obs_agent, behaviors[name])
    z = chain.cyclic_stationary(jk)
    for ell, K in enumerate(chain.l_step_kernels(jk)):
        assert np.abs(z.zeta[ell] @ K - z.zeta[ell]).sum() <= 1e-10
        assert np.abs(z.zeta[ell] @ jk.kernels[ell] - z.zeta[(ell + 1) % 2]).sum() <= 1e-8
        assert z.zeta[ell].sum() == pytest.approx(1.0, abs=1e-10)


def test_phase_constant_behavior_gives_equal_zetas(fig4, obs_agent, behaviors):
    z = chain.cyclic_stationary(_fig4_chain(fig4, obs_agent, behaviors["mu2"]))
    assert np.abs(z.zeta[0] - z.zeta[1]).max() <= 1e-8


def test_augmented_power_is_blockdiag(fig4, obs_agent, behaviors):
    jk = _fig4_chain(fig4, obs_agent, behaviors["mu1"])
    pbar = chain.augmented_chain(jk)
    n = jk.n
    got = np.linalg.matrix_power(pbar, 2)
    want = np.zeros_like(got)
    for ell, K in enumerate(chain.l_step_kernels(jk)):
        want[ell * n:(ell + 1) * n, ell * n:(ell + 1) * n] = K
    assert np.abs(got - want).max() <= 1e-10


def test_conditionals(fig4, obs_agent, behaviors):
    z = chain.cyclic_stationary(_fig4_chain(fig4, obs_agent, behaviors["mu3"]))
    for ell in range(2):
        sz = z.s_given_z(ell)
        assert np.allclose(sz.sum(axis=1), 1.0)
        sza = z.s_given_za(ell)
        # conditioning on the action adds nothing: a is drawn from mu(.|z)
        assert np.allclose(sza, sz[:, None, :], atol=1e-12)


@pytest.mark.slow
def test_simulation_matches_one_step_laws(fig4, obs_agent, behaviors):
    jk = _fig4_chain(fig4, obs_agent, behaviors["mu1"])
    zeta = chain.cyclic_stationary(jk)
    C = chain.simulate_pair_counts(jk, 1_000_000, seed=7)
    for ell in range(2):
        visits = C[ell].sum(axis=1)
        assert 0.5 * np.abs(visits / visits.sum() - zeta.zeta[ell]).sum() <= 0.02
    # one-step laws: given the current state the next draw is fresh, so transition
    # frequencies out of each row are multinomial and iid standard errors apply
    for ell in range(2):
        visits = C[ell].sum(axis=1)
        rows = visits > 0
        freq = C[ell][rows] / visits[rows, None]
        p = jk.kernels[ell][rows]
        se = np.sqrt(p * (1 - p) / visits[rows, None])
        z = np.abs(freq - p)[se > 0] / se[se > 0]
        assert np.all(freq[se == 0] == p[se == 0])
        # 3 standard errors, allowing the expected handful of 3-sigma exceedances
        assert np.mean(z > 3) <= 0.01 and z.max() < 5
