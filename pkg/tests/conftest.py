import numpy as np
import pytest

from pasql import agents, envs, models
from pasql.reference import BEHAVIORS
from pasql.policies import behavior_from_matrix


@pytest.fixture(scope="session")
def fig4():
    return envs.env_fig4(0.01)


@pytest.fixture(scope="session")
def obs_agent():
    return agents.observation_agent(2, 2)


@pytest.fixture(scope="session")
def behaviors():
    return {k: behavior_from_matrix(v) for k, v in BEHAVIORS.items()}


def random_model(rng, nS=3, nA=2, nY=2, gamma=0.8, sparse=False):
    """Random tabular POMDP with nonnegative rewards."""
    trans = rng.random((nS, nA, nS, nY))
    if sparse:
        trans *= rng.random(trans.shape) < 0.5
        trans[:, :, 0, 0] += 1e-3
    trans /= trans.sum(axis=(2, 3), keepdims=True)
    rho = rng.random(nS)
    return models.TabularPomdp(trans=trans, reward=rng.random((nS, nA)), gamma=gamma, rho=rho / rho.sum())


def random_policy(rng, L, nZ, nA):
    p = rng.random((L, nZ, nA))
    return p / p.sum(axis=2, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
