"""Published reference values and the behavior policies used to reproduce them.

Every constant the ``repro`` command checks against lives here.
"""

# Example 1, gamma = 0.9, agent state = last observation: best deterministic
# period-L policy for L = 1..10.
JSTAR_EXAMPLE1 = [4.022, 4.022, 7.479, 6.184, 8.810, 7.479, 9.340, 8.488, 9.607, 8.810]
JSTAR_TOL = 1e-3

# Six-state model with p = 0.01, agent state = last observation.
# Period 2: [best policy, greedy limit under mu1, mu2, mu3].
PERIODIC_FIG4 = [6.793, 6.793, 1.064, 0.532]
# Stationary: [best policy, greedy limit under mubar1, mubar2, mubar3].
STATIONARY_FIG4 = [2.633, 0.0, 1.064, 2.633]
FIG4_TOL = 1e-3

# Two-state, two-phase chain and its cyclic limit.
TWO_STATE_P0 = [[1 / 4, 3 / 4], [1 / 2, 1 / 2]]
TWO_STATE_P1 = [[3 / 4, 1 / 4], [1 / 4, 3 / 4]]
TWO_STATE_LSTEP = [[[3 / 8, 5 / 8], [1 / 2, 1 / 2]], [[5 / 16, 11 / 16], [7 / 16, 9 / 16]]]
TWO_STATE_AUGMENTED = [
    [0, 0, 1 / 4, 3 / 4],
    [0, 0, 1 / 2, 1 / 2],
    [3 / 4, 1 / 4, 0, 0],
    [1 / 4, 3 / 4, 0, 0],
]
TWO_STATE_ZETA = [[4 / 9, 5 / 9], [7 / 18, 11 / 18]]
ZETA_TOL = 1e-10

# Example 2: the best memoryless stochastic policy plays action 1 w.p. ~0.39.
EXAMPLE2_PSTAR = 0.39
EXAMPLE2_PSTAR_TOL = 0.02
EXAMPLE2_J_AT_1 = -5.0

# Example 3: the period-3 policy reaches the correct goal with return +1,
# at time 3n+3 (goal up) and 3n+4 (goal down); n = 1..5 checked.
EXAMPLE3_NS = [1, 2, 3, 4, 5]

# Behavior policies: rows are agent states, columns phases, entries mu(action 0 | z).
BEHAVIORS = {
    "mu1": [[0.2, 0.8], [0.8, 0.2]],
    "mu2": [[0.5, 0.5], [0.5, 0.5]],
    "mu3": [[0.8, 0.2], [0.2, 0.8]],
    "mubar1": [[0.2], [0.8]],
    "mubar2": [[0.5], [0.5]],
    "mubar3": [[0.8], [0.2]],
}

# Learning-rate schedule of the published convergence runs.
EXP_SCHEDULE = {"start": 1e-3, "end": 1e-5, "horizon": 1e6}
