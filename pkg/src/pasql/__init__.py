"""Periodic agent-state Q-learning for tabular POMDPs: learner, theoretical limits, exact evaluation."""
from ._accel import backend_name
from .agents import AgentStateMachine, make_frame_stack, observation_agent
from .chain import (CyclicDistribution, JointKernel, augmented_chain, build_joint_kernel, check_assumption2,
                    cyclic_stationary, l_step_kernels)
from .envs import env_example1, env_example2, env_example3, env_fig4
from .evaluation import (brute_force_best, cross_product_eval, enumerate_policies, eval_stochastic_stationary,
                         mc_eval, rollout_eval_deterministic)
from .learner import LearnConfig, LrSchedule, QTrace, lr_value, run_asql, run_pasql
from .models import (GenerativePomdp, ModelFormatError, ModelValidationError, TabularPomdp, load_model,
                     save_model, validate_model)
from .periodic_dp import PeriodicMdp, induce_periodic_mdp, solve_periodic_mdp_v, solve_periodic_q
from .policies import PeriodicPolicy, QTuple, behavior_from_matrix, greedy

__version__ = "0.1.0"
