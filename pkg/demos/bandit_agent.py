"""
One run of the bandit detector
==============================

Three streams, one of which shifts to mean 0.5 at time 500. The agent samples a
single stream per tick, exploring with a rate that decays as the time since
the estimated change grows.
"""

import numpy as np

from banditqcd import AgentConfig, AgentState, agent_step, epsilon_schedule, select_stream

M, NU, MU1, LAM = 3, 500, 0.5, 30.0
rng = np.random.default_rng(3)
state = AgentState.initial(AgentConfig(M, LAM, seed=3))

explored = 0
while not state.stopped:
    eps = epsilon_schedule(state.t + 1, state.global_cp_estimate, M)
    arm, was_exploring = select_stream(state)
    explored += was_exploring
    mean = MU1 if arm == M - 1 and state.t + 1 > NU else 0.0
    agent_step(state, float(rng.normal(mean, 1.0)), arm)
    if state.t % 100 == 0 or state.stopped:
        print(f"t={state.t:5d}  eps={eps:.3f}  leader={state.leader}  "
              f"max stat={state.max_stat:7.2f}  estimate={state.global_cp_estimate}")

print(f"\nstopped at t={state.t}, declared stream {state.declared_stream} (changed: {M - 1})")
print(f"explored on {explored} of {state.t} ticks")
print("pulls per stream:", state.pull_counts)
