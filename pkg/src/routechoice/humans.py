"""Human drivers: logit route choice over remembered costs.

Each human keeps a per-route cost expectation, picks routes with probability
proportional to exp(beta * expected_cost) (beta < 0, so cheaper is likelier),
and blends observed costs into the memory with a fixed step size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .net import N_ACTIONS, OD


@dataclass
class HumanAgent:
    driver_id: str
    od: OD
    start_time: int
    beta: float  # decision sensitivity, < 0
    alpha: float  # cost-memory step size, in (0, 1]
    cost_memory: np.ndarray  # per-route expected cost, length N_ACTIONS
    rng: np.random.Generator = field(repr=False, default=None)
    learning_enabled: bool = True
    group: str = "human"

    def __post_init__(self):
        self.cost_memory = np.asarray(self.cost_memory, dtype=float).copy()
        if self.cost_memory.shape != (N_ACTIONS,):
            raise ValueError(f"cost_memory must have length {N_ACTIONS}")
        if np.any(self.cost_memory < 0):
            raise ValueError("costs must be nonnegative")
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        # beta = 0 (indifference) is allowed for testing; populations draw < 0
        if self.beta > 0:
            raise ValueError(f"beta must be <= 0, got {self.beta}")


def choice_probabilities(agent: HumanAgent) -> np.ndarray:
    """Logit probabilities over the route options.

    p(i) = exp(beta * cost_i) / sum_j exp(beta * cost_j), computed with
    max-subtraction so large costs cannot overflow.
    """
    scores = agent.beta * agent.cost_memory
    if not np.all(np.isfinite(scores)):
        raise ValueError(f"driver {agent.driver_id}: non-finite cost memory")
    scores = scores - scores.max()
    weights = np.exp(scores)
    return weights / weights.sum()


def choose_route(agent: HumanAgent) -> int:
    """Sample one route index from the agent's choice probabilities."""
    probs = choice_probabilities(agent)
    return int(agent.rng.choice(N_ACTIONS, p=probs))


def update_cost(agent: HumanAgent, action: int, observed_cost: float) -> None:
    """Blend an observed cost into the memory for the taken route.

    new = (1 - alpha) * old + alpha * observed. No-op while learning is
    disabled (Phase Shock freezes human knowledge).
    """
    if observed_cost < 0:
        raise ValueError(f"negative cost {observed_cost}")
    if not agent.learning_enabled:
        return
    old = agent.cost_memory[action]
    agent.cost_memory[action] = (1.0 - agent.alpha) * old + agent.alpha * observed_cost
