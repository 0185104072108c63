"""Autonomous vehicles: independent deep Q-learners over warmth states.

Every AV owns a small fully connected Q-network (6 -> 32 -> 64 -> 32 -> 3,
ReLU between layers), a ring replay buffer, and a private rng. One action is
taken per episode, so the training target is the immediate reward with no
bootstrap: the network regresses Q(s)[a] onto the observed reward (a cost to
minimize, hence the greedy action is the argmin). Forward, backward, and the
Adam step are written out in numpy so a finite-difference check can audit
the gradients directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .behavior import BehaviorWeights
from .net import N_ACTIONS, OD
from .stateobs import STATE_SIZE

LAYER_SIZES = (STATE_SIZE, 32, 64, 32, N_ACTIONS)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class QNetwork:
    """Plain MLP with uniform +-1/sqrt(fan_in) init, float64 throughout."""

    def __init__(self, rng: np.random.Generator, layer_sizes=LAYER_SIZES):
        self.layer_sizes = tuple(layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Q-values for a single state (1-d) or a batch (2-d)."""
        single = x.ndim == 1
        h = np.atleast_2d(np.asarray(x, dtype=float))
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def save(self, path) -> None:
        arrays = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "QNetwork":
        data = np.load(path)
        n_layers = len(data.files) // 2
        net = cls.__new__(cls)
        net.weights = [data[f"w{i}"].astype(float) for i in range(n_layers)]
        net.biases = [data[f"b{i}"].astype(float) for i in range(n_layers)]
        net.layer_sizes = tuple([net.weights[0].shape[0]] + [w.shape[1] for w in net.weights])
        return net


def batch_loss(qnet: QNetwork, states: np.ndarray, actions: np.ndarray, targets: np.ndarray) -> float:
    """MSE between Q(s)[a] and the stored rewards."""
    q = qnet.forward(states)
    picked = q[np.arange(len(actions)), actions]
    return float(np.mean((picked - targets) ** 2))


def batch_loss_and_grads(
    qnet: QNetwork, states: np.ndarray, actions: np.ndarray, targets: np.ndarray
) -> tuple[float, list[np.ndarray]]:
    """Loss plus analytic gradients, ordered like qnet.parameters()."""
    n = len(actions)
    hs = [np.asarray(states, dtype=float)]  # post-activation per layer
    zs = []  # pre-activation per layer
    last = len(qnet.weights) - 1
    h = hs[0]
    for i, (w, b) in enumerate(zip(qnet.weights, qnet.biases)):
        z = h @ w + b
        zs.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        hs.append(h)
    q = hs[-1]
    picked = q[np.arange(n), actions]
    diff = picked - targets
    loss = float(np.mean(diff**2))

    delta = np.zeros_like(q)
    delta[np.arange(n), actions] = 2.0 * diff / n
    grads: list[np.ndarray] = [None] * (2 * len(qnet.weights))
    for i in range(last, -1, -1):
        grads[2 * i] = hs[i].T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ qnet.weights[i].T) * (zs[i - 1] > 0.0)
    return loss, grads


class AdamOptimizer:
    def __init__(self, params: list[np.ndarray], lr: float):
        self.params = params
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        b1c = 1.0 - ADAM_BETA1**self.t
        b2c = 1.0 - ADAM_BETA2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + ADAM_EPS)


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float


class ReplayBuffer:
    """Ring buffer; at capacity the oldest transition is overwritten."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._items: list[Transition] = []
        self._next = 0

    def append(self, transition: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._next] = transition
        self._next = (self._next + 1) % self.capacity

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def sample(self, rng: np.random.Generator, k: int) -> list[Transition]:
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[i] for i in idx]


class AVAgent:
    """One deep-Q vehicle. Owns its network, buffer, and rng streams."""

    group = "av"

    def __init__(
        self,
        driver_id: str,
        od: OD,
        start_time: int,
        behavior: BehaviorWeights,
        seed_seq: np.random.SeedSequence,
        lr: float = 0.003,
        buffer_capacity: int = 256,
        batch_size: int = 32,
        epsilon: float = 0.99,
        epsilon_decay: float = 0.998,
        epsilon_min: float = 0.01,
        learning_enabled: bool = True,
    ):
        init_seq, policy_seq = seed_seq.spawn(2)
        self.driver_id = driver_id
        self.od = od
        self.start_time = start_time
        self.behavior = behavior
        self.qnet = QNetwork(np.random.default_rng(init_seq))
        self.optimizer = AdamOptimizer(self.qnet.parameters(), lr=lr)
        self.buffer = ReplayBuffer(buffer_capacity)
        self.batch_size = batch_size
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_min = epsilon_min
        self.rng = np.random.default_rng(policy_seq)
        self.learning_enabled = learning_enabled

    def act(self, state: np.ndarray) -> int:
        """Epsilon-greedy over Q estimates; greedy = argmin (costs), ties to
        the lowest index."""
        if len(state) != STATE_SIZE:
            raise ValueError(f"state must have length {STATE_SIZE}")
        if self.rng.random() < self.epsilon:
            return int(self.rng.integers(N_ACTIONS))
        return int(np.argmin(self.qnet.forward(np.asarray(state, dtype=float))))

    def store(self, state: np.ndarray, action: int, reward: float) -> None:
        self.buffer.append(Transition(np.asarray(state, dtype=float), action, float(reward)))

    def train_step(self) -> float | None:
        """One Adam update on a uniformly sampled batch; None until the
        buffer holds a full batch."""
        if not self.learning_enabled:
            return None
        if len(self.buffer) < self.batch_size:
            return None
        batch = self.buffer.sample(self.rng, self.batch_size)
        states = np.stack([tr.state for tr in batch])
        actions = np.array([tr.action for tr in batch])
        targets = np.array([tr.reward for tr in batch])
        loss, grads = batch_loss_and_grads(self.qnet, states, actions, targets)
        self.optimizer.step(grads)
        return loss

    def decay_epsilon(self) -> None:
        self.epsilon = max(self.epsilon_min, self.epsilon * self.epsilon_decay)
