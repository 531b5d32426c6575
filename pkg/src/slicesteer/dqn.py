"""Minimal value network machinery built directly on numpy.

Fully-connected ReLU net with a linear head, adaptive-moment updates, a
uniform ring replay buffer and a periodically synced target copy. Everything
is float64 and seeded, so training is bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class TrainingDiverged(RuntimeError):
    """Raised when a training loss stops being finite."""


@dataclass
class DqnHyperparams:
    learning_rate: float = 1e-4
    batch_size: int = 64
    target_sync_period: int = 100  # train steps between target copies
    discount: float = 0.9
    replay_capacity: int = 10_000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 1000  # linear ramp length in decisions

    def validate(self):
        if not 0.0 <= self.discount < 1.0:
            raise ValueError("discount must lie in [0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise ValueError("learning_rate/batch_size out of range")
        if self.target_sync_period < 1 or self.replay_capacity < self.batch_size:
            raise ValueError("target_sync_period/replay_capacity out of range")
        if not 0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0:
            raise ValueError("epsilon range must satisfy 0 <= end <= start <= 1")
        if self.epsilon_decay_steps < 1:
            raise ValueError("epsilon_decay_steps must be >= 1")


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    kpi_attributes: dict = field(default_factory=dict)


class MlpParams:
    """Weights and biases of one fully-connected net. weights[i] is (in, out)."""

    def __init__(self, weights, biases):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]

    @property
    def layer_sizes(self):
        sizes = [self.weights[0].shape[0]]
        sizes += [w.shape[1] for w in self.weights]
        return sizes

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights],
                         [b.copy() for b in self.biases])

    def copy_from(self, other: "MlpParams"):
        for mine, theirs in zip(self.weights, other.weights):
            mine[...] = theirs
        for mine, theirs in zip(self.biases, other.biases):
            mine[...] = theirs


def init_mlp(layer_sizes: Sequence[int], rng: np.random.Generator) -> MlpParams:
    """Uniform fan-in scaled init, zero biases."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Action values for a single state (1-D) or a batch (2-D)."""
    single = x.ndim == 1
    h = np.atleast_2d(np.asarray(x, dtype=float))
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            np.maximum(h, 0.0, out=h)
    return h[0] if single else h


def _forward_cached(params: MlpParams, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return h, acts, pre


class AdamState:
    """Per-tensor first and second moment accumulators."""

    def __init__(self, params: MlpParams, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def update(self, params: MlpParams, grads_w, grads_b, lr: float):
        self.t += 1
        b1, b2, eps = self.beta1, self.beta2, self.eps
        correction = np.sqrt(1.0 - b2 ** self.t) / (1.0 - b1 ** self.t)
        for i, g in enumerate(grads_w):
            self.m_w[i] = b1 * self.m_w[i] + (1 - b1) * g
            self.v_w[i] = b2 * self.v_w[i] + (1 - b2) * g * g
            params.weights[i] -= lr * correction * self.m_w[i] / (
                np.sqrt(self.v_w[i]) + eps)
        for i, g in enumerate(grads_b):
            self.m_b[i] = b1 * self.m_b[i] + (1 - b1) * g
            self.v_b[i] = b2 * self.v_b[i] + (1 - b2) * g * g
            params.biases[i] -= lr * correction * self.m_b[i] / (
                np.sqrt(self.v_b[i]) + eps)


def loss_and_grads(params: MlpParams, states: np.ndarray, actions: np.ndarray,
                   targets: np.ndarray):
    """Mean squared TD error on the taken actions plus exact gradients."""
    n = states.shape[0]
    q, acts, pre = _forward_cached(params, states)
    taken = q[np.arange(n), actions]
    err = taken - targets
    loss = float(np.mean(err ** 2))
    dq = np.zeros_like(q)
    dq[np.arange(n), actions] = 2.0 * err / n
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    delta = dq
    for i in range(len(params.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, grads_w, grads_b


def train_step(params: MlpParams, target: MlpParams, batch: Sequence[Transition],
               hp: DqnHyperparams, adam: AdamState) -> float:
    """One optimizer step on a replay batch; returns the pre-update loss."""
    states = np.stack([t.state for t in batch])
    actions = np.asarray([t.action for t in batch], dtype=int)
    rewards = np.asarray([t.reward for t in batch], dtype=float)
    next_states = np.stack([t.next_state for t in batch])
    q_next = forward(target, next_states)
    targets = rewards + hp.discount * q_next.max(axis=1)
    loss, grads_w, grads_b = loss_and_grads(params, states, actions, targets)
    if not np.isfinite(loss):
        raise TrainingDiverged(f"non-finite training loss {loss}")
    adam.update(params, grads_w, grads_b, hp.learning_rate)
    return loss


def select_action(q_values: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy pick; greedy ties resolve to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon out of [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


def epsilon_at(step: int, hp: DqnHyperparams) -> float:
    """Linear ramp from epsilon_start to epsilon_end over decay_steps."""
    frac = min(max(step, 0) / hp.epsilon_decay_steps, 1.0)
    return hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac


def sync_target(params: MlpParams, target: MlpParams, step: int,
                hp: DqnHyperparams):
    """Copy the online net into the target every target_sync_period steps."""
    if step % hp.target_sync_period == 0:
        target.copy_from(params)


class ReplayBuffer:
    """Fixed-capacity ring with uniform no-replacement sampling."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = capacity
        self._items: list = []
        self._cursor = 0

    def push(self, transition: Transition):
        if len(self._items) < self.capacity:
            self._items.append(transition)
        else:
            self._items[self._cursor] = transition
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, rng: np.random.Generator, n: int) -> list:
        if n > len(self._items):
            raise ValueError("not enough transitions buffered")
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]

    def __len__(self):
        return len(self._items)


def replay_push_and_sample(buffer: ReplayBuffer, transition: Transition,
                           rng: np.random.Generator,
                           batch_size: int) -> Optional[list]:
    """Push, then sample a batch once the buffer can fill one."""
    buffer.push(transition)
    if len(buffer) < batch_size:
        return None
    return buffer.sample(rng, batch_size)


_MAGIC = b"MLPV1\n"


def save_params(path, params: MlpParams):
    """Deterministic flat binary: magic, JSON shape header, row-major float64."""
    header = json.dumps({"layers": [list(w.shape) for w in params.weights]},
                        sort_keys=True).encode() + b"\n"
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(header)
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_params(path) -> MlpParams:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError(f"{path}: not a recognized checkpoint")
        header = json.loads(fh.readline().decode())
        weights, biases = [], []
        for fan_in, fan_out in header["layers"]:
            w = np.frombuffer(fh.read(8 * fan_in * fan_out), dtype="<f8")
            weights.append(w.reshape(fan_in, fan_out).copy())
            biases.append(np.frombuffer(fh.read(8 * fan_out), dtype="<f8").copy())
    return MlpParams(weights, biases)
