"""Decision agents for both control loops.

Per-slice agents pick the scheduler's timeout threshold every few TTIs from
channel and backlog observations; one system agent re-partitions the RBG
budget across slices on a slower cadence. Both share the same value-network
plumbing and the same optional action-steering hook.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import dqn, xrl
from .metrics import WindowKpis
from .radio import SliceProfile

log = logging.getLogger(__name__)

SLICE_ORDER = ("embb", "urllc", "mmtc")


def intra_action_space(profile: SliceProfile) -> list:
    """Timeout-threshold grid in seconds, both endpoints included."""
    n = round((profile.tau_max - profile.tau_min) / profile.tau_step)
    return [profile.tau_min + i * profile.tau_step for i in range(n + 1)]


def intra_state_vector(mean_gains: np.ndarray, buffered_bits: Sequence[float],
                       gain_normalizer: float, buffer_normalizer: float) -> np.ndarray:
    """Flatten per-(user, ORU) mean gains then per-user backlog, both scaled.

    mean_gains is (users, orus); the result has users*orus + users entries.
    """
    gains = np.asarray(mean_gains, dtype=float)
    if gains.ndim != 2:
        raise ValueError("mean_gains must be a (users, orus) matrix")
    if len(buffered_bits) != gains.shape[0]:
        raise ValueError("buffered_bits length must match the user count")
    return np.concatenate([
        gains.reshape(-1) * gain_normalizer,
        np.asarray(buffered_bits, dtype=float) / buffer_normalizer,
    ])


def intra_reward(u_max: int, r_avg: float, profile: SliceProfile,
                 slice_rbs: int) -> float:
    """Window reward: alpha * peak utilization share + beta * normalized rate."""
    if slice_rbs < 1:
        raise ValueError("slice_rbs must be >= 1")
    return profile.alpha * (u_max / slice_rbs) + profile.beta * r_avg


def enumerate_rbg_combinations(total: int, slices: int, minimum: int) -> list:
    """All ordered splits of `total` RBGs into `slices` parts >= minimum.

    Lexicographically ascending, so action indices are stable.
    """
    if slices < 1 or minimum < 0 or total < slices * minimum:
        raise ValueError("infeasible combination request")
    out = []

    def rec(prefix, remaining, left):
        if left == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for take in range(minimum, remaining - minimum * (left - 1) + 1):
            rec(prefix + [take], remaining - take, left - 1)

    rec([], total, slices)
    return out


def inter_state_vector(kpis: dict, total_rbs: int) -> np.ndarray:
    """Per-slice [r_avg, u_max share, delta] stacked in fixed slice order."""
    parts = []
    for kind in SLICE_ORDER:
        if kind not in kpis:
            raise ValueError(f"missing slice KPIs for {kind}")
        k: WindowKpis = kpis[kind]
        parts.extend([k.r_avg, k.u_max / total_rbs, k.delta])
    return np.asarray(parts, dtype=float)


def inter_reward(kpis: dict) -> float:
    """Sum over slices of normalized throughput minus the delay penalty.

    The penalty is the reciprocal of the higher-is-better delay score; a
    window with no completed packets contributes no penalty.
    """
    total = 0.0
    for kind in SLICE_ORDER:
        k: WindowKpis = kpis[kind]
        penalty = (1.0 / k.d_avg) if (k.d_avg is not None and k.d_avg > 0) else 0.0
        total += k.r_avg - penalty
    return total


@dataclass
class BoundaryOutcome:
    """What one window-boundary decision produced, for traces and control."""

    action_index: int
    epsilon: float
    steered: bool
    loss: Optional[float]
    reward: Optional[float]  # reward of the window just closed
    explanation: Optional[xrl.ExplanationRecord]


class AgentRunner:
    """Shared boundary logic: learn from the closed window, pick the next action."""

    def __init__(self, name: str, n_actions: int, state_dim: int,
                 hidden_sizes: Sequence[int], hp: dqn.DqnHyperparams,
                 init_rng: np.random.Generator,
                 explore_rng: np.random.Generator,
                 replay_rng: np.random.Generator,
                 steering: str = "none", trainable: bool = True,
                 train_steps_per_window: int = 1,
                 greedy_warmup_steps: int = 1,
                 params: Optional[dqn.MlpParams] = None,
                 action_labels: Optional[list] = None,
                 default_action: Optional[int] = None):
        hp.validate()
        if steering not in xrl.PROCEDURES:
            raise ValueError(f"unknown steering procedure {steering!r}")
        self.name = name
        self.hp = hp
        sizes = [state_dim] + list(hidden_sizes) + [n_actions]
        self.params = params if params is not None else dqn.init_mlp(sizes, init_rng)
        self.target = self.params.copy()
        self.adam = dqn.AdamState(self.params)
        self.replay = dqn.ReplayBuffer(hp.replay_capacity)
        self.explore_rng = explore_rng
        self.replay_rng = replay_rng
        self.steering = steering
        self.trainable = trainable
        self.train_steps_per_window = train_steps_per_window
        if greedy_warmup_steps < 0:
            raise ValueError("greedy_warmup_steps must be >= 0")
        self.greedy_warmup_steps = greedy_warmup_steps
        self.graph = xrl.AttributedGraph()
        self.action_labels = action_labels
        self.n_actions = n_actions
        if default_action is not None and not 0 <= default_action < n_actions:
            raise ValueError(f"default_action {default_action} out of range")
        self.default_action = default_action
        self.decisions = 0
        self.train_steps = 0
        self.pending: Optional[tuple] = None  # (state, executed action)
        self.last_completed: Optional[int] = None

    # -- learning ---------------------------------------------------------

    def complete_window(self, reward: float, next_state: np.ndarray,
                        kpi_attributes: dict) -> Optional[float]:
        """Close the pending window: graph update, replay push, train."""
        if self.pending is None:
            return None
        state, action = self.pending
        transition = dqn.Transition(state, action, reward, next_state,
                                    kpi_attributes)
        xrl.update_graph(self.graph, transition, prev_action=self.last_completed)
        self.last_completed = action
        self.pending = None
        if not self.trainable:
            return None
        batch = dqn.replay_push_and_sample(self.replay, transition,
                                           self.replay_rng, self.hp.batch_size)
        if batch is None:
            return None
        losses = []
        for i in range(self.train_steps_per_window):
            if i > 0:
                batch = self.replay.sample(self.replay_rng, self.hp.batch_size)
            dqn.sync_target(self.params, self.target, self.train_steps, self.hp)
            losses.append(dqn.train_step(self.params, self.target, batch,
                                         self.hp, self.adam))
            self.train_steps += 1
        return float(np.mean(losses))

    # -- acting -----------------------------------------------------------

    def decide(self, window: int, state: np.ndarray,
               forced: Optional[int] = None):
        """Pick the next window's action (possibly steered); returns
        (action_index, epsilon, steered_flag, explanation)."""
        if window != self.decisions:
            raise ValueError(
                f"{self.name}: boundary called off-schedule "
                f"(window {window}, expected {self.decisions})")
        epsilon = dqn.epsilon_at(self.decisions, self.hp) if self.trainable else 0.0
        if forced is not None:
            self.pending = (state, int(forced))
            self.decisions += 1
            return int(forced), epsilon, False, None
        q = dqn.forward(self.params, state)
        proposed = dqn.select_action(q, epsilon, self.explore_rng)
        if (self.trainable and self.default_action is not None
                and self.train_steps < self.greedy_warmup_steps
                and proposed == int(np.argmax(q))):
            # a barely-trained value head ranks actions by init noise;
            # hold the provisioned action until it has had a real
            # optimization budget
            proposed = self.default_action
        explanation = None
        executed = proposed
        if self.steering != "none":
            try:
                executed = xrl.steer(self.steering, self.graph, proposed)
            except Exception:
                log.exception("%s: steering failed; keeping the proposed action",
                              self.name)
                executed = proposed
            explanation = xrl.explain_action(
                self.graph, window, self.name, self.steering, proposed,
                executed, labels=self.action_labels)
        self.pending = (state, executed)
        self.decisions += 1
        return executed, epsilon, executed != proposed, explanation
