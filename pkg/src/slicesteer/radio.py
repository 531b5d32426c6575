"""Radio environment: topology, traffic queues, fading channel, link rates.

Distance-based pathloss with i.i.d. unit-mean exponential fast fading per
(user, transmitter, resource block). Rates follow the Shannon bound on the
post-combining SINR; transmitters on disjoint blocks do not interfere.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class Topology:
    """Static cell layout and radio constants shared by every slice."""

    oru_positions: tuple  # ((x, y), ...) metres
    num_users_per_slice: int = 3
    tx_power_per_rb: float = 0.2  # W
    noise_power: float = 7.2e-16  # W over one RB
    pathloss_exponent: float = 4.0
    pathloss_ref_gain: float = 1e-4  # channel gain at 1 m
    rb_bandwidth: float = 180e3  # Hz
    rbs_per_rbg: int = 6
    total_rbgs: int = 14
    tti_duration: float = 1e-3  # s
    processing_delay: float = 1e-4  # s, added to every completed packet
    min_distance: float = 1.0  # m, distances are clamped below this

    @property
    def num_orus(self) -> int:
        return len(self.oru_positions)

    @property
    def total_rbs(self) -> int:
        return self.total_rbgs * self.rbs_per_rbg

    def validate(self):
        if self.num_orus < 1:
            raise ValueError("topology.oru_positions: need at least one ORU")
        if self.num_users_per_slice < 1:
            raise ValueError("topology.num_users_per_slice: must be >= 1")
        for name in ("tx_power_per_rb", "noise_power", "pathloss_ref_gain",
                     "rb_bandwidth", "tti_duration", "min_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"topology.{name}: must be positive")
        if self.pathloss_exponent <= 0:
            raise ValueError("topology.pathloss_exponent: must be positive")
        if self.rbs_per_rbg < 1 or self.total_rbgs < 1:
            raise ValueError("topology.rbs_per_rbg/total_rbgs: must be >= 1")
        if self.processing_delay < 0:
            raise ValueError("topology.processing_delay: must be >= 0")


@dataclass(frozen=True)
class SliceProfile:
    """QoS targets, traffic pattern and scheduler knobs for one slice."""

    kind: str  # "embb" | "urllc" | "mmtc"
    r_min: float  # bits/s per user
    d_max: float  # s
    arrival_period: float  # s between packets per user
    packet_size: int  # bits
    tau_min: float  # s, smallest timeout threshold the agent may pick
    tau_max: float  # s
    tau_step: float  # s, grid spacing including both endpoints
    alpha: float = -0.5  # weight of peak utilization in the window reward
    beta: float = 1.0  # weight of normalized throughput in the window reward
    initial_rbgs: int = 1
    user_positions: tuple = ()

    def validate(self):
        if self.kind not in ("embb", "urllc", "mmtc"):
            raise ValueError(f"slice kind {self.kind!r}: expected embb/urllc/mmtc")
        prefix = f"slices.{self.kind}"
        for name in ("r_min", "d_max", "arrival_period", "tau_step"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{prefix}.{name}: must be positive")
        if self.packet_size < 1:
            raise ValueError(f"{prefix}.packet_size: must be >= 1 bit")
        if self.tau_min <= 0 or self.tau_max < self.tau_min:
            raise ValueError(f"{prefix}.tau_min/tau_max: need 0 < tau_min <= tau_max")
        span = self.tau_max - self.tau_min
        steps = span / self.tau_step
        if abs(steps - round(steps)) > 1e-6:
            raise ValueError(f"{prefix}.tau_step: must divide tau_max - tau_min")
        if self.initial_rbgs < 1:
            raise ValueError(f"{prefix}.initial_rbgs: must be >= 1")
        if not self.user_positions:
            raise ValueError(f"{prefix}.user_positions: must not be empty")


@dataclass
class Packet:
    size: int  # bits as generated
    arrival_tti: int
    bits_remaining: float
    depart_tti: Optional[int] = None


class UserBuffer:
    """FIFO packet queue for one user."""

    def __init__(self):
        self.queue: deque[Packet] = deque()
        self.buffered_bits: float = 0.0

    def push(self, packet: Packet):
        self.queue.append(packet)
        self.buffered_bits += packet.bits_remaining

    def head_age(self, tti: int, tti_duration: float) -> float:
        """Waiting time of the oldest packet, seconds. -1.0 when empty."""
        if not self.queue:
            return -1.0
        return (tti - self.queue[0].arrival_tti) * tti_duration

    def __len__(self):
        return len(self.queue)


@dataclass
class ChannelRealization:
    """Per-TTI channel gains, indexed [user, oru, rb]. Gains are linear power."""

    gain: np.ndarray
    tti: int = 0


def _arrivals_by_end(tti: int, tti_ns: int, period_ns: int) -> int:
    # number of arrival instants j*period in [0, (tti+1)*tti_duration)
    horizon = (tti + 1) * tti_ns
    return (horizon - 1) // period_ns + 1


def generate_traffic(tti: int, profile: SliceProfile, buffers: Sequence[UserBuffer],
                     topology: Topology) -> int:
    """Append this TTI's periodic arrivals to every user queue.

    Arrival instants sit at integer multiples of the period starting at t=0;
    a packet whose instant falls inside [tti, tti+1) joins the queue now.
    Returns total bits added across users.
    """
    if tti < 0:
        raise ValueError("tti must be >= 0")
    tti_ns = round(topology.tti_duration * 1e9)
    period_ns = round(profile.arrival_period * 1e9)
    if period_ns <= 0:
        raise ValueError("arrival_period too small")
    n_end = _arrivals_by_end(tti, tti_ns, period_ns)
    n_start = _arrivals_by_end(tti - 1, tti_ns, period_ns) if tti > 0 else 0
    count = n_end - n_start
    added = 0
    for buf in buffers:
        for _ in range(count):
            buf.push(Packet(profile.packet_size, tti, float(profile.packet_size)))
            added += profile.packet_size
    return added


def pathloss_gain(distance: float, topology: Topology) -> float:
    """Mean channel gain at the given distance (no fading)."""
    d = max(distance, topology.min_distance)
    return topology.pathloss_ref_gain * d ** (-topology.pathloss_exponent)


def distance_matrix(user_positions: np.ndarray, topology: Topology) -> np.ndarray:
    """Euclidean distances [user, oru], clamped to min_distance."""
    users = np.asarray(user_positions, dtype=float)
    orus = np.asarray(topology.oru_positions, dtype=float)
    diff = users[:, None, :] - orus[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    return np.maximum(dist, topology.min_distance)


def sample_channel(rng: np.random.Generator, topology: Topology,
                   user_positions: np.ndarray, tti: int = 0) -> ChannelRealization:
    """Draw one TTI of gains: pathloss times unit-mean exponential fading.

    The fading draw consumes exactly one (K, M, N) exponential block from rng,
    so channel consumption per TTI is fixed regardless of scheduling.
    """
    dist = distance_matrix(user_positions, topology)
    pl = topology.pathloss_ref_gain * dist ** (-topology.pathloss_exponent)
    fading = rng.exponential(1.0, size=(dist.shape[0], dist.shape[1], topology.total_rbs))
    return ChannelRealization(gain=pl[:, :, None] * fading, tti=tti)


class ChannelModel:
    """Caches the pathloss matrix so per-TTI sampling is a single fading draw."""

    def __init__(self, topology: Topology, user_positions: np.ndarray):
        self.topology = topology
        self._pl = topology.pathloss_ref_gain * (
            distance_matrix(user_positions, topology) ** (-topology.pathloss_exponent))

    def sample(self, rng: np.random.Generator, tti: int = 0) -> ChannelRealization:
        k, m = self._pl.shape
        fading = rng.exponential(1.0, size=(k, m, self.topology.total_rbs))
        return ChannelRealization(gain=self._pl[:, :, None] * fading, tti=tti)


def link_rate(user: int, oru: int, rb: int, ch: ChannelRealization,
              topology: Topology, active_orus: Sequence[int] = ()) -> float:
    """Shannon-bound rate in bits/s for one (user, oru, rb) link.

    active_orus lists transmitters busy on this RB this TTI; every listed ORU
    other than the serving one contributes interference at full RB power.
    """
    g = ch.gain
    if not (0 <= user < g.shape[0] and 0 <= oru < g.shape[1] and 0 <= rb < g.shape[2]):
        raise ValueError("link_rate: user/oru/rb index out of range")
    p = topology.tx_power_per_rb
    signal = p * g[user, oru, rb]
    interference = 0.0
    for other in active_orus:
        if other != oru:
            interference += p * g[user, other, rb]
    sinr = signal / (interference + topology.noise_power)
    return topology.rb_bandwidth * math.log2(1.0 + sinr)


def rb_rates(user: int, oru: int, rbs: np.ndarray, ch: ChannelRealization,
             topology: Topology) -> np.ndarray:
    """Vectorized interference-free link_rate over many RBs for one link."""
    snr = topology.tx_power_per_rb * ch.gain[user, oru, rbs] / topology.noise_power
    return topology.rb_bandwidth * np.log2(1.0 + snr)


@dataclass
class DrainReport:
    drained_bits: dict  # user -> bits moved out this TTI
    completed: list  # (user, Packet) pairs that emptied this TTI
    delays: list = field(default_factory=list)  # seconds, aligned with completed


def transmit_and_drain(assignment, rates, buffers, tti: int,
                       topology: Topology) -> DrainReport:
    """Serve FIFO queues with this TTI's allocated capacity.

    assignment maps (user, oru) -> iterable of RB indices; rates maps
    (user, oru) -> {rb: bits/s}. Leftover capacity after a queue empties is
    discarded. Completed packets get depart_tti stamped and a delay of
    (depart - arrival) * tti_duration + processing_delay.
    """
    capacity: dict = {}
    for (user, oru), rbs in assignment.items():
        if user not in buffers:
            raise ValueError(f"assignment references unknown user {user}")
        link = rates[(user, oru)]
        got = sum(link[rb] for rb in rbs) * topology.tti_duration
        capacity[user] = capacity.get(user, 0.0) + got

    drained = {user: 0.0 for user in buffers}
    completed = []
    delays = []
    for user, cap in capacity.items():
        buf = buffers[user]
        while cap > 0.0 and buf.queue:
            pkt = buf.queue[0]
            bite = min(pkt.bits_remaining, cap)
            pkt.bits_remaining -= bite
            cap -= bite
            drained[user] += bite
            buf.buffered_bits -= bite
            if pkt.bits_remaining <= 0.0:
                pkt.depart_tti = tti
                buf.queue.popleft()
                completed.append((user, pkt))
                delays.append((tti - pkt.arrival_tti) * topology.tti_duration
                              + topology.processing_delay)
        if buf.buffered_bits < 1e-9:
            buf.buffered_bits = 0.0 if not buf.queue else buf.buffered_bits
    return DrainReport(drained_bits=drained, completed=completed, delays=delays)
