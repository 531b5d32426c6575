"""Per-slice TTI scheduler.

Priority is driven by a timeout threshold tau_th: users whose oldest packet
has waited at least tau_th jump the queue (most urgent first). The rest are
served throughput-first when channel quality is supplied, oldest-first
otherwise. Whole RBGs are granted round-robin down the priority order until
each buffer is covered at current rates or the slice pool runs dry.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .radio import ChannelRealization, Topology, UserBuffer, rb_rates, transmit_and_drain

_AGE_EPS = 1e-12  # guards float equality at exact multiples of the TTI


@dataclass
class Assignment:
    """RB grants for one slice and TTI: (user, oru) -> sorted RB tuple."""

    rbs: dict = field(default_factory=dict)

    def total_rbs(self) -> int:
        return sum(len(v) for v in self.rbs.values())

    def validate(self, max_rbs: int):
        seen_per_oru: dict = {}
        for (user, oru), rb_list in self.rbs.items():
            for rb in rb_list:
                key = (oru, rb)
                if key in seen_per_oru:
                    raise ValueError(f"rb {rb} assigned twice on oru {oru}")
                seen_per_oru[key] = user
        if self.total_rbs() > max_rbs:
            raise ValueError("assignment exceeds the slice RB budget")


def prioritize_buffers(buffers: Sequence[UserBuffer], tti: int, tau_th: float,
                       tti_duration: float,
                       channel_quality: Optional[Sequence[float]] = None) -> list:
    """Return user indices in service order for this TTI.

    Users at or past the timeout threshold come first, oldest first. Remaining
    non-empty users follow by descending channel_quality when given, else by
    descending age. Empty buffers sort last. Ties break on ascending index.
    """
    if tau_th <= 0:
        raise ValueError("tau_th must be positive")
    ages = [buf.head_age(tti, tti_duration) for buf in buffers]
    urgent, waiting, empty = [], [], []
    for idx, age in enumerate(ages):
        if age < 0:
            empty.append(idx)
        elif age >= tau_th - _AGE_EPS:
            urgent.append(idx)
        else:
            waiting.append(idx)
    urgent.sort(key=lambda i: (-ages[i], i))
    if channel_quality is not None:
        waiting.sort(key=lambda i: (-channel_quality[i], i))
    else:
        waiting.sort(key=lambda i: (-ages[i], i))
    return urgent + waiting + empty


def allocate_rbs(ordered_users: Sequence[int], buffers: Sequence[UserBuffer],
                 rbg_pool: Sequence[int], best_oru: Sequence[int],
                 ch: ChannelRealization, topology: Topology,
                 global_ids: Sequence[int]):
    """Grant whole RBGs from the slice pool until demand is covered.

    One pass hands each still-uncovered user (in priority order) a single RBG
    on its best-gain ORU; passes repeat while RBGs and uncovered demand both
    remain. Returns (Assignment, rates, capacity) where rates maps
    (user, oru) -> {rb: bits/s} and capacity maps user -> bits this TTI.
    """
    if len(rbg_pool) > topology.total_rbgs:
        raise ValueError("slice pool exceeds the system RBG count")
    assignment = Assignment()
    rates: dict = {}
    capacity: dict = {}
    demand = {}
    for idx in ordered_users:
        if buffers[idx].buffered_bits > 0:
            demand[idx] = buffers[idx].buffered_bits
            capacity[idx] = 0.0
    pool = list(rbg_pool)
    pos = 0
    while pos < len(pool):
        uncovered = [u for u in ordered_users
                     if u in demand and capacity[u] < demand[u]]
        if not uncovered:
            break
        for user in uncovered:
            if pos >= len(pool):
                break
            rbg = pool[pos]
            pos += 1
            rb_lo = rbg * topology.rbs_per_rbg
            rb_idx = np.arange(rb_lo, rb_lo + topology.rbs_per_rbg)
            oru = best_oru[user]
            per_rb = rb_rates(global_ids[user], oru, rb_idx, ch, topology)
            key = (user, oru)
            have = assignment.rbs.get(key, ())
            assignment.rbs[key] = tuple(have) + tuple(int(r) for r in rb_idx)
            link = rates.setdefault(key, {})
            for rb, rate in zip(rb_idx, per_rb):
                link[int(rb)] = float(rate)
            capacity[user] += float(per_rb.sum()) * topology.tti_duration
    return assignment, rates, capacity


@dataclass
class SliceTtiReport:
    assignment: Assignment
    utilization: int  # RBs granted this TTI
    drained_bits: dict  # user -> bits
    delays: list  # seconds for packets completed this TTI
    completed_users: list  # user index aligned with delays
    ordered_users: list


def schedule_tti(buffers: Sequence[UserBuffer], rbg_pool: Sequence[int],
                 tau_th: float, ch: ChannelRealization, topology: Topology,
                 tti: int, global_ids: Sequence[int],
                 pool_rb_indices: Optional[np.ndarray] = None) -> SliceTtiReport:
    """Run one slice through prioritize, allocate and drain for one TTI."""
    if pool_rb_indices is None:
        pool_rb_indices = np.concatenate([
            np.arange(g * topology.rbs_per_rbg, (g + 1) * topology.rbs_per_rbg)
            for g in rbg_pool]) if rbg_pool else np.arange(0)
    # mean gain over the slice's RBs per ORU decides the serving cell and the
    # throughput-first ordering of non-urgent users
    quality = []
    best = []
    for gid in global_ids:
        mean_gain = ch.gain[gid][:, pool_rb_indices].mean(axis=1)
        m = int(np.argmax(mean_gain))
        best.append(m)
        quality.append(float(mean_gain[m]))
    order = prioritize_buffers(buffers, tti, tau_th, topology.tti_duration,
                               channel_quality=quality)
    assignment, rates, _ = allocate_rbs(order, buffers, rbg_pool, best, ch,
                                        topology, global_ids)
    util = assignment.total_rbs()
    assignment.validate(len(rbg_pool) * topology.rbs_per_rbg)
    buffer_map = {i: buf for i, buf in enumerate(buffers)}
    report = transmit_and_drain(assignment.rbs, rates, buffer_map, tti, topology)
    return SliceTtiReport(assignment=assignment, utilization=util,
                          drained_bits=report.drained_bits,
                          delays=report.delays,
                          completed_users=[user for user, _ in report.completed],
                          ordered_users=order)
