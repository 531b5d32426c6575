"""Slice KPIs aggregated over scheduling windows.

Conventions: throughput is normalized by the slice rate floor (>= 1 meets the
target) and delay by the slice budget as d_max / observed (also >= 1 when
met), so both KPIs read higher-is-better.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class TtiRecord:
    """One slice-TTI of raw observations feeding the window aggregates."""

    tti: int
    slice_kind: str
    utilization: int
    drained_bits: dict  # user -> bits
    delays: tuple = ()  # completed-packet delays, seconds


@dataclass
class WindowKpis:
    """Aggregated KPIs for one slice over one agent window."""

    slice_kind: str
    window: int
    tti_start: int
    u_max: int
    delta: float
    r_avg: float
    d_avg: Optional[float]  # None when no packet completed in the window
    qos_fraction: float
    flags: tuple = ()


def slice_utilization(assignment) -> int:
    """Total RBs granted in one slice-TTI: sum over users and ORUs."""
    return sum(len(rbs) for rbs in assignment.rbs.values())


def window_max_utilization(utilizations: Sequence[int]) -> int:
    """Peak per-TTI utilization over a window."""
    if len(utilizations) == 0:
        raise ValueError("window_max_utilization: empty window")
    return int(max(utilizations))


def utilization_variation(u_max: float, history: Sequence[float]) -> float:
    """Relative excursion of the current peak above its sliding history mean."""
    if len(history) == 0:
        raise ValueError("utilization_variation: empty history")
    psi = float(np.mean(history))
    if psi <= 0.0:
        log.debug("utilization history mean is zero; reporting no variation")
        return 0.0
    return (u_max - psi) / psi


def normalized_throughput_avg(user_rates: Sequence[float], r_min: float) -> float:
    """Mean over users of achieved rate over the slice rate floor."""
    if r_min <= 0:
        raise ValueError("normalized_throughput_avg: r_min must be positive")
    if len(user_rates) == 0:
        raise ValueError("normalized_throughput_avg: no users")
    return float(np.mean([r / r_min for r in user_rates]))


def normalized_delay_avg(user_mean_delays: Sequence[Optional[float]],
                         d_max: float) -> float:
    """Mean over users of d_max / mean delay; users with no packets are skipped.

    Raises when every user is skipped, so callers can flag an idle window.
    """
    if d_max <= 0:
        raise ValueError("normalized_delay_avg: d_max must be positive")
    scores = [d_max / d for d in user_mean_delays if d is not None and d > 0]
    if not scores:
        raise ValueError("normalized_delay_avg: no completed packets")
    return float(np.mean(scores))


def qos_indicator(r_norm: float, d_norm: float) -> int:
    """1 iff both normalized KPIs reach their floor of one."""
    return int(r_norm >= 1.0 and d_norm >= 1.0)


@dataclass
class EccdfCurve:
    """Empirical complementary CDF: fraction of samples strictly above x."""

    values: np.ndarray  # sorted unique sample values
    survival: np.ndarray  # fraction of samples > values[i]
    n_samples: int = 0

    def at(self, x: float) -> float:
        idx = int(np.searchsorted(self.values, x, side="right")) - 1
        if idx < 0:
            return 1.0
        return float(self.survival[idx])


def eccdf(samples: Sequence[float]) -> EccdfCurve:
    """Build the survival curve over the sample set."""
    arr = np.sort(np.asarray(list(samples), dtype=float))
    if arr.size == 0:
        raise ValueError("eccdf: empty sample set")
    values, counts = np.unique(arr, return_counts=True)
    n = arr.size
    cumulative = np.cumsum(counts)
    survival = (n - cumulative) / n
    return EccdfCurve(values=values, survival=survival, n_samples=n)


def build_window_kpis(slice_kind: str, window: int, tti_start: int,
                      utilizations: Sequence[int],
                      drained_per_user: Sequence[float],
                      delays_per_user: Sequence[Sequence[float]],
                      window_duration: float, r_min: float, d_max: float,
                      psi_history: Sequence[float]) -> WindowKpis:
    """Fold one window of raw per-TTI observations into KPIs.

    delta falls back to zero (flagged) while the peak-utilization history is
    still empty; d_avg is None (flagged) when no packet completed.
    """
    flags = []
    u_max = window_max_utilization(utilizations)
    if len(psi_history) == 0:
        delta = 0.0
        flags.append("no_history")
    else:
        delta = utilization_variation(u_max, psi_history)
    rates = [bits / window_duration for bits in drained_per_user]
    r_avg = normalized_throughput_avg(rates, r_min)
    mean_delays = [float(np.mean(d)) if len(d) else None for d in delays_per_user]
    try:
        d_avg = normalized_delay_avg(mean_delays, d_max)
    except ValueError:
        d_avg = None
        flags.append("no_completions")
    met = 0
    for rate, md in zip(rates, mean_delays):
        d_norm = (d_max / md) if md else 0.0
        met += qos_indicator(rate / r_min, d_norm)
    qos_fraction = met / len(rates)
    return WindowKpis(slice_kind=slice_kind, window=window, tti_start=tti_start,
                      u_max=u_max, delta=delta, r_avg=r_avg, d_avg=d_avg,
                      qos_fraction=qos_fraction, flags=tuple(flags))
