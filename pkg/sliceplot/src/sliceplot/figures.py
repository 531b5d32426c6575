"""Figure builders: survival curves per scenario and reward convergence."""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from matplotlib.figure import Figure

from . import tables

METRIC_COLUMNS = {
    "throughput": "r_avg",
    "delay": "d_avg",
    "u_max": "u_max",
    "reward": "reward",
}


@dataclass(frozen=True)
class PlotSpec:
    """One figure request: scenario trace paths, a metric, an image path."""

    inputs: tuple
    metric: str
    output: str
    labels: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not self.inputs:
            raise ValueError("at least one input trace is required")
        if self.metric not in METRIC_COLUMNS:
            raise ValueError(
                f"metric {self.metric!r}: expected one of "
                f"{'/'.join(sorted(METRIC_COLUMNS))}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.inputs):
                raise ValueError("labels must match inputs one to one")


def scenario_labels(spec: PlotSpec) -> tuple:
    """Explicit labels, or directory names with a fallback to file stems."""
    if spec.labels is not None:
        return spec.labels
    names = []
    for i, raw in enumerate(spec.inputs):
        p = Path(raw)
        name = p.parent.name or p.stem
        if name in names:
            name = f"{name}#{i}"
        names.append(name)
    return tuple(names)


def build_eccdf(spec: PlotSpec):
    """Returns (figure, {label: (values, survival)}), one curve per input."""
    column = METRIC_COLUMNS[spec.metric]
    curves = {}
    for label, raw in zip(scenario_labels(spec), spec.inputs):
        header, rows = tables.read_trace(raw)
        samples = tables.numeric_column(header, rows, column)
        curves[label] = tables.eccdf_table(samples)

    fig = Figure(figsize=(6.4, 4.2))
    ax = fig.subplots()
    for label, (values, survival) in curves.items():
        ax.plot(values, survival, drawstyle="steps-post", label=label)
    ax.set_xlabel(column)
    ax.set_ylabel("ECCDF  P(X > x)")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return fig, curves


def plot_eccdf(spec: PlotSpec) -> Path:
    """Render the survival figure and export one point table per scenario."""
    fig, curves = build_eccdf(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    for label, (values, survival) in curves.items():
        tables.write_points(out.with_suffix(f".{label}.points.csv"),
                            values, survival)
    return out


def _series_by_agent(header, rows, path):
    """(window, reward) pairs per agent; traces without a slice column are
    one anonymous agent."""
    for needed in ("window", "reward"):
        if needed not in header:
            raise KeyError(needed)
    split = "slice" in header
    series: dict = {}
    for row in rows:
        if row["reward"] == "":
            continue
        key = row["slice"] if split else "agent"
        series.setdefault(key, []).append(
            (float(row["window"]), float(row["reward"])))
    if not series:
        raise ValueError(f"column 'reward' has no samples in {path}")
    return series


def _moving_average(values: np.ndarray, span: int) -> np.ndarray:
    kernel = np.full(span, 1.0 / span)
    return np.convolve(values, kernel, mode="valid")


def build_convergence(spec: PlotSpec, ma_span: int = 50,
                      agents: Optional[list] = None):
    """Reward-vs-window panels, one per agent, raw plus smoothed overlay."""
    if spec.metric != "reward":
        raise ValueError("convergence figures plot the reward metric")
    if len(spec.inputs) != 1:
        raise ValueError("convergence figures read exactly one trace")
    if ma_span < 1:
        raise ValueError("moving-average span must be >= 1")
    header, rows = tables.read_trace(spec.inputs[0])
    series = _series_by_agent(header, rows, spec.inputs[0])
    if agents:
        missing = [a for a in agents if a not in series]
        if missing:
            raise ValueError(f"agents not in trace: {', '.join(missing)}")
        series = {a: series[a] for a in agents}

    fig = Figure(figsize=(6.4, 1.0 + 2.2 * len(series)))
    axes = fig.subplots(len(series), 1, sharex=True, squeeze=False)[:, 0]
    panels = {}
    for ax, (name, pairs) in zip(axes, series.items()):
        windows = np.asarray([w for w, _ in pairs])
        rewards = np.asarray([r for _, r in pairs])
        ax.plot(windows, rewards, linewidth=0.6, alpha=0.6, label="reward")
        smoothed = None
        if len(rewards) >= ma_span:
            smoothed = _moving_average(rewards, ma_span)
            ax.plot(windows[ma_span - 1:], smoothed, linewidth=1.8,
                    label=f"{ma_span}-window mean")
        ax.set_ylabel(name)
        ax.grid(True, alpha=0.3)
        panels[name] = (windows, rewards, smoothed)
    axes[0].legend(loc="lower right", fontsize="small")
    axes[-1].set_xlabel("window")
    fig.tight_layout()
    return fig, panels


def plot_convergence(spec: PlotSpec, ma_span: int = 50,
                     agents: Optional[list] = None) -> Path:
    fig, _ = build_convergence(spec, ma_span=ma_span, agents=agents)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    return out
