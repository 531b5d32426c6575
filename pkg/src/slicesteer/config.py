"""Run configuration: defaults, JSON loading and validation.

Every tunable lives here; nothing numeric is buried in the simulator. The
default layout tiers the three slices by distance (broadband users close to
the cells, latency users mid-range, sensor users at the edge) so each slice
sits near its QoS boundary and the schedulers have real trade-offs to make.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Optional

from .dqn import DqnHyperparams
from .radio import SliceProfile, Topology
from .xrl import PROCEDURES

SLICE_ORDER = ("embb", "urllc", "mmtc")
AGENT_NAMES = SLICE_ORDER + ("inter",)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass
class AgentConfig:
    hidden_sizes: tuple
    learning_rate: float = 1e-4
    batch_size: int = 64
    target_sync_period: int = 100
    discount: float = 0.9
    replay_capacity: int = 10_000
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5  # share of the run's windows
    train_steps_per_window: int = 8
    greedy_warmup_steps: int = 1000  # hold the default action until this many optimizer steps

    def hyperparams(self, total_windows: int) -> DqnHyperparams:
        decay = max(1, int(round(self.epsilon_decay_fraction * total_windows)))
        return DqnHyperparams(
            learning_rate=self.learning_rate, batch_size=self.batch_size,
            target_sync_period=self.target_sync_period, discount=self.discount,
            replay_capacity=self.replay_capacity,
            epsilon_start=self.epsilon_start, epsilon_end=self.epsilon_end,
            epsilon_decay_steps=decay)


@dataclass
class SimConfig:
    seed: int
    total_ttis: int
    intra_window_ttis: int
    inter_window_ttis: int
    topology: Topology
    slices: dict  # kind -> SliceProfile
    intra_agent: AgentConfig
    inter_agent: AgentConfig
    steering: dict = field(default_factory=dict)  # agent name -> procedure
    inter_mode: str = "online"  # "online" | "frozen"
    inter_checkpoint: Optional[str] = None
    gain_normalizer: float = 1e12
    buffer_bits_normalizer: float = 1e6
    psi_history_windows: int = 50

    def validate(self):
        if self.seed < 0:
            raise ConfigError("seed: must be >= 0")
        if self.total_ttis < 1:
            raise ConfigError("total_ttis: must be >= 1")
        if self.intra_window_ttis < 1 or self.inter_window_ttis < 1:
            raise ConfigError("intra_window_ttis/inter_window_ttis: must be >= 1")
        if self.inter_window_ttis % self.intra_window_ttis != 0:
            raise ConfigError(
                "inter_window_ttis: must be a multiple of intra_window_ttis")
        if self.total_ttis % self.inter_window_ttis != 0:
            raise ConfigError("total_ttis: must be a multiple of inter_window_ttis")
        try:
            self.topology.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if set(self.slices) != set(SLICE_ORDER):
            raise ConfigError(f"slices: need exactly {SLICE_ORDER}")
        total_initial = 0
        for kind in SLICE_ORDER:
            profile = self.slices[kind]
            try:
                profile.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            if len(profile.user_positions) != self.topology.num_users_per_slice:
                raise ConfigError(
                    f"slices.{kind}.user_positions: expected "
                    f"{self.topology.num_users_per_slice} entries")
            total_initial += profile.initial_rbgs
        if total_initial != self.topology.total_rbgs:
            raise ConfigError(
                f"slices.*.initial_rbgs: sum {total_initial} != "
                f"topology.total_rbgs {self.topology.total_rbgs}")
        for name in AGENT_NAMES:
            proc = self.steering.get(name, "none")
            if proc not in PROCEDURES:
                raise ConfigError(
                    f"steering.{name}: {proc!r} not one of {PROCEDURES}")
        if self.inter_mode not in ("online", "frozen"):
            raise ConfigError("inter_mode: must be 'online' or 'frozen'")
        if self.inter_mode == "frozen" and not self.inter_checkpoint:
            raise ConfigError("inter_checkpoint: required when inter_mode=frozen")
        for agent_key, agent in (("intra_agent", self.intra_agent),
                                 ("inter_agent", self.inter_agent)):
            try:
                agent.hyperparams(1000).validate()
            except ValueError as exc:
                raise ConfigError(f"{agent_key}: {exc}") from exc
            if agent.train_steps_per_window < 1:
                raise ConfigError(f"{agent_key}.train_steps_per_window: must be >= 1")
            if agent.greedy_warmup_steps < 0:
                raise ConfigError(f"{agent_key}.greedy_warmup_steps: must be >= 0")
            if not 0 < agent.epsilon_decay_fraction <= 1:
                raise ConfigError(
                    f"{agent_key}.epsilon_decay_fraction: must lie in (0, 1]")
        if self.gain_normalizer <= 0 or self.buffer_bits_normalizer <= 0:
            raise ConfigError("gain_normalizer/buffer_bits_normalizer: must be > 0")
        if self.psi_history_windows < 1:
            raise ConfigError("psi_history_windows: must be >= 1")

    @property
    def intra_windows(self) -> int:
        return self.total_ttis // self.intra_window_ttis

    @property
    def inter_windows(self) -> int:
        return self.total_ttis // self.inter_window_ttis


def default_dict() -> dict:
    """The repo default scenario as a plain JSON-compatible dict."""
    return {
        "seed": 36,
        "total_ttis": 20_000,
        "intra_window_ttis": 10,
        "inter_window_ttis": 200,
        "gain_normalizer": 1e12,
        "buffer_bits_normalizer": 1e6,
        "psi_history_windows": 50,
        "inter_mode": "online",
        "inter_checkpoint": None,
        "steering": {name: "none" for name in AGENT_NAMES},
        "topology": {
            "oru_positions": [[0.0, 0.0], [300.0, 0.0], [150.0, 260.0]],
            "num_users_per_slice": 3,
            "tx_power_per_rb": 0.2,
            "noise_power": 7.2e-16,
            "pathloss_exponent": 4.0,
            "pathloss_ref_gain": 1e-4,
            "rb_bandwidth": 180e3,
            "rbs_per_rbg": 6,
            "total_rbgs": 14,
            "tti_duration": 1e-3,
            "processing_delay": 1e-4,
            "min_distance": 1.0,
        },
        "slices": {
            "embb": {
                "r_min": 16e6, "d_max": 10e-3,
                "arrival_period": 0.5e-3, "packet_size": 8192,
                "tau_min": 5e-3, "tau_max": 20e-3, "tau_step": 2.5e-3,
                "alpha": -0.5, "beta": 1.0, "initial_rbgs": 4,
                "user_positions": [[-17.0, 0.0], [318.0, 0.0], [150.0, 279.0]],
            },
            "urllc": {
                "r_min": 3.8e6, "d_max": 2e-3,
                "arrival_period": 1e-3, "packet_size": 3840,
                "tau_min": 1e-3, "tau_max": 4e-3, "tau_step": 0.5e-3,
                "alpha": -0.5, "beta": 1.0, "initial_rbgs": 5,
                "user_positions": [[0.0, -120.0], [300.0, -150.0], [150.0, 440.0]],
            },
            "mmtc": {
                "r_min": 0.5e6, "d_max": 20e-3,
                "arrival_period": 0.5e-3, "packet_size": 256,
                "tau_min": 10e-3, "tau_max": 40e-3, "tau_step": 5e-3,
                "alpha": -0.5, "beta": 1.0, "initial_rbgs": 5,
                "user_positions": [[-150.0, 0.0], [520.0, 0.0], [150.0, 920.0]],
            },
        },
        "intra_agent": {
            "hidden_sizes": [64, 256, 256],
            "learning_rate": 1e-4, "batch_size": 64,
            "target_sync_period": 100, "discount": 0.9,
            "replay_capacity": 10_000,
            "epsilon_start": 1.0, "epsilon_end": 0.05,
            "epsilon_decay_fraction": 0.15,
            "train_steps_per_window": 8,
            "greedy_warmup_steps": 1000,
        },
        "inter_agent": {
            "hidden_sizes": [256, 256],
            "learning_rate": 1e-4, "batch_size": 64,
            "target_sync_period": 100, "discount": 0.9,
            "replay_capacity": 10_000,
            "epsilon_start": 1.0, "epsilon_end": 0.0,
            "epsilon_decay_fraction": 0.1,
            "train_steps_per_window": 8,
            "greedy_warmup_steps": 1000,
        },
    }


def _build_topology(raw: dict) -> Topology:
    try:
        return Topology(
            oru_positions=tuple(tuple(p) for p in raw["oru_positions"]),
            num_users_per_slice=int(raw["num_users_per_slice"]),
            tx_power_per_rb=float(raw["tx_power_per_rb"]),
            noise_power=float(raw["noise_power"]),
            pathloss_exponent=float(raw["pathloss_exponent"]),
            pathloss_ref_gain=float(raw["pathloss_ref_gain"]),
            rb_bandwidth=float(raw["rb_bandwidth"]),
            rbs_per_rbg=int(raw["rbs_per_rbg"]),
            total_rbgs=int(raw["total_rbgs"]),
            tti_duration=float(raw["tti_duration"]),
            processing_delay=float(raw["processing_delay"]),
            min_distance=float(raw["min_distance"]),
        )
    except KeyError as exc:
        raise ConfigError(f"topology.{exc.args[0]}: missing") from exc


def _build_profile(kind: str, raw: dict) -> SliceProfile:
    try:
        return SliceProfile(
            kind=kind,
            r_min=float(raw["r_min"]), d_max=float(raw["d_max"]),
            arrival_period=float(raw["arrival_period"]),
            packet_size=int(raw["packet_size"]),
            tau_min=float(raw["tau_min"]), tau_max=float(raw["tau_max"]),
            tau_step=float(raw["tau_step"]),
            alpha=float(raw["alpha"]), beta=float(raw["beta"]),
            initial_rbgs=int(raw["initial_rbgs"]),
            user_positions=tuple(tuple(p) for p in raw["user_positions"]),
        )
    except KeyError as exc:
        raise ConfigError(f"slices.{kind}.{exc.args[0]}: missing") from exc


def _build_agent(key: str, raw: dict) -> AgentConfig:
    try:
        return AgentConfig(
            hidden_sizes=tuple(int(h) for h in raw["hidden_sizes"]),
            learning_rate=float(raw["learning_rate"]),
            batch_size=int(raw["batch_size"]),
            target_sync_period=int(raw["target_sync_period"]),
            discount=float(raw["discount"]),
            replay_capacity=int(raw["replay_capacity"]),
            epsilon_start=float(raw["epsilon_start"]),
            epsilon_end=float(raw["epsilon_end"]),
            epsilon_decay_fraction=float(raw["epsilon_decay_fraction"]),
            train_steps_per_window=int(raw["train_steps_per_window"]),
            greedy_warmup_steps=int(raw["greedy_warmup_steps"]),
        )
    except KeyError as exc:
        raise ConfigError(f"{key}.{exc.args[0]}: missing") from exc


_TOP_KEYS = {"seed", "total_ttis", "intra_window_ttis", "inter_window_ttis",
             "gain_normalizer", "buffer_bits_normalizer", "psi_history_windows",
             "inter_mode", "inter_checkpoint", "steering", "topology", "slices",
             "intra_agent", "inter_agent"}


def config_from_dict(raw: dict) -> SimConfig:
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key {sorted(unknown)[0]!r}")
    merged = default_dict()
    for key, value in raw.items():
        if isinstance(value, dict) and key in merged and isinstance(merged[key], dict):
            sub = copy.deepcopy(merged[key])
            for k2, v2 in value.items():
                if isinstance(v2, dict) and k2 in sub and isinstance(sub[k2], dict):
                    sub[k2] = {**sub[k2], **v2}
                else:
                    sub[k2] = v2
            merged[key] = sub
        else:
            merged[key] = value
    try:
        cfg = SimConfig(
            seed=int(merged["seed"]),
            total_ttis=int(merged["total_ttis"]),
            intra_window_ttis=int(merged["intra_window_ttis"]),
            inter_window_ttis=int(merged["inter_window_ttis"]),
            topology=_build_topology(merged["topology"]),
            slices={kind: _build_profile(kind, merged["slices"][kind])
                    for kind in merged["slices"]},
            intra_agent=_build_agent("intra_agent", merged["intra_agent"]),
            inter_agent=_build_agent("inter_agent", merged["inter_agent"]),
            steering=dict(merged["steering"]),
            inter_mode=str(merged["inter_mode"]),
            inter_checkpoint=merged["inter_checkpoint"],
            gain_normalizer=float(merged["gain_normalizer"]),
            buffer_bits_normalizer=float(merged["buffer_bits_normalizer"]),
            psi_history_windows=int(merged["psi_history_windows"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path_or_name) -> SimConfig:
    """Load a JSON config file; the literal name 'default' loads the built-in."""
    if str(path_or_name) == "default":
        return config_from_dict({})
    try:
        with open(path_or_name) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path_or_name}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(raw)


def default_config() -> SimConfig:
    return config_from_dict({})
