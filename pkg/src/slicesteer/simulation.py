"""End-to-end deterministic run loop.

One TTI at a time: periodic traffic joins the queues, a fresh channel is
drawn, agents act on their window boundaries, the per-slice schedulers grant
RBGs and drain buffers. A master seed feeds separate RNG streams for the
channel, each agent's exploration, replay sampling and weight init, so the
channel realization is identical across steering scenarios with the same
seed.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import dqn, metrics, traces, xrl
from .agents import (AgentRunner, SLICE_ORDER, enumerate_rbg_combinations,
                     inter_reward, inter_state_vector, intra_action_space,
                     intra_reward, intra_state_vector)
from .config import SimConfig
from .radio import ChannelModel, UserBuffer, generate_traffic
from .scheduler import schedule_tti

log = logging.getLogger(__name__)


@dataclass
class _WindowAccumulator:
    """Raw per-slice observations since the last boundary of one cadence."""

    tti_start: int = 0
    utilizations: list = field(default_factory=list)
    drained: Optional[np.ndarray] = None
    delays: list = field(default_factory=list)  # list per user

    def reset(self, tti_start: int, n_users: int):
        self.tti_start = tti_start
        self.utilizations = []
        self.drained = np.zeros(n_users)
        self.delays = [[] for _ in range(n_users)]


class _SliceRuntime:
    def __init__(self, kind: str, profile, topology, global_ids):
        self.kind = kind
        self.profile = profile
        self.topology = topology
        self.global_ids = global_ids
        self.buffers = [UserBuffer() for _ in global_ids]
        self.rbg_pool: list = []
        self.pool_rbs: np.ndarray = np.arange(0)
        self.tau = profile.tau_min
        self.intra_acc = _WindowAccumulator()
        self.inter_acc = _WindowAccumulator()
        self.intra_psi: deque = deque()
        self.inter_psi: deque = deque()
        self.bits_generated = 0
        self.bits_drained = 0.0

    def set_pool(self, rbgs: list):
        self.rbg_pool = list(rbgs)
        per = self.topology.rbs_per_rbg
        self.pool_rbs = np.concatenate(
            [np.arange(g * per, (g + 1) * per) for g in self.rbg_pool])

    def buffered_bits(self) -> list:
        return [buf.buffered_bits for buf in self.buffers]


@dataclass
class RunResult:
    summary: dict
    out_dir: Optional[Path]
    tti_rows: list
    intra_rows: dict  # slice kind -> list of row dicts
    inter_rows: list
    explanations: list


def _partition(z: tuple, order=SLICE_ORDER) -> dict:
    pools, start = {}, 0
    for kind, count in zip(order, z):
        pools[kind] = list(range(start, start + count))
        start += count
    return pools


def _close_window(rt: _SliceRuntime, acc: _WindowAccumulator, window: int,
                  window_ttis: int, psi: deque, psi_limit: int) -> metrics.WindowKpis:
    duration = window_ttis * rt.topology.tti_duration
    kpis = metrics.build_window_kpis(
        rt.kind, window, acc.tti_start, acc.utilizations, list(acc.drained),
        acc.delays, duration, rt.profile.r_min, rt.profile.d_max, list(psi))
    psi.append(kpis.u_max)
    while len(psi) > psi_limit:
        psi.popleft()
    return kpis


def _intra_attributes(kpis: metrics.WindowKpis, reward: float,
                      slice_rbs: int) -> dict:
    return {
        "r_avg": kpis.r_avg,
        "d_norm": kpis.d_avg if kpis.d_avg is not None else float("nan"),
        "u_max": kpis.u_max / slice_rbs,
        "reward": reward,
    }


def _inter_attributes(kpis_by_slice: dict, reward: float, total_rbs: int) -> dict:
    d_scores = [k.d_avg for k in kpis_by_slice.values() if k.d_avg is not None]
    return {
        "r_avg": float(np.mean([k.r_avg for k in kpis_by_slice.values()])),
        "d_norm": float(np.mean(d_scores)) if d_scores else float("nan"),
        "u_max": sum(k.u_max for k in kpis_by_slice.values()) / total_rbs,
        "reward": reward,
    }


def run_simulation(cfg: SimConfig, out_dir=None) -> RunResult:
    """Execute one configured run; optionally write traces under out_dir."""
    cfg.validate()
    topo = cfg.topology
    rngs = _spawn_streams(cfg.seed)

    slices = {}
    positions = []
    next_gid = 0
    for kind in SLICE_ORDER:
        profile = cfg.slices[kind]
        gids = list(range(next_gid, next_gid + topo.num_users_per_slice))
        next_gid += topo.num_users_per_slice
        slices[kind] = _SliceRuntime(kind, profile, topo, gids)
        positions.extend(profile.user_positions)
    channel = ChannelModel(topo, np.asarray(positions, dtype=float))

    intra_agents = {}
    state_dim = topo.num_users_per_slice * (topo.num_orus + 1)
    for kind in SLICE_ORDER:
        profile = cfg.slices[kind]
        taus = intra_action_space(profile)
        intra_agents[kind] = AgentRunner(
            name=kind, n_actions=len(taus), state_dim=state_dim,
            hidden_sizes=cfg.intra_agent.hidden_sizes,
            hp=cfg.intra_agent.hyperparams(cfg.intra_windows),
            init_rng=rngs[f"init_{kind}"], explore_rng=rngs[f"explore_{kind}"],
            replay_rng=rngs[f"replay_{kind}"],
            steering=cfg.steering.get(kind, "none"),
            train_steps_per_window=cfg.intra_agent.train_steps_per_window,
            greedy_warmup_steps=cfg.intra_agent.greedy_warmup_steps,
            action_labels=[f"tau={t:.6g}" for t in taus])
        intra_agents[kind].taus = taus

    combos = enumerate_rbg_combinations(topo.total_rbgs, len(SLICE_ORDER), 1)
    initial_split = tuple(cfg.slices[k].initial_rbgs for k in SLICE_ORDER)
    inter_params = None
    if cfg.inter_mode == "frozen":
        inter_params = dqn.load_params(cfg.inter_checkpoint)
        if inter_params.layer_sizes[-1] != len(combos):
            raise ValueError("inter_checkpoint: action head does not match the "
                             "RBG combination count")
    inter_agent = AgentRunner(
        name="inter", n_actions=len(combos), state_dim=3 * len(SLICE_ORDER),
        hidden_sizes=cfg.inter_agent.hidden_sizes,
        hp=cfg.inter_agent.hyperparams(cfg.inter_windows),
        init_rng=rngs["init_inter"], explore_rng=rngs["explore_inter"],
        replay_rng=rngs["replay_inter"],
        steering=cfg.steering.get("inter", "none"),
        trainable=cfg.inter_mode == "online",
        train_steps_per_window=cfg.inter_agent.train_steps_per_window,
        greedy_warmup_steps=cfg.inter_agent.greedy_warmup_steps,
        params=inter_params,
        action_labels=["+".join(str(c) for c in combo) for combo in combos],
        default_action=combos.index(initial_split))

    tti_rows: list = []
    intra_rows: dict = {kind: [] for kind in SLICE_ORDER}
    inter_rows: list = []
    explanations: list = []
    last_inter_kpis: Optional[dict] = None
    aborted = None

    n_users = topo.num_users_per_slice
    intra_w, inter_w = cfg.intra_window_ttis, cfg.inter_window_ttis

    def close_intra(kind: str, window: int):
        rt = slices[kind]
        kpis = _close_window(rt, rt.intra_acc, window, intra_w, rt.intra_psi,
                             cfg.psi_history_windows)
        row = intra_rows[kind][window]
        # normalize by the pool the closed window actually ran under
        slice_rbs = row["z_rbgs"] * topo.rbs_per_rbg
        reward = intra_reward(kpis.u_max, kpis.r_avg, rt.profile, slice_rbs)
        row.update({
            "u_max": kpis.u_max, "delta": kpis.delta, "r_avg": kpis.r_avg,
            "d_avg": kpis.d_avg, "qos_fraction": kpis.qos_fraction,
            "reward": reward, "flags": "|".join(kpis.flags),
        })
        return kpis, reward, slice_rbs

    def close_inter(window: int):
        kpis_by_slice = {}
        for kind in SLICE_ORDER:
            rt = slices[kind]
            kpis_by_slice[kind] = _close_window(
                rt, rt.inter_acc, window, inter_w, rt.inter_psi,
                cfg.psi_history_windows)
        reward = inter_reward(kpis_by_slice)
        row = inter_rows[window]
        row["reward"] = reward
        for kind in SLICE_ORDER:
            k = kpis_by_slice[kind]
            row[f"r_avg_{kind}"] = k.r_avg
            row[f"d_avg_{kind}"] = k.d_avg
            row[f"u_max_{kind}"] = k.u_max
        return kpis_by_slice, reward

    try:
        for tti in range(cfg.total_ttis):
            for kind in SLICE_ORDER:
                rt = slices[kind]
                rt.bits_generated += generate_traffic(tti, rt.profile,
                                                      rt.buffers, topo)
            ch = channel.sample(rngs["channel"], tti)

            if tti % inter_w == 0:
                window = tti // inter_w
                if window > 0:
                    kpis_by_slice, reward = close_inter(window - 1)
                    attrs = _inter_attributes(kpis_by_slice, reward,
                                              topo.total_rbs)
                    state = inter_state_vector(kpis_by_slice, topo.total_rbs)
                    loss = inter_agent.complete_window(reward, state, attrs)
                    inter_rows[window - 1]["loss"] = loss
                    last_inter_kpis = kpis_by_slice
                else:
                    state = np.zeros(3 * len(SLICE_ORDER))
                # the first partition is the configured split, not a guess
                forced = None
                if window == 0:
                    forced = combos.index(initial_split)
                action, eps, steered, expl = inter_agent.decide(window, state,
                                                                forced=forced)
                if expl is not None:
                    explanations.append(expl)
                z = combos[action]
                pools = _partition(z)
                for kind in SLICE_ORDER:
                    slices[kind].set_pool(pools[kind])
                    slices[kind].inter_acc.reset(tti, n_users)
                inter_rows.append({
                    "window": window, "tti_start": tti, "action": action,
                    "z_embb": z[0], "z_urllc": z[1], "z_mmtc": z[2],
                    "epsilon": eps, "steered": steered,
                })

            if tti % intra_w == 0:
                window = tti // intra_w
                for kind in SLICE_ORDER:
                    rt = slices[kind]
                    agent = intra_agents[kind]
                    if window > 0:
                        kpis, reward, slice_rbs = close_intra(kind, window - 1)
                        attrs = _intra_attributes(kpis, reward, slice_rbs)
                        state = _intra_state(rt, ch, cfg)
                        loss = agent.complete_window(reward, state, attrs)
                        intra_rows[kind][window - 1]["loss"] = loss
                    else:
                        state = _intra_state(rt, ch, cfg)
                    action, eps, steered, expl = agent.decide(window, state)
                    if expl is not None:
                        explanations.append(expl)
                    rt.tau = agent.taus[action]
                    rt.intra_acc.reset(tti, n_users)
                    intra_rows[kind].append({
                        "window": window, "tti_start": tti, "slice": kind,
                        "z_rbgs": len(rt.rbg_pool), "tau": rt.tau,
                        "action": action, "epsilon": eps, "steered": steered,
                    })

            for kind in SLICE_ORDER:
                rt = slices[kind]
                report = schedule_tti(rt.buffers, rt.rbg_pool, rt.tau, ch,
                                      topo, tti, rt.global_ids, rt.pool_rbs)
                drained_total = 0.0
                for user, bits in report.drained_bits.items():
                    rt.intra_acc.drained[user] += bits
                    rt.inter_acc.drained[user] += bits
                    drained_total += bits
                for acc in (rt.intra_acc, rt.inter_acc):
                    acc.utilizations.append(report.utilization)
                for user, delay in zip(report.completed_users, report.delays):
                    rt.intra_acc.delays[user].append(delay)
                    rt.inter_acc.delays[user].append(delay)
                rt.bits_drained += drained_total
                tti_rows.append({"tti": tti, "slice": kind,
                                 "utilization": report.utilization,
                                 "drained_bits": drained_total})

        for kind in SLICE_ORDER:
            close_intra(kind, cfg.intra_windows - 1)
        close_inter(cfg.inter_windows - 1)
    except dqn.TrainingDiverged as exc:
        aborted = str(exc)
        log.error("run aborted: %s", aborted)

    summary = _summarize(cfg, slices, intra_rows, inter_rows, aborted)
    result = RunResult(summary=summary, out_dir=None, tti_rows=tti_rows,
                       intra_rows=intra_rows, inter_rows=inter_rows,
                       explanations=explanations)
    if out_dir is not None:
        result.out_dir = _write_outputs(Path(out_dir), result, intra_agents,
                                        inter_agent)
    if aborted:
        raise dqn.TrainingDiverged(aborted)
    return result


def _intra_state(rt: _SliceRuntime, ch, cfg: SimConfig) -> np.ndarray:
    mean_gains = ch.gain[rt.global_ids][:, :, rt.pool_rbs].mean(axis=2)
    return intra_state_vector(mean_gains, rt.buffered_bits(),
                              cfg.gain_normalizer, cfg.buffer_bits_normalizer)


def _spawn_streams(seed: int) -> dict:
    ss = np.random.SeedSequence(seed)
    names = ["channel"]
    names += [f"init_{k}" for k in SLICE_ORDER] + ["init_inter"]
    names += [f"explore_{k}" for k in SLICE_ORDER] + ["explore_inter"]
    names += [f"replay_{k}" for k in SLICE_ORDER] + ["replay_inter"]
    children = ss.spawn(len(names))
    return {name: np.random.default_rng(child)
            for name, child in zip(names, children)}


def _summarize(cfg: SimConfig, slices: dict, intra_rows: dict,
               inter_rows: list, aborted) -> dict:
    per_slice = {}
    for kind in SLICE_ORDER:
        rt = slices[kind]
        buffered = sum(buf.buffered_bits for buf in rt.buffers)
        rows = [r for r in intra_rows[kind] if "r_avg" in r]
        d_scores = [r["d_avg"] for r in rows if r.get("d_avg") is not None]
        per_slice[kind] = {
            "bits_generated": rt.bits_generated,
            "bits_drained": rt.bits_drained,
            "bits_buffered": buffered,
            "mean_r_avg": float(np.mean([r["r_avg"] for r in rows])) if rows else None,
            "mean_d_avg": float(np.mean(d_scores)) if d_scores else None,
            "mean_u_max": float(np.mean([r["u_max"] for r in rows])) if rows else None,
            "mean_qos_fraction": float(np.mean([r["qos_fraction"] for r in rows])) if rows else None,
        }
    final_z = None
    if inter_rows:
        last = inter_rows[-1]
        final_z = [last["z_embb"], last["z_urllc"], last["z_mmtc"]]
    return {
        "seed": cfg.seed,
        "total_ttis": cfg.total_ttis,
        "intra_windows": cfg.intra_windows,
        "inter_windows": cfg.inter_windows,
        "steering": {k: cfg.steering.get(k, "none")
                     for k in SLICE_ORDER + ("inter",)},
        "slices": per_slice,
        "final_z": final_z,
        "aborted": aborted,
    }


def _write_outputs(out_dir: Path, result: RunResult, intra_agents: dict,
                   inter_agent) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    traces.write_csv(out_dir / traces.TTI_TRACE, traces.TTI_FIELDS,
                     result.tti_rows)
    merged = []
    for kind in SLICE_ORDER:
        merged.extend(result.intra_rows[kind])
    merged.sort(key=lambda r: (r["window"], SLICE_ORDER.index(r["slice"])))
    traces.write_csv(out_dir / traces.INTRA_TRACE, traces.INTRA_FIELDS, merged)
    traces.write_csv(out_dir / traces.INTER_TRACE, traces.INTER_FIELDS,
                     result.inter_rows)
    traces.write_explanations(out_dir / traces.EXPLANATIONS,
                              result.explanations)
    traces.write_summary(out_dir / traces.SUMMARY, result.summary)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for kind, agent in intra_agents.items():
        dqn.save_params(ckpt_dir / f"intra_{kind}.bin", agent.params)
    dqn.save_params(ckpt_dir / "inter.bin", inter_agent.params)
    return out_dir
