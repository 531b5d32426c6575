"""Action steering over an attributed transition graph.

Every executed action becomes a graph node carrying running means of the KPIs
observed in the windows it governed; directed edges count action-to-action
transitions. Steering procedures consult those attributes to overrule the
value network's pick before it reaches the environment:

  ar1  replace with the best mean-reward action
  ar2  replace with the worst mean-reward action (adversarial probe)
  ar3  replace with the best mean-throughput action when it beats the pick
  ar4  replace only when some action beats the pick on mean throughput AND
       some action beats it on mean delay score; take whichever of those two
       champions has the larger throughput + delay sum (ties keep the
       throughput champion)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .dqn import Transition

log = logging.getLogger(__name__)

ATTRIBUTE_KEYS = ("r_avg", "d_norm", "u_max", "reward")
PROCEDURES = ("none", "ar1", "ar2", "ar3", "ar4")
_THROUGHPUT = "r_avg"
_DELAY = "d_norm"


@dataclass
class ActionAttributes:
    """Running KPI means and visit count for one action node."""

    means: dict = field(default_factory=dict)
    visits: int = 0

    def fold(self, sample: dict):
        self.visits += 1
        for key in ATTRIBUTE_KEYS:
            prev = self.means.get(key, 0.0)
            self.means[key] = prev + (sample[key] - prev) / self.visits


@dataclass
class AttributedGraph:
    nodes: dict = field(default_factory=dict)  # action -> ActionAttributes
    edges: dict = field(default_factory=dict)  # (prev, next) -> count

    def actions(self) -> list:
        return sorted(self.nodes)


def update_graph(graph: AttributedGraph, transition: Transition,
                 prev_action: Optional[int] = None):
    """Fold one window's KPIs into the executed action's node.

    A sample with any non-finite KPI is dropped whole; the edge count from the
    previously executed action still advances.
    """
    sample = {key: transition.kpi_attributes.get(key) for key in ATTRIBUTE_KEYS}
    finite = all(v is not None and math.isfinite(v) for v in sample.values())
    if finite:
        node = graph.nodes.get(transition.action)
        if node is None:
            node = graph.nodes[transition.action] = ActionAttributes()
        node.fold(sample)
    else:
        log.debug("dropping non-finite KPI sample for action %s", transition.action)
    if prev_action is not None:
        key = (prev_action, transition.action)
        graph.edges[key] = graph.edges.get(key, 0) + 1


def _argbest(graph: AttributedGraph, key: str, sign: float) -> Optional[int]:
    best_action, best_val = None, None
    for action in graph.actions():  # sorted, so ties keep the lowest action
        val = sign * graph.nodes[action].means[key]
        if best_val is None or val > best_val:
            best_action, best_val = action, val
    return best_action


def steer_baseline(procedure: str, graph: AttributedGraph, action: int) -> int:
    """Reference procedures ar1 (max reward), ar2 (min reward), ar3 (max rate)."""
    if procedure not in ("ar1", "ar2", "ar3"):
        raise ValueError(f"unknown baseline procedure {procedure!r}")
    if not graph.nodes:
        return action
    if procedure == "ar1":
        return _argbest(graph, "reward", +1.0)
    if procedure == "ar2":
        return _argbest(graph, "reward", -1.0)
    # ar3: only move when the throughput champion actually improves on the pick
    champion = _argbest(graph, _THROUGHPUT, +1.0)
    if action not in graph.nodes:
        log.debug("ar3: action %s has no recorded attributes; keeping it", action)
        return action
    if graph.nodes[champion].means[_THROUGHPUT] > graph.nodes[action].means[_THROUGHPUT]:
        return champion
    return action


def steer_ar4(graph: AttributedGraph, action: int) -> int:
    """Balanced replacement: needs strict improvement available on both KPIs."""
    if action not in graph.nodes:
        if graph.nodes:
            log.debug("ar4: action %s has no recorded attributes; keeping it", action)
        return action
    best_rate = _argbest(graph, _THROUGHPUT, +1.0)
    best_delay = _argbest(graph, _DELAY, +1.0)
    here = graph.nodes[action].means
    rate_gain = graph.nodes[best_rate].means[_THROUGHPUT] > here[_THROUGHPUT]
    delay_gain = graph.nodes[best_delay].means[_DELAY] > here[_DELAY]
    if not (rate_gain and delay_gain):
        return action
    score_rate = (graph.nodes[best_rate].means[_THROUGHPUT]
                  + graph.nodes[best_rate].means[_DELAY])
    score_delay = (graph.nodes[best_delay].means[_THROUGHPUT]
                   + graph.nodes[best_delay].means[_DELAY])
    return best_delay if score_delay > score_rate else best_rate


def steer(procedure: str, graph: AttributedGraph, action: int) -> int:
    if procedure == "none":
        return action
    if procedure == "ar4":
        return steer_ar4(graph, action)
    return steer_baseline(procedure, graph, action)


@dataclass
class ExplanationRecord:
    """One steering decision, serialized per line in the explanation log."""

    window: int
    agent: str
    procedure: str
    original: int
    steered: int
    original_label: str
    steered_label: str
    attributes: dict  # KPI means consulted, keyed by action label
    sentence: str

    def to_dict(self) -> dict:
        return {
            "window": self.window, "agent": self.agent,
            "procedure": self.procedure, "original": self.original,
            "steered": self.steered, "original_label": self.original_label,
            "steered_label": self.steered_label, "attributes": self.attributes,
            "sentence": self.sentence,
        }


def _node_summary(graph: AttributedGraph, action: int) -> Optional[dict]:
    node = graph.nodes.get(action)
    if node is None:
        return None
    return {key: round(node.means[key], 6) for key in ATTRIBUTE_KEYS}


def explain_action(graph: AttributedGraph, window: int, agent: str,
                   procedure: str, original: int, steered: int,
                   labels=None) -> ExplanationRecord:
    """Build the deterministic narration for one steering decision."""
    def label(a):
        return labels[a] if labels is not None else str(a)

    attrs = {}
    for a in {original, steered}:
        summary = _node_summary(graph, a)
        if summary is not None:
            attrs[label(a)] = summary
    orig, new = _node_summary(graph, original), _node_summary(graph, steered)
    if steered == original:
        if orig is None:
            sentence = (f"kept action {label(original)}: no recorded "
                        "observations for it yet")
        else:
            sentence = (f"kept action {label(original)}: throughput "
                        f"{orig['r_avg']} and delay score {orig['d_norm']} "
                        "have no jointly better recorded alternative")
    else:
        if orig is None:
            sentence = (f"replaced unobserved action {label(original)} with "
                        f"{label(steered)} (throughput {new['r_avg']}, "
                        f"delay score {new['d_norm']})")
        else:
            sentence = (f"replaced action {label(original)} with {label(steered)}: "
                        f"throughput {orig['r_avg']} -> {new['r_avg']}, "
                        f"delay score {orig['d_norm']} -> {new['d_norm']}")
    return ExplanationRecord(window=window, agent=agent, procedure=procedure,
                             original=original, steered=steered,
                             original_label=label(original),
                             steered_label=label(steered), attributes=attrs,
                             sentence=sentence)
