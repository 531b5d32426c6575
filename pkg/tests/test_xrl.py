import numpy as np
import pytest

from slicesteer.dqn import Transition
from slicesteer.xrl import (ATTRIBUTE_KEYS, ActionAttributes, AttributedGraph,
                            explain_action, steer, steer_ar4, update_graph)


def _sample(r=1.0, d=1.0, u=10.0, rew=0.0):
    return {"r_avg": r, "d_norm": d, "u_max": u, "reward": rew}


def _transition(action, attrs):
    z = np.zeros(1)
    return Transition(state=z, action=action, reward=0.0, next_state=z,
                      kpi_attributes=attrs)


def graph_with(nodes):
    g = AttributedGraph()
    for action, (r, d) in nodes.items():
        attrs = ActionAttributes()
        attrs.fold(_sample(r=r, d=d))
        g.nodes[action] = attrs
    return g


# ------------------------------------------------------------ graph updates

def test_fold_is_a_running_mean():
    rng = np.random.default_rng(2)
    samples = [_sample(r=float(r), d=float(d), u=float(u), rew=float(w))
               for r, d, u, w in rng.normal(size=(50, 4))]
    node = ActionAttributes()
    for s in samples:
        node.fold(s)
    assert node.visits == 50
    for key in ATTRIBUTE_KEYS:
        expected = float(np.mean([s[key] for s in samples]))
        assert node.means[key] == pytest.approx(expected)


def test_update_graph_builds_nodes_and_edges():
    g = AttributedGraph()
    update_graph(g, _transition(3, _sample(r=2.0)))
    update_graph(g, _transition(3, _sample(r=4.0)), prev_action=3)
    update_graph(g, _transition(1, _sample(r=1.0)), prev_action=3)
    assert g.actions() == [1, 3]
    assert g.nodes[3].visits == 2
    assert g.nodes[3].means["r_avg"] == pytest.approx(3.0)
    assert g.edges == {(3, 3): 1, (3, 1): 1}


def test_non_finite_samples_are_dropped_whole():
    g = AttributedGraph()
    update_graph(g, _transition(0, _sample(r=float("nan"))), prev_action=2)
    assert 0 not in g.nodes  # no partial fold of the finite keys
    assert g.edges == {(2, 0): 1}  # the transition itself still counts
    update_graph(g, _transition(0, {"r_avg": 1.0}))  # missing keys
    assert 0 not in g.nodes
    update_graph(g, _transition(0, _sample(d=float("inf"))))
    assert 0 not in g.nodes
    update_graph(g, _transition(0, _sample()))
    assert g.nodes[0].visits == 1


# ------------------------------------------------------------ procedures

def test_steering_disabled_keeps_action():
    g = graph_with({0: (9.0, 9.0)})
    assert steer("none", g, 5) == 5


def test_best_and_worst_reward_procedures():
    g = AttributedGraph()
    for action, rew in ((0, 1.0), (1, 5.0), (2, -2.0)):
        attrs = ActionAttributes()
        attrs.fold(_sample(rew=rew))
        g.nodes[action] = attrs
    assert steer("ar1", g, 2) == 1
    assert steer("ar2", g, 1) == 2
    # equal rewards resolve to the lowest action id
    g.nodes[2].means["reward"] = 5.0
    assert steer("ar1", g, 0) == 1


def test_throughput_procedure_needs_strict_improvement():
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 1.0)})
    assert steer("ar3", g, 0) == 1
    assert steer("ar3", g, 1) == 1  # already the champion
    g2 = graph_with({0: (2.0, 1.0), 1: (2.0, 1.0)})
    assert steer("ar3", g2, 1) == 1  # equal is not better
    assert steer("ar3", g, 7) == 7  # unobserved pick is kept


def test_empty_graph_keeps_every_pick():
    g = AttributedGraph()
    for proc in ("ar1", "ar2", "ar3", "ar4"):
        assert steer(proc, g, 4) == 4


def test_unknown_procedure_is_rejected():
    with pytest.raises(ValueError):
        steer("ar9", graph_with({0: (1.0, 1.0)}), 0)


def test_balanced_procedure_tie_prefers_throughput_champion():
    # distinct champions, equal combined scores: the rate champion wins the tie
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 0.5), 2: (0.5, 2.0)})
    assert steer_ar4(g, 0) == 1
    # nudge the delay champion ahead on the combined score
    g.nodes[2].means["d_norm"] = 2.2
    assert steer_ar4(g, 0) == 2


def test_balanced_procedure_requires_both_improvements():
    # throughput improves but no action beats the pick's delay score
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 0.9)})
    assert steer_ar4(g, 0) == 0
    # delay improves but not throughput
    g = graph_with({0: (1.0, 1.0), 1: (0.5, 2.0)})
    assert steer_ar4(g, 0) == 0
    # the pick is itself one of the champions
    g = graph_with({0: (2.0, 1.0), 1: (1.0, 2.0)})
    assert steer_ar4(g, 0) == 0


def test_balanced_procedure_keeps_unobserved_pick():
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 2.0)})
    assert steer_ar4(g, 9) == 9


def test_single_improving_action_wins_both_roles():
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 2.0)})
    assert steer_ar4(g, 0) == 1


def test_steering_is_idempotent_on_random_graphs():
    rng = np.random.default_rng(17)
    for _ in range(100):
        g = AttributedGraph()
        for action in rng.choice(10, size=rng.integers(1, 7), replace=False):
            attrs = ActionAttributes()
            for _ in range(int(rng.integers(1, 4))):
                attrs.fold(_sample(r=float(rng.uniform(0, 3)),
                                   d=float(rng.uniform(0, 3)),
                                   rew=float(rng.uniform(-1, 1))))
            g.nodes[int(action)] = attrs
        pick = int(rng.integers(0, 12))
        for proc in ("ar1", "ar2", "ar3", "ar4"):
            once = steer(proc, g, pick)
            assert steer(proc, g, once) == once


# ------------------------------------------------------------ explanations

def test_explanation_for_a_kept_action():
    g = graph_with({0: (1.5, 2.0)})
    rec = explain_action(g, 7, "intra_embb", "ar4", 0, 0,
                         labels={0: "tau=5ms"})
    assert rec.window == 7 and rec.original_label == "tau=5ms"
    assert "kept action tau=5ms" in rec.sentence
    assert "1.5" in rec.sentence and "2.0" in rec.sentence
    assert rec.attributes["tau=5ms"]["r_avg"] == 1.5


def test_explanation_for_a_replacement():
    g = graph_with({0: (1.0, 1.0), 1: (2.0, 2.0)})
    rec = explain_action(g, 3, "inter", "ar1", 0, 1)
    assert rec.original == 0 and rec.steered == 1
    assert "replaced action 0 with 1" in rec.sentence
    assert "1.0 -> 2.0" in rec.sentence
    assert set(rec.attributes) == {"0", "1"}
    d = rec.to_dict()
    assert d["procedure"] == "ar1" and d["sentence"] == rec.sentence


def test_explanation_for_an_unobserved_pick():
    g = AttributedGraph()
    rec = explain_action(g, 0, "intra_urllc", "ar3", 4, 4)
    assert "no recorded observations" in rec.sentence
    assert rec.attributes == {}


def test_explanation_rounds_attribute_means():
    g = AttributedGraph()
    attrs = ActionAttributes()
    attrs.fold(_sample(r=1 / 3))
    g.nodes[0] = attrs
    rec = explain_action(g, 0, "inter", "ar1", 0, 0)
    assert rec.attributes["0"]["r_avg"] == round(1 / 3, 6)
