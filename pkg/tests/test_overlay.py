"""Virtual-ring overlay: joins, failures, repair, routing, equivalent graph.

The master invariant, re-derived here independently of the class's own
``check()``: on every ring, sorting live members by (coordinate, id) gives a
cycle, and each member's pred/succ pointers plus its two-hop table must match
that cycle exactly.  Every membership event must preserve the invariant.
"""

import numpy as np
import pytest

from dflmesh.graphs import is_connected, make_ring
from dflmesh.overlay import HopStats, OverlayNetwork


def ground_truth_ok(net):
    """Recompute ring pointers from scratch and compare against node state."""
    for ring in range(net.rings):
        ids = sorted(net.nodes, key=lambda nid: (net.nodes[nid].coords[ring], nid))
        m = len(ids)
        for k, nid in enumerate(ids):
            node = net.nodes[nid]
            if node.pred[ring] != ids[(k - 1) % m]:
                return False
            if node.succ[ring] != ids[(k + 1) % m]:
                return False
            expected = (
                net.nodes[node.pred[ring]].pred[ring],
                net.nodes[node.succ[ring]].succ[ring],
            )
            if tuple(node.two_hop[ring]) != expected:
                return False
    return True


def assert_healthy(net):
    assert ground_truth_ok(net)
    report = net.check()
    assert report["ring_order_ok"] and report["two_hop_ok"]
    assert report["degree_ok"]
    if net.n_nodes >= 2:
        assert is_connected(net.equivalent_graph())


# -- construction and joins ---------------------------------------------------------


def test_explicit_coords_single_ring_is_a_cycle():
    net = OverlayNetwork(rings=1, seed=0)
    for nid, c in enumerate((0.1, 0.2, 0.3, 0.4, 0.5)):
        net.join(nid, coords=(c,))
    assert net.n_nodes == 5
    assert_healthy(net)
    assert net.equivalent_graph() == make_ring(5)


def test_join_validation():
    net = OverlayNetwork(rings=2, seed=1)
    net.join(0)
    with pytest.raises(ValueError, match="already present"):
        net.join(0)
    with pytest.raises(ValueError, match="nonnegative"):
        net.join(-1)
    with pytest.raises(ValueError, match="2 coordinates"):
        net.join(1, coords=(0.5,))
    with pytest.raises(ValueError, match=r"\[0, 1\)"):
        net.join(1, coords=(0.5, 1.0))


def test_join_logs_hops_and_routes_within_ring_size():
    net = OverlayNetwork(rings=1, seed=2)
    for nid in range(30):
        hops = net.join(nid)
        assert len(hops) == 1
        assert 0 <= hops[0] <= net.n_nodes
    joins = [e for e in net.event_log if e["event"] == "join"]
    assert len(joins) == 30
    assert joins[-1]["hops"] == hops
    assert_healthy(net)


def test_coordinate_ties_break_by_id():
    net = OverlayNetwork(rings=1, seed=3)
    net.join(5, coords=(0.5,))
    net.join(9, coords=(0.5,))
    net.join(1, coords=(0.5,))
    assert ground_truth_ok(net)
    # sorted by (coord, id): 1 -> 5 -> 9 -> 1
    assert net.nodes[1].succ[0] == 5
    assert net.nodes[5].succ[0] == 9
    assert net.nodes[9].succ[0] == 1


def test_rings_must_be_positive():
    with pytest.raises(ValueError, match="at least one ring"):
        OverlayNetwork(rings=0)


def test_seed_determinism():
    def build(seed):
        net = OverlayNetwork(rings=2, seed=seed)
        for nid in range(12):
            net.join(nid)
        return net

    a, b, c = build(7), build(7), build(8)
    assert a.equivalent_graph() == b.equivalent_graph()
    assert a.equivalent_graph() != c.equivalent_graph()


# -- single failures ------------------------------------------------------------------


def test_single_failure_repairs_from_two_hop():
    net = OverlayNetwork(rings=2, seed=4)
    for nid in range(10):
        net.join(nid)
    net.fail_node(3)
    assert 3 not in net.nodes
    assert net.n_nodes == 9
    assert_healthy(net)
    fail_events = [e for e in net.event_log if e["event"] == "fail"]
    assert fail_events[-1] == {"event": "fail", "id": 3, "two_hop_sufficient": True}


def test_sequence_of_single_failures_stays_healthy():
    net = OverlayNetwork(rings=2, seed=5)
    for nid in range(16):
        net.join(nid)
    rng = np.random.default_rng(0)
    live = list(range(16))
    for _ in range(10):
        victim = int(rng.choice(live))
        live.remove(victim)
        net.fail_node(victim)
        assert_healthy(net)


def test_two_member_ring_collapses_to_self_loop_pointers():
    net = OverlayNetwork(rings=1, seed=6)
    net.join(0, coords=(0.2,))
    net.join(1, coords=(0.7,))
    net.fail_node(1)
    survivor = net.nodes[0]
    assert survivor.pred[0] == 0 and survivor.succ[0] == 0
    assert ground_truth_ok(net)


def test_fail_unknown_node_rejected():
    net = OverlayNetwork(rings=1, seed=7)
    net.join(0)
    with pytest.raises(ValueError, match="unknown node"):
        net.fail_node(99)


def test_stale_two_hop_detected():
    net = OverlayNetwork(rings=1, seed=8)
    for nid, c in enumerate((0.1, 0.4, 0.8)):
        net.join(nid, coords=(c,))
    net.nodes[0].two_hop[0] = (2, 99)  # corrupt the repair table
    with pytest.raises(RuntimeError, match="stale two-hop"):
        net.fail_node(1)


# -- simultaneous failures ---------------------------------------------------------------


def ring_net(coords, rings=1, seed=9):
    net = OverlayNetwork(rings=rings, seed=seed)
    for nid, c in enumerate(coords):
        net.join(nid, coords=(c,) * rings)
    return net


def test_non_adjacent_batch_uses_two_hop_and_logs_once():
    net = ring_net((0.0, 0.1, 0.2, 0.3, 0.4, 0.5))
    before = len(net.event_log)
    ok = net.fail_simultaneous({0, 3})
    new_events = net.event_log[before:]
    assert ok is True
    assert net.live_ids() == [1, 2, 4, 5]
    assert len(new_events) == 1
    assert new_events[0] == {
        "event": "fail_batch",
        "ids": [0, 3],
        "two_hop_sufficient": True,
    }
    assert_healthy(net)


def test_adjacent_batch_falls_back_to_global_rebuild():
    net = ring_net((0.0, 0.1, 0.2, 0.3, 0.4, 0.5))
    ok = net.fail_simultaneous({1, 2})
    batch = net.event_log[-1]
    assert ok is False
    assert net.live_ids() == [0, 3, 4, 5]
    assert batch["event"] == "fail_batch"
    assert batch["two_hop_sufficient"] is False
    assert_healthy(net)


def test_batch_validation():
    net = ring_net((0.0, 0.2, 0.4))
    with pytest.raises(ValueError, match="unknown nodes"):
        net.fail_simultaneous({0, 42})
    with pytest.raises(ValueError, match="every node"):
        net.fail_simultaneous({0, 1, 2})


# -- duplicate rewiring --------------------------------------------------------------


def test_identical_coordinates_across_rings_stay_within_degree_cap():
    # both rings order members identically: every ring link is duplicated
    # and must be replaced by repair links without exceeding degree 2 * rings
    net = OverlayNetwork(rings=2, seed=10)
    for nid in range(12):
        c = nid / 12.0
        net.join(nid, coords=(c, c))
    report = net.check()
    assert report["degree_ok"]
    assert report["max_degree"] <= 4
    g = net.equivalent_graph()
    assert is_connected(g)
    # repair links actually exist: the union is denser than one shared ring
    assert g.num_edges > 12


def test_rewire_when_disabled_leaves_duplicates_unrepaired():
    net = OverlayNetwork(rings=2, seed=11)
    net.auto_rewire = False
    for nid in range(8):
        c = nid / 8.0
        net.join(nid, coords=(c, c))
    assert net.extra_edges == set()
    # the two rings coincide: the union graph is just one ring
    assert net.equivalent_graph() == make_ring(8)
    net.rewire_duplicates()
    assert len(net.extra_edges) > 0


# -- views ------------------------------------------------------------------------------


def test_two_ring_union_is_at_most_degree_four():
    net = OverlayNetwork(rings=2, seed=12)
    for nid in range(40):
        net.join(nid)
    g = net.equivalent_graph()
    assert g.n == 40
    assert int(g.degrees().max()) <= 4
    assert is_connected(g)


def test_equivalent_graph_reindexes_sparse_ids():
    net = OverlayNetwork(rings=1, seed=13)
    for nid in (100, 7, 55):
        net.join(nid)
    g = net.equivalent_graph()
    assert g.n == 3
    assert g.num_edges == 3  # triangle regardless of labels


def test_empty_network_has_no_graph():
    net = OverlayNetwork(rings=1, seed=14)
    net.join(0)
    net.fail_node(0)
    assert net.n_nodes == 0
    with pytest.raises(ValueError, match="empty network"):
        net.equivalent_graph()
    report = net.check()
    assert report["nodes"] == 0 and report["max_degree"] == 0


def test_lookup_cost_scales_like_quarter_ring():
    net = OverlayNetwork(rings=1, seed=15)
    for nid in range(64):
        net.join(nid)
    stats = net.lookup_cost(samples=300, seed=1)
    assert isinstance(stats, HopStats)
    # bidirectional greedy walk on one ring: mean distance near n/4; the
    # direction heuristic uses coordinate distance, so uneven coordinate
    # density can push individual walks past n/2 but never past a full lap
    assert 64 / 8 <= stats.mean <= 64 / 2
    assert stats.max <= 64


def test_lookup_cost_validation():
    net = OverlayNetwork(rings=1, seed=16)
    net.join(0)
    with pytest.raises(ValueError, match="two members"):
        net.lookup_cost()
    net.join(1)
    with pytest.raises(ValueError, match="samples"):
        net.lookup_cost(samples=0)


def test_check_reports_expected_fields():
    net = OverlayNetwork(rings=2, seed=17)
    for nid in range(6):
        net.join(nid)
    report = net.check()
    assert sorted(report) == [
        "degree_ok",
        "event",
        "max_degree",
        "nodes",
        "ring_order_ok",
        "rings",
        "two_hop_ok",
    ]
    assert report["nodes"] == 6 and report["rings"] == 2
    assert net.event_log[-1] is report


# -- mixed event soak -----------------------------------------------------------------


def test_mixed_event_sequence_preserves_invariants():
    net = OverlayNetwork(rings=2, seed=18)
    rng = np.random.default_rng(3)
    next_id = 0
    for _ in range(20):
        net.join(next_id)
        next_id += 1
    assert_healthy(net)
    for step in range(25):
        if net.n_nodes > 6 and rng.random() < 0.4:
            victim = int(rng.choice(net.live_ids()))
            net.fail_node(victim)
        elif net.n_nodes > 8 and rng.random() < 0.2:
            pair = rng.choice(net.live_ids(), size=2, replace=False)
            net.fail_simultaneous({int(pair[0]), int(pair[1])})
        else:
            net.join(next_id)
            next_id += 1
        assert_healthy(net)
