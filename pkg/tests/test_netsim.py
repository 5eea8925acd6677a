from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from codedcache.coding import Content, ContentStore, NodeCache, encode, random_store
from codedcache.errors import ContractViolation
from codedcache.gf2 import BitVector, EchelonBasis
from codedcache.netsim import (
    Topology,
    build_topology,
    next_hop,
    plan_local_groups,
    proactive_gather,
    reactive_walk,
    relay_transmissions,
    replay_retrieval,
    resolve_direction,
    square_let_scale,
    walk_cells,
    walk_order,
)
from codedcache.placement import Placement, PlacementConfig


def network(n=300, m=20, M=5, scheme="coded", seed=0, Q=64, independence=False):
    topo = build_topology(n, seed=seed)
    store = random_store(m, Q, np.random.default_rng(seed + 1))
    caches = Placement(PlacementConfig(scheme, m, M, independence, seed + 2), store, n)
    return topo, store, caches


def hand_topology(cells: dict[tuple[int, int], tuple[int, ...]], anchors, grid: int) -> Topology:
    n = 1 + max(v for ids in cells.values() for v in ids)
    cx, cy = np.zeros(n, np.int64), np.zeros(n, np.int64)
    for (x, y), ids in cells.items():
        for v in ids:
            cx[v], cy[v] = x, y
    return Topology(n, 1.0, 1.0, np.zeros((n, 2)), 1.0 / grid, grid, cx, cy, cells, anchors)


# topology ---------------------------------------------------------------------------


def test_square_let_arithmetic():
    topo = build_topology(1000, seed=0)
    assert math.isclose(topo.s, 0.08311, abs_tol=1e-5)
    assert topo.grid == 13 and topo.c2 == 3.0


def test_every_node_in_exactly_one_square_let():
    topo = build_topology(500, c1=1.3, seed=4)
    seen = sorted(v for ids in topo.members.values() for v in ids)
    assert seen == list(range(500))
    for cell, ids in topo.members.items():
        assert list(ids) == sorted(ids)
        assert topo.anchors[cell] in ids
        for v in ids:
            assert topo.cell_of(v) == cell
            x, y = topo.positions[v]
            assert cell == (min(int(x / topo.cell_side), topo.grid - 1), min(int(y / topo.cell_side), topo.grid - 1))


def test_interior_square_lets_hold_log_n_nodes():
    counts = []
    for seed in range(40):
        topo = build_topology(1000, seed=seed)
        g = topo.grid
        counts += [len(topo.nodes_in((x, y))) for x in range(g - 1) for y in range(g - 1)]
    mean = sum(counts) / len(counts)
    assert abs(mean - math.log(1000)) < 0.1


def test_topology_deterministic_and_validated():
    a, b = build_topology(200, seed=5), build_topology(200, seed=5)
    assert np.array_equal(a.positions, b.positions) and a.anchors == b.anchors
    for bad in (dict(n=1), dict(n=10, c1=0), dict(n=10, delta=-1)):
        with pytest.raises(ContractViolation):
            build_topology(**bad)


# local groups -----------------------------------------------------------------------


def test_local_group_snapping():
    topo = build_topology(1000, seed=0)
    plan = plan_local_groups(topo, 100, 4, 1.0)
    assert math.isclose(plan.s_g, 0.1581, abs_tol=1e-4)
    assert plan.cells_per_side == 2 and not plan.degenerate
    assigned = [c for gx in range(plan.groups_per_axis) for gy in range(plan.groups_per_axis) for c in plan.cells((gx, gy))]
    assert sorted(assigned) == sorted((x, y) for x in range(13) for y in range(13))
    for c in assigned:
        assert c in plan.cells(plan.group_of(c))


def test_smallest_and_degenerate_groups():
    topo = build_topology(1000, seed=0)
    assert plan_local_groups(topo, 7, 7).cells_per_side == 1
    huge = plan_local_groups(topo, 100, 1, c4=20.0)
    assert huge.degenerate and len(huge.cells((0, 0))) == 169


def test_group_node_count_tracks_m_over_M():
    topo_counts = []
    for seed in range(20):
        topo = build_topology(1000, seed=seed)
        plan = plan_local_groups(topo, 100, 4)
        g = plan.groups_per_axis
        for gx in range(g):
            for gy in range(g):
                topo_counts.append(sum(len(topo.nodes_in(c)) for c in plan.cells((gx, gy))))
    mean = sum(topo_counts) / len(topo_counts)
    # whole square-lets and leftover rows make groups slightly larger than s_g
    assert 25 <= mean <= 25 * 1.25


# walk order -------------------------------------------------------------------------


@pytest.mark.parametrize("direction", ["E", "W", "N", "S"])
def test_walk_visits_every_square_let_once(direction):
    topo = build_topology(400, seed=1)
    start = (3, 5)
    cells = list(walk_cells(topo, start, direction))
    assert cells[0] == start and len(cells) == len(set(cells)) == topo.grid**2
    step = {"E": (1, 0), "W": (-1, 0), "N": (0, 1), "S": (0, -1)}[direction]
    assert cells[1] == ((start[0] + step[0]) % topo.grid, (start[1] + step[1]) % topo.grid)


def test_walk_order_skips_requester():
    topo = build_topology(300, seed=2)
    order = list(walk_order(topo, 17, "E"))
    assert 17 not in order and sorted(order) == [v for v in range(300) if v != 17]
    own = topo.nodes_in(topo.cell_of(17))
    assert order[: len(own) - 1] == [v for v in own if v != 17]


def test_resolve_direction():
    rng = np.random.default_rng(0)
    assert {resolve_direction("random", rng) for _ in range(200)} == {"E", "W", "N", "S"}
    assert resolve_direction("N") == "N"
    with pytest.raises(ContractViolation):
        resolve_direction("NE")


# reactive walk ------------------------------------------------------------------------


def test_self_sufficient_requester_needs_no_hops():
    topo, store, caches = network(m=10, M=10, independence=True)
    result = reactive_walk(topo, caches, store, 0, "E")
    assert result.success and result.hops == 0 and result.transmissions == 0
    single = reactive_walk(topo, caches, store, 0, "E", target=3)
    assert single.success and single.hops == 0 and single.decoded == store.payload(3)


def test_uncoded_immediate_hit():
    topo, store, caches = network(scheme="uncoded", m=20, M=2)
    requester = 5
    first = next(walk_order(topo, requester, "W"))
    target = next(i for i in caches[first].indices() if i not in caches[requester].indices())
    result = reactive_walk(topo, caches, store, requester, "W", target=target)
    assert result.success and result.hops == 1 and result.path == (first,)


def test_walk_exhaustion_reports_failure():
    topo = build_topology(30, seed=3)
    store = random_store(6, 16, np.random.default_rng(0))
    blank = {v: NodeCache(v, "coded", (encode(BitVector.zeros(6), store),)) for v in range(30)}
    for target in (None, 2):
        result = reactive_walk(topo, blank, store, 0, "S", target=target)
        assert not result.success and result.hops == 29


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(["E", "W", "N", "S"]), st.sampled_from(["coded", "uncoded"]))
def test_all_contents_walk_invariants(seed, direction, scheme):
    m, M, Q = 24, 4, 64
    topo, store, caches = network(n=200, m=m, M=M, scheme=scheme, seed=seed, Q=Q)
    requester = seed % 200
    result = reactive_walk(topo, caches, store, requester, direction)
    assert result.success
    if scheme == "coded":
        basis = EchelonBasis(m)
        for v in caches[requester].vectors():
            basis.add(v.bits)
        assert result.hops >= -(-(m - basis.rank) // M)
        assert result.secure_channel_bytes == result.hops * (-(-M * m // 8) + 1)
    assert result.data_channel_bytes == (Q // 8) * result.transmissions
    assert result.nodes_used == result.hops + 1


@settings(max_examples=25)
@given(st.integers(0, 10_000), st.sampled_from(["coded", "uncoded"]), st.sampled_from(["indexed", "all-ones"]))
def test_single_content_decodes_ground_truth(seed, scheme, rule):
    topo, store, caches = network(n=200, m=24, M=4, scheme=scheme, seed=seed)
    target = 1 + seed % 24
    result = reactive_walk(topo, caches, store, seed % 200, "random", target=target,
                           rng=np.random.default_rng(seed), gain_rule=rule)
    assert result.success and result.decoded == store.payload(target)
    assert result.direction in ("E", "W", "N", "S")
    if scheme == "coded":
        assert result.transmissions == result.hops
        assert replay_retrieval(caches, seed % 200, result) == store.payload(target)


def test_replay_needs_coded_single_result():
    topo, store, caches = network(scheme="uncoded", m=10, M=2)
    result = reactive_walk(topo, caches, store, 0, "E", target=1)
    with pytest.raises(ContractViolation):
        replay_retrieval(caches, 0, result)


def test_coded_directions_agree_on_average():
    means = {}
    for d in "EWNS":
        hops = []
        for seed in range(60):
            topo, store, caches = network(n=1000, m=100, M=25, seed=seed, Q=8)
            hops.append(reactive_walk(topo, caches, store, seed, d, verify=False).hops)
        means[d] = sum(hops) / len(hops)
    assert max(means.values()) - min(means.values()) < 0.5
    assert max(means.values()) < 5


# proactive gathering -------------------------------------------------------------------


def test_next_hop_moves_horizontally_first():
    assert next_hop((4, 1), (1, 3)) == (3, 1)
    assert next_hop((1, 1), (1, 3)) == (1, 2)
    assert next_hop((1, 5), (1, 3)) == (1, 4)


def test_relay_count_by_hand():
    topo = hand_topology({(0, 0): (0, 1), (2, 0): (2,)}, {(0, 0): 0, (2, 0): 2}, grid=3)
    # node 2 relays (2,0)->(1,0)->(0,0), anchor 0 delivers to requester 1
    assert relay_transmissions(topo, [(0, 0), (1, 0), (2, 0)], (0, 0), requester=1) == 3
    # requester is the anchor: no final delivery, node 1 uplinks once
    assert relay_transmissions(topo, [(0, 0), (1, 0), (2, 0)], (0, 0), requester=0) == 3
    assert relay_transmissions(topo, [(0, 0)], (0, 0), requester=0) == 1
    lonely = hand_topology({(0, 0): (0,), (1, 1): (1,)}, {(0, 0): 0, (1, 1): 1}, grid=2)
    assert relay_transmissions(lonely, [(0, 0)], (0, 0), requester=0) == 0


def test_proactive_degenerate_group():
    topo = hand_topology({(0, 0): (0,), (1, 1): (1,)}, {(0, 0): 0, (1, 1): 1}, grid=2)
    store = random_store(3, 16, np.random.default_rng(0))
    caches = {v: NodeCache(v, "coded", tuple(encode(BitVector.unit(3, i), store) for i in range(3))) for v in (0, 1)}
    plan = plan_local_groups(topo, 1, 1, c4=0.01)
    result = proactive_gather(topo, plan, caches, store, 0)
    assert result.transmissions == 0 and result.hops == 0 and result.success
    short = {0: NodeCache(0, "coded", (encode(BitVector.unit(3, 0), store),)), 1: caches[1]}
    assert not proactive_gather(topo, plan, short, store, 0).success


def test_proactive_success_with_double_margin():
    m, M = 64, 8
    ok = 0
    for trial in range(500):
        topo = build_topology(1000, seed=trial)
        store = random_store(m, 8, np.random.default_rng(trial))
        caches = Placement(PlacementConfig("coded", m, M, seed=trial), store, 1000)
        # c4=1.5 gives groups of about 36 nodes, over twice m/M
        plan = plan_local_groups(topo, m, M, c4=1.5)
        requester = trial % 1000
        ok += proactive_gather(topo, plan, caches, store, requester, verify=False).success
    assert ok / 500 >= 0.99


@pytest.mark.parametrize("scheme", ["coded", "uncoded"])
def test_proactive_single_content(scheme):
    for seed in range(10):
        topo, store, caches = network(n=500, m=16, M=4, scheme=scheme, seed=seed)
        plan = plan_local_groups(topo, 16, 4, c4=2.0)
        result = proactive_gather(topo, plan, caches, store, seed, target=1 + seed % 16)
        assert result.routing == "proactive" and result.mode == "single-content"
        if result.success:
            assert result.decoded == store.payload(1 + seed % 16)
        if scheme == "coded" and result.success:
            assert replay_retrieval(caches, seed, result) == store.payload(1 + seed % 16)


def test_proactive_uncoded_all_contents_matches_union():
    topo, store, caches = network(n=500, m=16, M=4, scheme="uncoded", seed=3)
    plan = plan_local_groups(topo, 16, 4, c4=2.0)
    result = proactive_gather(topo, plan, caches, store, 9)
    held = set(caches[9].indices()).union(*(caches[v].indices() for v in result.path))
    assert result.success == (len(held) == 16)
