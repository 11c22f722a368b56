import math

import networkx as nx
import numpy as np
import pytest

from sensorgt.topology import (MasterMode, Topology, TopologyError, assign_clusters,
                               build_complete, build_k_regular, build_random_geometric)


def test_complete_graphs():
    assert build_complete(3).edges() == [(0, 1), (0, 2), (1, 2)]
    assert (build_complete(20).degrees == 19).all()
    assert build_complete(2).edges() == [(0, 1)]


def test_k_regular_examples():
    rng = np.random.default_rng(1)
    t = build_k_regular(20, 16, rng)
    assert (t.degrees == 16).all()
    assert (build_k_regular(4, 3, rng).adjacency == build_complete(4).adjacency).all()
    t6 = build_k_regular(20, 6, np.random.default_rng(1))
    assert (t6.degrees == 6).all()
    assert nx.is_connected(t6.to_networkx())


def test_k_regular_rejects_odd_product():
    with pytest.raises((TopologyError, ValueError)):
        build_k_regular(5, 3, np.random.default_rng(0))


def test_random_geometric_examples():
    full = build_random_geometric(10, math.sqrt(2), 1, np.random.default_rng(0))
    assert (full.degrees == 9).all()
    t = build_random_geometric(20, 0.45, 3, np.random.default_rng(7))
    assert t.degrees.min() >= 3
    assert nx.is_connected(t.to_networkx())
    with pytest.raises(TopologyError):
        build_random_geometric(10, 0.0, 1, np.random.default_rng(0), retries=5)


def test_edgelist_roundtrip(tmp_path):
    t = build_random_geometric(15, 0.5, 2, np.random.default_rng(3))
    back = Topology.from_edgelist(t.to_edgelist())
    assert back == t and back.kind == t.kind
    t.save(tmp_path / "g.txt")
    assert Topology.load(tmp_path / "g.txt") == t


def test_dm_on_complete_graph():
    cl = assign_clusters(build_complete(6), 2, MasterMode.DM)
    assert cl.masters == (0, 1)
    assert sorted(cl.membership.tolist()) == [0, 0, 0, 1, 1, 1]
    cl.check(build_complete(6))


def test_dm_is_deterministic_and_balanced():
    topo = build_random_geometric(40, 0.5, 3, np.random.default_rng(5))
    a = assign_clusters(topo, 4, MasterMode.DM)
    assert a == assign_clusters(topo, 4, "dm")
    a.check(topo)
    sizes = np.bincount(a.membership, minlength=4)
    assert sizes.min() >= 1


def test_rm_master_sets_vary():
    topo = build_complete(20)
    rng = np.random.default_rng(11)
    draws = [frozenset(assign_clusters(topo, 5, MasterMode.RM, rng).masters) for _ in range(200)]
    # two identical draws in a row has probability 1/C(20,5) each time
    repeats = sum(a == b for a, b in zip(draws, draws[1:]))
    assert repeats <= 1


def test_singleton_clusters():
    cl = assign_clusters(build_complete(7), 7, MasterMode.RM, np.random.default_rng(0))
    assert all(cl.members(l) == [cl.masters[l]] for l in range(7))


def test_members_adjacent_to_master():
    topo = build_k_regular(20, 8, np.random.default_rng(2))
    rng = np.random.default_rng(4)
    for _ in range(20):
        cl = assign_clusters(topo, 5, MasterMode.RM, rng)
        for s in range(20):
            m = cl.masters[cl.membership[s]]
            assert s == m or topo.adjacency[s, m]


def test_infeasible_dm_raises():
    # a path on 7 vertices cannot be dominated by one master
    adj = np.zeros((7, 7), dtype=bool)
    for i in range(6):
        adj[i, i + 1] = adj[i + 1, i] = True
    topo = Topology("geometric", 7, adj)
    with pytest.raises(TopologyError):
        assign_clusters(topo, 1, MasterMode.DM)
