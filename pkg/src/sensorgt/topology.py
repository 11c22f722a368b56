"""Network graphs and master/cluster partitions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np

DEFAULT_RETRY_BUDGET = 1000


class TopologyError(RuntimeError):
    """Raised when a graph or cluster assignment cannot be constructed."""


class Kind(str, enum.Enum):
    COMPLETE = "complete"
    KREGULAR = "kregular"
    GEOMETRIC = "geometric"


class MasterMode(str, enum.Enum):
    RM = "rm"
    DM = "dm"


@dataclass(frozen=True, eq=False)
class Topology:
    kind: Kind
    S: int
    adjacency: np.ndarray  # (S, S) bool, symmetric, zero diagonal
    k: int | None = None
    radius: float | None = None
    positions: np.ndarray | None = None
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)
        nbrs = tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in adj)
        object.__setattr__(self, "neighbors", nbrs)

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def edges(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def is_connected(self) -> bool:
        return _connected(self.adjacency)

    def check(self) -> None:
        """Raise TopologyError if any structural invariant is broken."""
        adj = self.adjacency
        if adj.shape != (self.S, self.S):
            raise TopologyError("adjacency shape does not match S")
        if not np.array_equal(adj, adj.T):
            raise TopologyError("adjacency is not symmetric")
        if adj.diagonal().any():
            raise TopologyError("self loops present")
        if not self.is_connected():
            raise TopologyError("graph is disconnected")
        if self.kind is Kind.KREGULAR and not (self.degrees == self.k).all():
            raise TopologyError("degree is not k everywhere")

    def __eq__(self, other):
        if not isinstance(other, Topology):
            return NotImplemented
        return (self.kind == other.kind and self.S == other.S
                and np.array_equal(self.adjacency, other.adjacency))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.S))
        g.add_edges_from(self.edges())
        return g

    # edge-list text format: "S k|radius" header, then one "i j" line per edge
    def to_edgelist(self) -> str:
        if self.kind is Kind.GEOMETRIC:
            param = repr(float(self.radius))
        elif self.kind is Kind.KREGULAR:
            param = str(self.k)
        else:
            param = str(self.S - 1)
        lines = [f"{self.S} {param}"]
        lines += [f"{i} {j}" for i, j in self.edges()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str) -> "Topology":
        lines = [ln.split() for ln in text.strip().splitlines() if ln.strip()]
        S = int(lines[0][0])
        param = lines[0][1]
        adj = np.zeros((S, S), dtype=bool)
        for i, j in lines[1:]:
            i, j = int(i), int(j)
            adj[i, j] = adj[j, i] = True
        if "." in param or "e" in param.lower():
            return cls(Kind.GEOMETRIC, S, adj, radius=float(param))
        k = int(param)
        if k == S - 1 and adj.sum() == S * (S - 1):
            return cls(Kind.COMPLETE, S, adj, k=k)
        return cls(Kind.KREGULAR, S, adj, k=k)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_edgelist())

    @classmethod
    def load(cls, path: str | Path) -> "Topology":
        return cls.from_edgelist(Path(path).read_text())


def _connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]
    if n == 0:
        return False
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    frontier = seen.copy()
    while frontier.any():
        nxt = adj[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = nxt
    return bool(seen.all())


def build_complete(S: int) -> Topology:
    if S < 2:
        raise ValueError("complete graph needs S >= 2")
    adj = ~np.eye(S, dtype=bool)
    return Topology(Kind.COMPLETE, S, adj, k=S - 1)


def build_k_regular(S: int, k: int, rng: np.random.Generator,
                    retries: int = DEFAULT_RETRY_BUDGET) -> Topology:
    if not 0 < k < S:
        raise ValueError("need 0 < k < S")
    if (S * k) % 2:
        raise ValueError(f"no {k}-regular graph on {S} vertices (S*k odd)")
    for _ in range(retries):
        seed = int(rng.integers(2**63 - 1))
        g = nx.random_regular_graph(k, S, seed=seed)
        adj = nx.to_numpy_array(g, nodelist=range(S), dtype=bool)
        if _connected(adj):
            return Topology(Kind.KREGULAR, S, adj, k=k)
    raise TopologyError(f"no connected {k}-regular graph after {retries} attempts")


def build_random_geometric(S: int, radius: float, min_degree: int,
                           rng: np.random.Generator,
                           retries: int = DEFAULT_RETRY_BUDGET) -> Topology:
    """Uniform placement in the unit square, edge iff distance <= radius.

    The whole placement is redrawn until the graph is connected and every
    sensor has at least ``min_degree`` neighbours.
    """
    if not 0 <= radius <= math.sqrt(2) + 1e-12:
        raise ValueError("radius must lie in [0, sqrt(2)]")
    if S < 2:
        raise ValueError("need S >= 2")
    for _ in range(retries):
        pos = rng.random((S, 2))
        d = np.sqrt(((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1))
        adj = d <= radius
        np.fill_diagonal(adj, False)
        if adj.sum(axis=1).min() >= min_degree and _connected(adj):
            return Topology(Kind.GEOMETRIC, S, adj, radius=radius, positions=pos)
    raise TopologyError(
        f"no connected geometric graph (S={S}, r={radius}, min degree {min_degree}) "
        f"after {retries} attempts")


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    masters: tuple[int, ...]
    membership: np.ndarray  # sensor -> cluster index

    @property
    def L(self) -> int:
        return len(self.masters)

    @property
    def S(self) -> int:
        return len(self.membership)

    def members(self, l: int) -> list[int]:
        return np.flatnonzero(self.membership == l).tolist()

    def member_masks(self) -> list[int]:
        """Cluster memberships as int bitsets over sensors."""
        masks = [0] * self.L
        for s, l in enumerate(self.membership.tolist()):
            masks[l] |= 1 << s
        return masks

    def check(self, topology: Topology) -> None:
        m = self.membership
        if m.shape != (topology.S,) or m.min() < 0 or m.max() >= self.L:
            raise TopologyError("membership is not a total map onto clusters")
        if len(set(self.masters)) != self.L:
            raise TopologyError("duplicate masters")
        for l, ms in enumerate(self.masters):
            if m[ms] != l:
                raise TopologyError(f"master {ms} is not in its own cluster {l}")
        for s in range(topology.S):
            ms = self.masters[m[s]]
            if s != ms and not topology.adjacency[s, ms]:
                raise TopologyError(f"sensor {s} is not adjacent to its master {ms}")

    def __eq__(self, other):
        if not isinstance(other, ClusterAssignment):
            return NotImplemented
        return self.masters == other.masters and np.array_equal(self.membership, other.membership)


def _closed_nbhd(topology: Topology) -> np.ndarray:
    return topology.adjacency | np.eye(topology.S, dtype=bool)


def _assign_random(N: np.ndarray, masters: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    L, S = len(masters), N.shape[0]
    cover = N[masters]  # (L, S): master l can take sensor s
    scores = np.where(cover, rng.random((L, S)), -1.0)
    membership = scores.argmax(axis=0)
    membership[masters] = np.arange(L)
    return membership


def _assign_balanced(N: np.ndarray, masters: Sequence[int]) -> np.ndarray:
    S = N.shape[0]
    membership = np.full(S, -1)
    sizes = [1] * len(masters)
    for l, ms in enumerate(masters):
        membership[ms] = l
    for s in range(S):
        if membership[s] >= 0:
            continue
        options = [l for l, ms in enumerate(masters) if N[ms, s]]
        best = min(options, key=lambda l: (sizes[l], l))
        membership[s] = best
        sizes[best] += 1
    return membership


def _first_dominating_set(N: np.ndarray, L: int, budget: int) -> list[int] | None:
    """Lexicographically smallest L-subset whose closed neighbourhoods cover all."""
    S = N.shape[0]
    cover_int = [int.from_bytes(np.packbits(row, bitorder="little").tobytes(), "little")
                 for row in N]
    full = (1 << S) - 1
    max_cover = max(c.bit_count() for c in cover_int)
    expanded = 0
    chosen: list[int] = []

    def dfs(start: int, covered: int) -> bool:
        nonlocal expanded
        expanded += 1
        if expanded > budget:
            raise TopologyError("dominating-set search budget exhausted")
        if covered == full:
            # pad with the lowest unused indices; extra masters only shrink clusters
            rest = [v for v in range(S) if v not in chosen][: L - len(chosen)]
            chosen.extend(rest)
            chosen.sort()
            return True
        left = L - len(chosen)
        if left == 0:
            return False
        uncovered = full & ~covered
        if uncovered.bit_count() > left * max_cover:
            return False
        u = (uncovered & -uncovered).bit_length() - 1
        for v in range(start, S):
            if S - v < left:
                break
            # the lowest uncovered sensor must be covered by some later pick
            if v > u and not any(N[w, u] for w in range(v, S)):
                break
            chosen.append(v)
            if dfs(v + 1, covered | cover_int[v]):
                return True
            chosen.pop()
        return False

    if dfs(0, 0):
        return chosen
    return None


def assign_clusters(topology: Topology, L: int, mode: MasterMode | str,
                    rng: np.random.Generator | None = None,
                    retries: int = DEFAULT_RETRY_BUDGET) -> ClusterAssignment:
    """Pick L masters and partition every sensor into a 1-hop cluster.

    RM draws masters uniformly without replacement and gives each other
    sensor to a uniformly random adjacent master; draws that leave a sensor
    uncovered are rejected. DM takes the lexicographically first feasible
    master set and fills clusters deterministically, smallest cluster first.
    """
    mode = MasterMode(mode)
    S = topology.S
    if not 1 <= L <= S:
        raise ValueError("need 1 <= L <= S")
    N = _closed_nbhd(topology)
    if L == S:
        return ClusterAssignment(tuple(range(S)), np.arange(S))
    if mode is MasterMode.RM:
        if rng is None:
            raise ValueError("RM selection needs an rng")
        for _ in range(retries):
            masters = rng.choice(S, size=L, replace=False)
            if N[masters].any(axis=0).all():
                membership = _assign_random(N, masters, rng)
                return ClusterAssignment(tuple(int(m) for m in masters), membership)
        raise TopologyError(f"no feasible random master set after {retries} attempts")
    masters = _first_dominating_set(N, L, budget=retries * 1000)
    if masters is None:
        raise TopologyError(f"graph has no dominating set of size {L}")
    return ClusterAssignment(tuple(masters), _assign_balanced(N, masters))
