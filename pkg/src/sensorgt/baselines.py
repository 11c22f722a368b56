"""Comparison schemes: random-walk gossip (RWGP), random walk (RW),
store-and-forward (SF) and greedy store-and-forward (GSF).

RW, SF and GSF move raw readings, so a sensor knows the defective set
exactly once it holds every sensor's reading; that is when it counts as
having detected.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .analysis import OverheadInputs, comm_gsf, comm_rw, comm_rwgp, comm_sf
from .binmat import BitVector
from .gtcore import DefectVector, NoiseModel, apply_noise, outcome
from .protocol import FreshTest, ProtocolConfig, draw_pulls
from .topology import Topology
from .trial import TrialResult, run_gossip_trial


@dataclass(frozen=True)
class RawMeasurement:
    sensor: int
    defect_flag: int


def random_walk(topology: Topology, start: int, steps: int, rng: np.random.Generator) -> list[int]:
    """Simple random walk; returns the ``steps + 1`` visited positions."""
    path = [start]
    v = start
    for u in rng.random(steps).tolist():
        nb = topology.neighbors[v]
        v = nb[int(u * len(nb))]
        path.append(v)
    return path


def walk_tests(topology: Topology, f: DefectVector, L: int, walk_len: int, p: float,
               rng: np.random.Generator) -> list[FreshTest]:
    """L walks from distinct random starts; each walk's visited set is one test."""
    S = topology.S
    starts = rng.choice(S, size=L, replace=False)
    noise = NoiseModel(p)
    tests = []
    for l, s in enumerate(starts.tolist()):
        path = random_walk(topology, s, walk_len, rng)
        visited = sorted(set(path))
        row = BitVector.from_support(S, visited)
        eff = apply_noise(row, noise, rng)
        tests.append(FreshTest(row, eff, outcome(eff, f), tuple(visited), s, l))
    return tests


def _overhead(topology: Topology, L: int, rounds: int, R_d: int, I_d: int,
              n: int | None = None) -> OverheadInputs:
    return OverheadInputs(S=topology.S, L=L, L_n=max(topology.S - L, 1), tau=rounds,
                          R_d=R_d, I_d=I_d, n=n)


def _cumulative(cost, o: OverheadInputs, rounds: int) -> np.ndarray:
    return np.array([cost(replace(o, tau=t)) for t in range(1, rounds + 1)], dtype=np.int64)


def run_rwgp(topology: Topology, f: DefectVector, L: int, rounds: int, rng: np.random.Generator,
             walk_len: int | None = None, p: float = 1.0, delta: float | None = None,
             pull_rng: np.random.Generator | None = None, R_d: int = 7, I_d: int = 7
             ) -> TrialResult:
    S = topology.S
    n = S // L if walk_len is None else walk_len
    if n < 1:
        raise ValueError("walk length must be at least 1")
    config = ProtocolConfig(L=L, K=1, alpha=1.0, p=p, rounds=rounds, delta=delta)
    o = _overhead(topology, L, rounds, R_d, I_d, n=n)
    per_round = iter(np.diff(np.concatenate([[0], _cumulative(comm_rwgp, o, rounds)])).tolist())
    return run_gossip_trial("RWGP", topology, f, config,
                            lambda t: (walk_tests(topology, f, L, n, p, rng), L),
                            pull_rng if pull_rng is not None else rng,
                            bits_per_round=lambda: next(per_round))


def _raw_result(scheme: str, stores_per_round: list[np.ndarray], bits: np.ndarray) -> TrialResult:
    R = len(stores_per_round)
    S = stores_per_round[0].shape[0] if R else 0
    sizes = np.array([st.sum(axis=1) for st in stores_per_round], dtype=np.int32).reshape(R, S)
    full = sizes == S
    return TrialResult(scheme, full, sizes, bits, instant=full.copy())


def run_rw(topology: Topology, f: DefectVector, L: int, rounds: int, rng: np.random.Generator,
           R_d: int = 7, I_d: int = 7) -> TrialResult:
    """L walkers each carry every reading seen on their path and leave a copy at every stop."""
    S = topology.S
    store = np.eye(S, dtype=bool)
    pos = rng.choice(S, size=L, replace=False)
    carried = np.zeros((L, S), dtype=bool)
    carried[np.arange(L), pos] = True
    history = []
    for _ in range(rounds):
        u = rng.random(L)
        for w in range(L):
            nb = topology.neighbors[pos[w]]
            pos[w] = nb[int(u[w] * len(nb))]
            carried[w, pos[w]] = True
            store[pos[w]] |= carried[w]
        history.append(store.copy())
    o = _overhead(topology, L, rounds, R_d, I_d)
    return _raw_result("RW", history, _cumulative(comm_rw, o, rounds))


def _store_forward(topology: Topology, rounds: int, rng: np.random.Generator, greedy: bool
                   ) -> list[np.ndarray]:
    S = topology.S
    store = np.eye(S, dtype=bool)
    rows = np.arange(S)
    history = []
    for _ in range(rounds):
        pulls = draw_pulls(topology, rng)
        offer = store[pulls]
        if greedy:
            offer = offer & ~store
        scores = np.where(offer, rng.random((S, S)), -1.0)
        pick = scores.argmax(axis=1)
        has = offer.any(axis=1)
        new = store.copy()
        new[rows[has], pick[has]] = True
        store = new
        history.append(store.copy())
    return history


def run_sf(topology: Topology, f: DefectVector, rounds: int, rng: np.random.Generator,
           R_d: int = 7, I_d: int = 7) -> TrialResult:
    """Each sensor pulls one uniformly chosen reading from a random neighbour."""
    o = _overhead(topology, 1, rounds, R_d, I_d)
    return _raw_result("SF", _store_forward(topology, rounds, rng, greedy=False),
                       _cumulative(comm_sf, o, rounds))


def run_gsf(topology: Topology, f: DefectVector, rounds: int, rng: np.random.Generator,
            R_d: int = 7, I_d: int = 7) -> TrialResult:
    """Like SF, but the request names a reading the requester lacks."""
    o = _overhead(topology, 1, rounds, R_d, I_d)
    return _raw_result("GSF", _store_forward(topology, rounds, rng, greedy=True),
                       _cumulative(comm_gsf, o, rounds))
