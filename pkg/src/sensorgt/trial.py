"""Per-trial simulation loop shared by GP and RWGP, plus the result record."""

from __future__ import annotations

from dataclasses import dataclass
from typing import IO, Callable, Sequence

import numpy as np

from .analysis import p_error_model
from .binmat import RankAccumulator, unpack_rows
from .gtcore import DefectVector, epsilon
from .protocol import (FreshTest, ProtocolConfig, attempt_decode, begin_round, decoder_params,
                       deliver, init_states, phase_t2, trace_lines)
from .topology import ClusterAssignment, Topology


@dataclass
class TrialResult:
    scheme: str
    detected: np.ndarray        # (rounds, S) bool, latched
    ranks: np.ndarray           # (rounds, S) int
    bits: np.ndarray            # (rounds,) int, cumulative
    instant: np.ndarray | None = None       # (rounds, S) correct decode at that round
    cluster_rank: np.ndarray | None = None  # (rounds, S) min per-slot rank, omniscient
    false_detections: int = 0
    decode_events: int = 0

    @property
    def rounds(self) -> int:
        return self.detected.shape[0]

    @property
    def first_detection_round(self) -> int | None:
        """First round (1-based) at which every sensor has detected."""
        full = np.flatnonzero(self.detected.all(axis=1))
        return int(full[0]) + 1 if full.size else None


class SingleDecodeTracker:
    """Vectorised K=1 decoding over every sensor's growing log.

    Per sensor and column we keep how many negative and how many positive
    messages include that column. The negative count is the support
    difference against ``g``; adding the positives that miss the column
    gives the Hamming distance.
    """

    def __init__(self, S: int):
        self.S = S
        self.neg = np.zeros((S, S), dtype=np.int32)
        self.pos = np.zeros((S, S), dtype=np.int32)
        self.positives = np.zeros(S, dtype=np.int32)

    def update(self, rows: Sequence[int], outcomes: np.ndarray) -> None:
        arr = unpack_rows(rows, self.S)
        hit = outcomes.astype(bool)
        self.neg += arr & ~hit[:, None]
        self.pos += arr & hit[:, None]
        self.positives += hit

    def decode(self, eps: float) -> tuple[np.ndarray, np.ndarray]:
        """(detected, sensor) arrays; sensor is only meaningful where detected."""
        ham = self.neg + (self.positives[:, None] - self.pos)
        ham = np.where(self.neg <= eps, ham, np.iinfo(np.int32).max)
        hmin = ham.min(axis=1)
        ties = (ham == hmin[:, None]).sum(axis=1)
        ok = hmin < np.iinfo(np.int32).max
        return ok & (ties == 1), ham.argmin(axis=1)


TestSource = Callable[[int], tuple[list[FreshTest], int]]


def run_gossip_trial(scheme: str, topology: Topology, f: DefectVector, config: ProtocolConfig,
                     source: TestSource, pull_rng: np.random.Generator, *,
                     bits_per_round: Callable[[], int],
                     decode_clusters: Callable[[], ClusterAssignment | None] = lambda: None,
                     track_cluster_rank: bool = False,
                     trace: IO[str] | None = None,
                     states_out: list | None = None) -> TrialResult:
    """Run ``config.rounds`` rounds; ``source(t)`` supplies the fresh tests."""
    S, R, K = topology.S, config.rounds, config.K
    states = init_states(S, provenance=track_cluster_rank)
    if states_out is not None:
        states_out.append(states)
    truth = set(f.sensors)
    k_true = f.sensors[0] if K == 1 else -1

    detected = np.zeros((R, S), dtype=bool)
    instant = np.zeros((R, S), dtype=bool)
    ranks = np.zeros((R, S), dtype=np.int32)
    bits = np.zeros(R, dtype=np.int64)
    cluster_rank = np.zeros((R, S), dtype=np.int32) if track_cluster_rank else None

    accs = [RankAccumulator() for _ in range(S)]
    tracker = SingleDecodeTracker(S) if K == 1 else None
    latched = np.zeros(S, dtype=bool)
    total_bits = 0
    false_det = 0
    events = 0
    slot_accs = None
    slot_masks: list[int] = []
    p_err = None

    for r in range(R):
        t = begin_round(states)
        tests, n_slots = source(t)
        deliver(states, tests, t, n_slots)
        pulls = phase_t2(states, topology, config, pull_rng)
        total_bits += bits_per_round()
        bits[r] = total_bits
        if trace is not None:
            trace.write("\n".join(trace_lines(states, pulls)) + "\n")

        rows = [st.current.indicator.bits for st in states]
        for i in range(S):
            accs[i].add(rows[i])
            ranks[r, i] = accs[i].rank

        if K == 1:
            g = np.fromiter((st.current.outcome for st in states), dtype=np.int8, count=S)
            tracker.update(rows, g)
            det, who = tracker.decode(epsilon(config.slack, config.p, config.q, t))
            good = det & (who == k_true)
            false_det += int((det & (who != k_true)).sum())
        else:
            clusters = decode_clusters()
            if p_err is None:
                p_err = p_error_model(S, config.L, K, config.q) if S // config.L >= K else 1.0
            good = np.zeros(S, dtype=bool)
            for i, st in enumerate(states):
                res = attempt_decode(st, S, K, clusters, decoder_params(st, config, p_err))
                if res.detected:
                    if set(res.sensors) == truth:
                        good[i] = True
                    else:
                        false_det += 1
        events += S
        instant[r] = good
        latched |= good
        detected[r] = latched

        if track_cluster_rank:
            if slot_accs is None:
                slot_accs = [[RankAccumulator() for _ in range(n_slots)] for _ in range(S)]
                slot_masks = [0] * n_slots
            for l in range(n_slots):
                slot_masks[l] |= 1 << ((t - 1) * n_slots + l)
            for i, st in enumerate(states):
                for l in range(n_slots):
                    slot_accs[i][l].add(st.prov & slot_masks[l])
                cluster_rank[r, i] = min(a.rank for a in slot_accs[i])

    return TrialResult(scheme, detected, ranks, bits, instant, cluster_rank, false_det, events)
