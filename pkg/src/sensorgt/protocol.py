"""Round-based pull-gossip group testing.

A round has two phases. In the design phase every master draws a test over
its cluster and hands the resulting message to the cluster. In the
dissemination phase every sensor pulls one uniformly chosen neighbour's
message from the previous round and XORs it into its own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .binmat import BitVector
from .gtcore import (DecodeResult, DecoderParams, DefectVector, NoiseModel, TestMessage,
                     apply_noise, distance_decode_single, draw_test_row, multi_decode,
                     outcome)
from .topology import ClusterAssignment, MasterMode, Topology, assign_clusters


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    L: int
    K: int = 1
    alpha: float = 1.0
    p: float = 1.0
    master_mode: MasterMode = MasterMode.RM
    multi_mod: bool = False
    rounds: int = 30
    delta: float | None = None  # decoder slack; None means p / 2

    def __post_init__(self):
        object.__setattr__(self, "master_mode", MasterMode(self.master_mode))
        if self.K < 1:
            raise ConfigError("K must be at least 1")
        if not 0 < self.alpha <= 1:
            raise ConfigError("alpha must lie in (0, 1]")
        if not 0 < self.p <= 1:
            raise ConfigError("p must lie in (0, 1]")
        if self.K >= 2 and not self.multi_mod:
            raise ConfigError("multi_mod must be enabled when K >= 2")
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.L < 1:
            raise ConfigError("L must be at least 1")

    @property
    def q(self) -> float:
        return self.alpha / self.K

    @property
    def slack(self) -> float:
        return self.p / 2 if self.delta is None else self.delta


@dataclass
class SensorState:
    index: int
    current: TestMessage
    previous: TestMessage
    buffer: TestMessage | None = None
    log: list[TestMessage] = field(default_factory=list)
    # provenance: bitset over fresh-test ids XORed into ``current``
    prov: int | None = None
    prev_prov: int | None = None
    buffer_prov: int | None = None


def init_states(S: int, provenance: bool = False) -> list[SensorState]:
    zero = TestMessage.zero(S)
    p0 = 0 if provenance else None
    return [SensorState(i, zero, zero, prov=p0, prev_prov=p0) for i in range(S)]


@dataclass(frozen=True)
class FreshTest:
    """One test formed in the design phase and the sensors that receive it."""

    indicator: BitVector  # intended participation, carried in the message
    effective: BitVector  # participation after noise, used for the outcome
    outcome: int
    recipients: tuple[int, ...]
    origin: int
    slot: int


def design_tests(clusters: ClusterAssignment, f: DefectVector, q: float, p: float,
                 rng: np.random.Generator) -> list[FreshTest]:
    S = clusters.S
    noise = NoiseModel(p)
    tests = []
    for l, mask in enumerate(clusters.member_masks()):
        row = draw_test_row(mask, q, rng, S)
        eff = apply_noise(row, noise, rng)
        tests.append(FreshTest(row, eff, outcome(eff, f), tuple(clusters.members(l)),
                               clusters.masters[l], l))
    return tests


def begin_round(states: Sequence[SensorState]) -> int:
    """Shift current -> previous and return the new round index (1-based)."""
    for st in states:
        st.previous = st.current
        st.prev_prov = st.prov
    return len(states[0].log) + 1


def deliver(states: Sequence[SensorState], tests: Sequence[FreshTest], t: int,
            slots_per_round: int | None = None) -> None:
    """Install fresh messages as the t- message of their recipients.

    A sensor named by several tests keeps the first one. Sensors named by
    none keep carrying their previous message.
    """
    n_slots = slots_per_round or max(len(tests), 1)
    taken = set()
    for ft in tests:
        msg = TestMessage(ft.outcome, ft.indicator, t, ft.origin)
        pid = 1 << ((t - 1) * n_slots + ft.slot)
        for r in ft.recipients:
            if r in taken:
                continue
            taken.add(r)
            st = states[r]
            st.current = msg
            if st.prov is not None:
                st.prov = pid


def phase_t1(states: Sequence[SensorState], topology: Topology, clusters: ClusterAssignment,
             f: DefectVector, config: ProtocolConfig, rng: np.random.Generator
             ) -> list[FreshTest]:
    t = begin_round(states)
    tests = design_tests(clusters, f, config.q, config.p, rng)
    deliver(states, tests, t, clusters.L)
    return tests


def draw_pulls(topology: Topology, rng: np.random.Generator) -> np.ndarray:
    deg = topology.degrees
    if (deg == 0).any():
        raise ValueError("isolated sensor cannot pull")
    picks = rng.integers(0, deg)
    return np.array([topology.neighbors[i][k] for i, k in enumerate(picks.tolist())])


def phase_t2(states: Sequence[SensorState], topology: Topology, config: ProtocolConfig,
             rng: np.random.Generator, pulls: np.ndarray | None = None) -> np.ndarray:
    """Pull, combine and commit. Returns the neighbour each sensor pulled."""
    if pulls is None:
        pulls = draw_pulls(topology, rng)
    t = len(states[0].log) + 1
    multi = config.multi_mod
    for st, j in zip(states, pulls.tolist()):
        own = st.current
        src = states[j]
        other = src.previous
        if multi and own.outcome and other.outcome:
            # two positives are never XORed: park our own and take one whole
            if st.buffer is None:
                new = TestMessage(other.outcome, other.indicator, t, st.index)
                new_prov = src.prev_prov
            else:
                new = TestMessage(st.buffer.outcome, st.buffer.indicator, t, st.index)
                new_prov = st.buffer_prov
            st.buffer, st.buffer_prov = own, st.prov
        else:
            new = TestMessage(own.outcome ^ other.outcome,
                              BitVector(own.indicator.length,
                                        own.indicator.bits ^ other.indicator.bits),
                              t, st.index)
            new_prov = None if st.prov is None else st.prov ^ src.prev_prov
        st.current = new
        st.prov = new_prov
        st.log.append(new)
    return pulls


def run_round(states: Sequence[SensorState], topology: Topology,
              clusters: ClusterAssignment | None, f: DefectVector, config: ProtocolConfig,
              rng: np.random.Generator, pull_rng: np.random.Generator | None = None
              ) -> tuple[ClusterAssignment, list[FreshTest], np.ndarray]:
    """One full round. RM redraws the clusters first; DM keeps the given ones."""
    if config.master_mode is MasterMode.RM or clusters is None:
        clusters = assign_clusters(topology, config.L, config.master_mode, rng)
    tests = phase_t1(states, topology, clusters, f, config, rng)
    pulls = phase_t2(states, topology, config, pull_rng if pull_rng is not None else rng)
    return clusters, tests, pulls


def decoder_params(state: SensorState, config: ProtocolConfig, p_error: float = 0.0
                   ) -> DecoderParams:
    positives = sum(m.outcome for m in state.log)
    return DecoderParams.build(config.slack, config.p, config.q, len(state.log),
                               p_error, positives)


def attempt_decode(state: SensorState, S: int, K: int, clusters: ClusterAssignment | None,
                   params: DecoderParams) -> DecodeResult:
    if K == 1:
        return distance_decode_single(state.log, S, params.epsilon)
    if clusters is None:
        raise ValueError("multi-defective decoding needs the cluster assignment")
    return multi_decode(state.log, clusters.membership, K, params.epsilon_prime, S)


def trace_lines(states: Sequence[SensorState], pulls: Sequence[int]) -> list[str]:
    """``t sensor g W-row-hex pulled-from`` for every sensor's last committed message."""
    out = []
    for st, j in zip(states, pulls):
        m = st.log[-1]
        out.append(f"{m.round} {st.index} {m.outcome} {m.indicator.hex()} {int(j)}")
    return out


class BitMeter:
    """Counts transmitted bits event by event while a GP trial runs.

    The design phase costs ``L_n`` raw readings to the masters plus ``L_n``
    test messages (identifier list and outcome bit) back out; every pull
    answer costs one outcome bit and an S-bit indicator row.
    """

    def __init__(self, S: int, L: int, L_n: int, q: float, R_d: int = 7, I_d: int = 7):
        self.S, self.L, self.L_n, self.q, self.R_d, self.I_d = S, L, L_n, q, R_d, I_d
        self.ids_per_test = math.ceil(round(q * (L + L_n), 9))
        self.total = 0

    def on_design(self) -> None:
        self.total += self.L_n * self.R_d
        self.total += self.L_n * (self.I_d * self.ids_per_test + 1)

    def on_pull(self, n: int = 1) -> None:
        self.total += n * (1 + self.S)
