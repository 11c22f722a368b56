"""Group-testing primitives: test rows, noise, disjunctness and decoders."""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .binmat import (BitMatrix, BitVector, DimensionError, hamming_distance, support_difference,
                     unpack_rows)

DETECTED = "detected"
AMBIGUOUS = "ambiguous"
NONE_FOUND = "none"

DISJUNCT_MAX_COLS = 25


@dataclass(frozen=True)
class DefectVector:
    f: BitVector

    def __post_init__(self):
        if self.K > self.S / 10:
            warnings.warn(f"defect vector is not sparse: K={self.K}, S={self.S}", stacklevel=3)

    @classmethod
    def from_sensors(cls, S: int, sensors: Iterable[int]) -> "DefectVector":
        return cls(BitVector.from_support(S, sensors))

    @property
    def S(self) -> int:
        return self.f.length

    @property
    def K(self) -> int:
        return self.f.popcount()

    @property
    def sensors(self) -> tuple[int, ...]:
        return tuple(self.f.support())


@dataclass(frozen=True, slots=True)
class TestMessage:
    outcome: int
    indicator: BitVector
    round: int = 0
    origin: int = -1

    @classmethod
    def zero(cls, S: int, origin: int = -1) -> "TestMessage":
        return cls(0, BitVector.zeros(S), 0, origin)

    def combine(self, other: "TestMessage", round: int, origin: int) -> "TestMessage":
        return TestMessage(self.outcome ^ other.outcome,
                           BitVector(self.indicator.length, self.indicator.bits ^ other.indicator.bits),
                           round, origin)


@dataclass(frozen=True)
class NoiseModel:
    p: float = 1.0

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")


@dataclass(frozen=True)
class DecoderParams:
    delta: float
    epsilon: float
    epsilon_prime: float

    @classmethod
    def build(cls, delta: float, p: float, q: float, B: int,
              p_error: float = 0.0, positive_count: int = 0) -> "DecoderParams":
        eps = epsilon(delta, p, q, B)
        return cls(delta, eps, epsilon_prime(eps, p_error, positive_count))


@dataclass(frozen=True)
class DecodeResult:
    status: str
    sensors: tuple[int, ...] = ()
    distances: tuple[float, ...] = ()

    @property
    def detected(self) -> bool:
        return self.status == DETECTED

    def to_dict(self) -> dict:
        return {"status": self.status, "sensors": list(self.sensors),
                "distances": list(self.distances)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeResult":
        return cls(d["status"], tuple(d["sensors"]), tuple(d["distances"]))


def draw_test_row(members: Iterable[int] | int, q: float, rng: np.random.Generator,
                  S: int | None = None) -> BitVector:
    """Each member joins the test independently with probability q.

    ``members`` is either an iterable of sensor indices (``S`` required) or
    an int bitset, in which case ``S`` defaults to its bit length.
    """
    if not 0 < q <= 1:
        raise ValueError("q must lie in (0, 1]")
    if isinstance(members, int):
        mask = members
        if S is None:
            S = mask.bit_length()
    else:
        if S is None:
            raise ValueError("S is required when members is a collection")
        mask = BitVector.from_support(S, members).bits
    if mask == 0:
        raise ValueError("empty member set")
    if q == 1:
        return BitVector(S, mask)
    draw = rng.random(S) < q
    return BitVector(S, mask & BitVector.from_array(draw).bits)


def apply_noise(row: BitVector, noise: NoiseModel | float, rng: np.random.Generator) -> BitVector:
    """Keep each 1-entry with probability p, flip it to 0 otherwise."""
    p = noise.p if isinstance(noise, NoiseModel) else float(noise)
    if p >= 1 or row.bits == 0:
        return row
    keep = rng.random(row.length) < p
    return BitVector(row.length, row.bits & BitVector.from_array(keep).bits)


def outcome(effective_row: BitVector, f: DefectVector | BitVector) -> int:
    fv = f.f if isinstance(f, DefectVector) else f
    if effective_row.length != fv.length:
        raise DimensionError("row and defect vector differ in length")
    return 1 if effective_row.bits & fv.bits else 0


def epsilon(delta: float, p: float, q: float, B: int) -> float:
    """Decoder threshold: (1 + delta) * (1 - p) * q * B."""
    return (1 + delta) * (1 - p) * q * B


def expected_flips(p: float, q: float, B: int) -> float:
    return (1 - p) * q * B


# ---------------------------------------------------------------------------
# disjunctness

def min_private_support(C: BitMatrix, K: int) -> int:
    """min over columns i and sets T of <= K other columns of |supp(i) \\ U_T supp(j)|."""
    S = C.cols
    if not 0 < K < S:
        raise ValueError("need 0 < K < number of columns")
    cols = [c.bits for c in C.columns()]
    best = None
    # the union only grows with T, so |T| = K is the binding case
    for i in range(S):
        others = [cols[j] for j in range(S) if j != i]
        ci = cols[i]
        for T in itertools.combinations(others, K):
            u = 0
            for c in T:
                u |= c
            priv = (ci & ~u).bit_count()
            if best is None or priv < best:
                best = priv
                if best == 0:
                    return 0
    return best


def is_disjunct(C: BitMatrix, K: int, eps: float) -> bool:
    if C.cols > DISJUNCT_MAX_COLS:
        raise ValueError(f"is_disjunct is exhaustive; refusing {C.cols} > {DISJUNCT_MAX_COLS} columns")
    return min_private_support(C, K) > eps


# ---------------------------------------------------------------------------
# decoders

def stack_messages(messages: Sequence[TestMessage], S: int) -> tuple[BitMatrix, BitVector]:
    rows = []
    g = 0
    for i, m in enumerate(messages):
        if m.indicator.length != S:
            raise DimensionError("message indicator length differs from S")
        rows.append(m.indicator.bits)
        if m.outcome:
            g |= 1 << i
    return BitMatrix(tuple(rows), S), BitVector(len(rows), g)


def column_distances(messages: Sequence[TestMessage], S: int) -> list[int]:
    """support_difference(W[:, i], g) for every column i."""
    W, g = stack_messages(messages, S)
    return [support_difference(col, g) for col in W.columns()]


def distance_decode_single(messages: Sequence[TestMessage], S: int, eps: float) -> DecodeResult:
    """Threshold, then unique minimum.

    Columns with at most ``eps`` ones outside the outcome support are
    candidates; among them the one closest to ``g`` in Hamming distance
    wins, provided it is the only one at that distance. The reported
    distances are the Hamming distances.
    """
    if not messages:
        return DecodeResult(NONE_FOUND)
    W, g = stack_messages(messages, S)
    cols = W.columns()
    cands = [i for i in range(S) if support_difference(cols[i], g) <= eps]
    if not cands:
        return DecodeResult(NONE_FOUND)
    h = {i: hamming_distance(cols[i], g) for i in cands}
    hmin = min(h.values())
    best = [i for i in cands if h[i] == hmin]
    if len(best) == 1:
        return DecodeResult(DETECTED, (best[0],), (hmin,))
    return DecodeResult(AMBIGUOUS, tuple(best), tuple(hmin for _ in best))


def split_outcomes(messages: Sequence[TestMessage], S: int | None = None
                   ) -> tuple[BitMatrix, BitMatrix, BitVector]:
    if S is None:
        if not messages:
            raise ValueError("S is required for an empty message list")
        S = messages[0].indicator.length
    neg = tuple(m.indicator.bits for m in messages if not m.outcome)
    pos = tuple(m.indicator.bits for m in messages if m.outcome)
    return BitMatrix(neg, S), BitMatrix(pos, S), BitVector.ones(len(pos))


def eliminate_nondefective(W1: BitMatrix, W0: BitMatrix, eps: float) -> list[int]:
    """Columns seen in some positive test and in at most eps negative tests."""
    if W1.cols != W0.cols:
        raise DimensionError("W1 and W0 differ in column count")
    in_pos = 0
    for r in W1.rows:
        in_pos |= r
    if W0.n_rows:
        neg_counts = unpack_rows(W0.rows, W0.cols).sum(axis=0)
    else:
        neg_counts = np.zeros(W0.cols, dtype=np.int64)
    keep = unpack_rows([in_pos], W1.cols)[0] & (neg_counts <= eps)
    return np.flatnonzero(keep).tolist()


def search_space(H: Sequence[Sequence[int]], K: int, m: int):
    """All unions of m columns taken from m distinct non-empty groups."""
    groups = [h for h in H if h]
    for combo in itertools.combinations(range(len(groups)), m):
        yield from itertools.product(*(groups[c] for c in combo))


def search_space_size(H: Sequence[Sequence[int]], K: int) -> int:
    sizes = [len(h) for h in H if h]
    total = 0
    for m in range(1, min(K, len(sizes)) + 1):
        for combo in itertools.combinations(sizes, m):
            total += math.prod(combo)
    return total


def _best_unions(groups: list[list[int]], colmask: dict[int, int], m: int, n1: int,
                 eps: float) -> tuple[int | None, list[tuple[int, ...]]]:
    """Smallest distance to g1 over m-unions (one column per group), and
    every union that attains it.

    Equivalent to scanning ``search_space`` but branch-and-bound: a branch
    is cut once its cover, even joined with every column still reachable,
    cannot get within the best distance seen so far (or within ``eps``).
    """
    G = len(groups)
    reach = [0] * (G + 1)
    for gi in range(G - 1, -1, -1):
        u = reach[gi + 1]
        for j in groups[gi]:
            u |= colmask[j]
        reach[gi] = u
    limit = math.floor(eps)  # distances are integers
    best_d: int | None = None
    best: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def walk(start: int, cover: int) -> None:
        nonlocal best_d, best
        need = len(chosen)
        if need == m:
            d = n1 - cover.bit_count()
            if best_d is None or d < best_d:
                best_d, best = d, [tuple(chosen)]
            elif d == best_d:
                best.append(tuple(chosen))
            return
        last = need + 1 == m
        for gi in range(start, G - (m - need) + 1):
            cutoff = limit if best_d is None else best_d
            if n1 - (cover | reach[gi]).bit_count() > cutoff:
                return
            for j in groups[gi]:
                nc = cover | colmask[j]
                cutoff = limit if best_d is None else best_d
                if n1 - (nc if last else nc | reach[gi + 1]).bit_count() > cutoff:
                    continue
                chosen.append(j)
                walk(gi + 1, nc)
                chosen.pop()

    walk(0, 0)
    return best_d, best


def multi_decode(messages: Sequence[TestMessage], membership: Sequence[int] | np.ndarray,
                 K: int, eps_prime: float, S: int | None = None) -> DecodeResult:
    """Cluster-restricted search decoder for up to K defectives.

    ``membership`` maps sensor -> cluster (a ClusterAssignment's
    ``membership`` array). Levels m = K..1 are tried in turn; the first level
    with a candidate inside the threshold decides the result.
    """
    membership = np.asarray(getattr(membership, "membership", membership))
    if S is None:
        S = len(membership)
    if not messages:
        return DecodeResult(NONE_FOUND)
    W0, W1, g1 = split_outcomes(messages, S)
    if W1.n_rows == 0:
        return DecodeResult(NONE_FOUND)
    surv = eliminate_nondefective(W1, W0, eps_prime)
    if not surv:
        return DecodeResult(NONE_FOUND)
    L = int(membership.max()) + 1
    H: list[list[int]] = [[] for _ in range(L)]
    for j in surv:
        H[int(membership[j])].append(j)
    groups = [h for h in H if h]
    colbits = W1.column_bits()
    colmask = {j: colbits[j] for j in surv}
    n1 = W1.n_rows
    for m in range(min(K, len(groups)), 0, -1):
        best_d, best = _best_unions(groups, colmask, m, n1, eps_prime)
        if best_d is None:
            continue
        if len(best) == 1:
            return DecodeResult(DETECTED, tuple(sorted(best[0])), (best_d,))
        tied = sorted({j for u in best for j in u})
        return DecodeResult(AMBIGUOUS, tuple(tied), (best_d,))
    return DecodeResult(NONE_FOUND)


def epsilon_prime(eps: float, p_error: float, positive_count: int) -> float:
    return eps + p_error * positive_count
