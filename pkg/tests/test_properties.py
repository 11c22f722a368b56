"""Property tests for the algebraic and decoding invariants."""

import itertools

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from sensorgt.binmat import (BitMatrix, BitVector, RankAccumulator, gf2_rank,
                             hamming_distance, support_difference)
from sensorgt.gtcore import TestMessage as Msg
from sensorgt.gtcore import (DETECTED, _best_unions, distance_decode_single,
                             min_private_support, multi_decode, search_space)

N = 12


@st.composite
def vectors(draw, n=N):
    return BitVector(n, draw(st.integers(0, (1 << n) - 1)))


@st.composite
def matrices(draw, max_rows=8, min_cols=2, max_cols=7):
    c = draw(st.integers(min_cols, max_cols))
    r = draw(st.integers(1, max_rows))
    rows = draw(st.lists(st.integers(0, (1 << c) - 1), min_size=r, max_size=r))
    return BitMatrix(tuple(rows), c)


@given(vectors(), vectors(), vectors())
def test_xor_is_an_abelian_group(a, b, c):
    z = BitVector.zeros(N)
    assert (a ^ b) ^ c == a ^ (b ^ c)
    assert a ^ b == b ^ a
    assert a ^ z == a and a ^ a == z


@given(vectors(), vectors())
def test_distances(a, b):
    assert hamming_distance(a, b) == (a ^ b).popcount()
    assert hamming_distance(a, b) == support_difference(a, b) + support_difference(b, a)
    assert support_difference(a, b) == (a & ~b).popcount()


@given(vectors(), vectors())
def test_de_morgan(a, b):
    assert ~(a | b) == (~a) & (~b)
    assert (a | b).popcount() + (a & b).popcount() == a.popcount() + b.popcount()


@given(matrices(), st.randoms(use_true_random=False))
def test_rank_bounds_and_row_permutation(M, rnd):
    r = gf2_rank(M)
    assert 0 <= r <= min(M.n_rows, M.cols)
    rows = list(M.rows)
    rnd.shuffle(rows)
    assert gf2_rank(BitMatrix(tuple(rows), M.cols)) == r
    acc = RankAccumulator()
    for row in M.rows:
        acc.add(row)
    assert acc.rank == r
    assert all(acc.contains(a ^ b) for a, b in itertools.combinations(M.rows, 2))


@given(matrices(min_cols=3, max_cols=6), st.integers(1, 2), st.randoms(use_true_random=False))
def test_private_support_invariant_under_permutations(M, K, rnd):
    base = min_private_support(M, K)
    arr = M.to_array()
    rp = list(range(arr.shape[0]))
    cp = list(range(arr.shape[1]))
    rnd.shuffle(rp)
    rnd.shuffle(cp)
    assert min_private_support(BitMatrix.from_array(arr[rp][:, cp]), K) == base


def naive_best(groups, colmask, m, n1, eps):
    scored = {}
    for u in search_space(groups, m, m):
        cover = 0
        for j in u:
            cover |= colmask[j]
        d = n1 - cover.bit_count()
        if d <= eps:
            scored[u] = d
    if not scored:
        return None, set()
    best = min(scored.values())
    return best, {u for u, d in scored.items() if d == best}


@settings(max_examples=200)
@given(st.data())
def test_branch_and_bound_matches_literal_scan(data):
    n1 = data.draw(st.integers(1, 10))
    G = data.draw(st.integers(1, 4))
    groups, j = [], 0
    for _ in range(G):
        k = data.draw(st.integers(1, 3))
        groups.append(list(range(j, j + k)))
        j += k
    colmask = {c: data.draw(st.integers(0, (1 << n1) - 1)) for c in range(j)}
    m = data.draw(st.integers(1, G))
    eps = data.draw(st.sampled_from([0, 1, 2.5, 100]))
    d, best = _best_unions(groups, colmask, m, n1, eps)
    nd, nbest = naive_best(groups, colmask, m, n1, eps)
    assert d == nd
    assert set(best) == nbest


@st.composite
def logs(draw, S=8, max_rows=14):
    B = draw(st.integers(1, max_rows))
    rows = draw(st.lists(st.integers(0, (1 << S) - 1), min_size=B, max_size=B))
    k = draw(st.integers(0, S - 1))
    g = [int(bool((r >> k) & 1)) for r in rows]
    flips = draw(st.lists(st.booleans(), min_size=B, max_size=B))
    noisy = [gi ^ int(fl) for gi, fl in zip(g, flips)]
    return S, k, rows, g, noisy


def to_msgs(rows, g, S):
    return [Msg(gi, BitVector(S, r), t + 1) for t, (r, gi) in enumerate(zip(rows, g))]


@given(logs(), st.sampled_from([0, 1, 2.5]), st.randoms(use_true_random=False))
def test_single_decode_ignores_row_order(log, eps, rnd):
    S, _, rows, _, g = log
    base = distance_decode_single(to_msgs(rows, g, S), S, eps)
    order = list(range(len(rows)))
    rnd.shuffle(order)
    perm = distance_decode_single(to_msgs([rows[i] for i in order], [g[i] for i in order], S),
                                  S, eps)
    assert perm == base


@given(logs())
def test_noiseless_single_decode_never_misfires(log):
    S, k, rows, g, _ = log
    res = distance_decode_single(to_msgs(rows, g, S), S, 0)
    if res.status == DETECTED:
        assert res.sensors == (k,)


@settings(max_examples=100)
@given(logs(), st.randoms(use_true_random=False))
def test_multi_decode_ignores_row_order(log, rnd):
    S, _, rows, _, g = log
    membership = np.arange(S) % 3
    base = multi_decode(to_msgs(rows, g, S), membership, 2, 1.0, S)
    order = list(range(len(rows)))
    rnd.shuffle(order)
    perm = multi_decode(to_msgs([rows[i] for i in order], [g[i] for i in order], S),
                        membership, 2, 1.0, S)
    assert (perm.status, perm.sensors) == (base.status, base.sensors)
