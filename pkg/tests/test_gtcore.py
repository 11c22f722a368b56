import math
import warnings

import numpy as np
import pytest

from oracles import (multi_oracle, private_support_by_subsets, rows_as_sets, single_oracle,
                     three_sigma)
from sensorgt.binmat import BitMatrix, BitVector, boolean_mat_vec
from sensorgt.gtcore import TestMessage as Msg
from sensorgt.gtcore import (AMBIGUOUS, DETECTED, NONE_FOUND, DecodeResult, DecoderParams,
                             DefectVector, NoiseModel, apply_noise,
                             distance_decode_single, draw_test_row, eliminate_nondefective,
                             epsilon, epsilon_prime, expected_flips, is_disjunct,
                             min_private_support, multi_decode, outcome, search_space,
                             search_space_size, split_outcomes)


def messages_from(rows: list[int], g: list[int], S: int) -> list[Msg]:
    return [Msg(gi, BitVector(S, r), t + 1) for t, (r, gi) in enumerate(zip(rows, g))]


def random_instance(rng, S, B, q, f_bits):
    rows = [int(BitVector.from_array(rng.random(S) < q).bits) for _ in range(B)]
    g = [int(bool(r & f_bits)) for r in rows]
    return rows, g


# ---------------------------------------------------------------------------
# test design and noise

def test_draw_test_row_full_participation():
    assert draw_test_row({1, 2, 3}, 1.0, np.random.default_rng(0), S=5).to_list() == [0, 1, 1, 1, 0]


def test_draw_test_row_mean():
    rng = np.random.default_rng(1)
    n, q, N = 12, 0.5, 10_000
    counts = [draw_test_row(range(n), q, rng, S=20).popcount() for _ in range(N)]
    sd = math.sqrt(n * q * (1 - q) / N)
    assert abs(np.mean(counts) - n * q) <= 3 * sd


def test_draw_test_row_tiny_q():
    rng = np.random.default_rng(2)
    assert all(draw_test_row(range(10), 1e-9, rng, S=10).popcount() == 0 for _ in range(100))


def test_draw_test_row_stays_inside_members():
    rng = np.random.default_rng(3)
    for _ in range(50):
        r = draw_test_row(0b10110, 0.7, rng, S=6)
        assert r.bits & ~0b10110 == 0


def test_apply_noise_extremes():
    rng = np.random.default_rng(0)
    row = BitVector.from_support(8, [0, 3, 5])
    assert apply_noise(row, NoiseModel(1.0), rng) == row
    assert apply_noise(row, NoiseModel(0.0), rng) == BitVector.zeros(8)


def test_apply_noise_mean():
    rng = np.random.default_rng(4)
    row = BitVector.from_support(30, range(10))
    N, p = 10_000, 0.9
    kept = [apply_noise(row, p, rng).popcount() for _ in range(N)]
    assert abs(np.mean(kept) - 9) <= 3 * math.sqrt(10 * p * (1 - p) / N)


@pytest.mark.filterwarnings("ignore:defect vector is not sparse")
def test_outcome_examples():
    f = DefectVector(BitVector.from_iterable([0, 0, 1]))
    assert outcome(BitVector.from_iterable([1, 0, 1]), f) == 1
    zero = DefectVector(BitVector.zeros(3))
    assert all(outcome(BitVector(3, b), zero) == 0 for b in range(8))
    # the defective's participation was flipped away: nothing else can fire
    row = BitVector.from_iterable([1, 0, 1])
    eff = apply_noise(row, 0.0, np.random.default_rng(0))
    assert outcome(eff, f) == 0


def test_dense_defect_vector_warns():
    with pytest.warns(UserWarning):
        DefectVector.from_sensors(10, [0, 1])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DefectVector.from_sensors(20, [3])


def test_epsilon_examples():
    assert epsilon(0.3, 1.0, 0.2, 100) == 0
    assert epsilon(0.05, 0.9, 0.2, 100) == pytest.approx(2.1)
    assert epsilon(0.05, 0.9, 0.2, 200) == pytest.approx(2 * epsilon(0.05, 0.9, 0.2, 100))


def test_expected_flips_examples():
    assert expected_flips(1.0, 0.3, 50) == 0
    assert expected_flips(0.9, 0.15, 100) == pytest.approx(1.5)


def test_expected_flips_monte_carlo():
    rng = np.random.default_rng(5)
    S, B, q, p = 10, 100, 0.15, 0.9
    trials = 400
    flips = []
    for _ in range(trials):
        col = 0
        for _ in range(B):
            row = draw_test_row(range(S), q, rng, S=S)
            eff = apply_noise(row, p, rng)
            col += (row.bits & ~eff.bits) & 1
        flips.append(col)
    mu = expected_flips(p, q, B)
    sd = math.sqrt(B * q * (1 - p) * (1 - q * (1 - p)) / trials)
    assert abs(np.mean(flips) - mu) <= 3 * sd


def test_epsilon_prime_examples():
    assert epsilon_prime(1.3, 0.0, 40) == 1.3
    assert epsilon_prime(2, 1e-4, 50) == pytest.approx(2.005)
    assert epsilon_prime(2, 0.01, 10) < epsilon_prime(2, 0.01, 11)


def test_decoder_params_build():
    prm = DecoderParams.build(0.05, 0.9, 0.2, 100, p_error=1e-4, positive_count=50)
    assert prm.epsilon == pytest.approx(2.1)
    assert prm.epsilon_prime == pytest.approx(2.105)


# ---------------------------------------------------------------------------
# disjunctness

def test_identity_is_disjunct():
    eye = BitMatrix.from_array(np.eye(6, dtype=bool))
    assert is_disjunct(eye, 1, 0.5)
    assert min_private_support(eye, 1) == 1


def test_equal_columns_never_disjunct():
    M = BitMatrix.from_rows([[1, 1, 0], [0, 0, 1], [1, 1, 1]])
    assert not is_disjunct(M, 1, 0)


def test_is_disjunct_refuses_wide_matrices():
    with pytest.raises(ValueError):
        is_disjunct(BitMatrix.empty(30), 1, 0)


def test_is_disjunct_random_vs_subset_oracle():
    rng = np.random.default_rng(6)
    for _ in range(100):
        arr = rng.random((40, 10)) < 0.3
        M = BitMatrix.from_array(arr)
        cols = [set(np.flatnonzero(arr[:, j]).tolist()) for j in range(10)]
        expect = private_support_by_subsets(cols, 2)
        assert min_private_support(M, 2) == expect
        assert is_disjunct(M, 2, 0) == (expect > 0)


# ---------------------------------------------------------------------------
# single-defective decoder

def test_identity_single_decode():
    S = 4
    rows = [1 << i for i in range(S)]
    g = [int(i == 3) for i in range(S)]
    res = distance_decode_single(messages_from(rows, g, S), S, 0)
    assert res == DecodeResult(DETECTED, (3,), (0,))


def test_equal_columns_ambiguous():
    S = 3
    rows = [0b111, 0b000, 0b111]
    res = distance_decode_single(messages_from(rows, [1, 0, 1], S), S, 0)
    assert res.status == AMBIGUOUS and res.sensors == (0, 1, 2)


def test_no_candidate():
    # every column sits in a negative row more often than eps allows
    res = distance_decode_single(messages_from([0b11, 0b11], [0, 0], 2), 2, 1)
    assert res.status == NONE_FOUND
    assert distance_decode_single([], 3, 0).status == NONE_FOUND


def test_single_decoder_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    S, B, q = 12, 30, 0.3
    for _ in range(200):
        k = int(rng.integers(S))
        rows, g = random_instance(rng, S, B, q, 1 << k)
        res = distance_decode_single(messages_from(rows, g, S), S, 0)
        status, hits = single_oracle(rows, g, S)
        assert res.status == status
        if res.detected:
            assert res.sensors == hits == (k,)


def test_single_decode_invariant_under_row_permutation():
    rng = np.random.default_rng(8)
    S = 10
    rows, g = random_instance(rng, S, 20, 0.3, 1 << 4)
    msgs = messages_from(rows, g, S)
    base = distance_decode_single(msgs, S, 0.5)
    for _ in range(10):
        perm = rng.permutation(len(msgs))
        assert distance_decode_single([msgs[i] for i in perm], S, 0.5) == base


def test_decode_result_json_roundtrip():
    r = DecodeResult(DETECTED, (3,), (0,))
    assert DecodeResult.from_dict(r.to_dict()) == r
    assert '"status": "detected"' in r.to_json()


# ---------------------------------------------------------------------------
# multi-defective decoder

def test_split_outcomes_examples():
    S = 3
    msgs = messages_from([1, 2, 3, 4, 5], [0, 1, 0, 1, 0], S)
    W0, W1, g1 = split_outcomes(msgs)
    assert (W0.n_rows, W1.n_rows) == (3, 2)
    assert g1 == BitVector.ones(2)
    W0, W1, _ = split_outcomes(messages_from([1, 2], [0, 0], S))
    assert W1.n_rows == 0
    W0, W1, _ = split_outcomes(messages_from([1, 2], [1, 1], S))
    assert W0.n_rows == 0


def test_elimination_examples():
    W1 = BitMatrix.from_rows([[1, 1, 0, 0]])
    W0 = BitMatrix.from_rows([[0, 1, 0, 1]])
    # column 1 appears in a negative test; 2 and 3 never in a positive one
    assert eliminate_nondefective(W1, W0, 0) == [0]
    assert eliminate_nondefective(W1, W0, 1) == [0, 1]


def test_elimination_keeps_true_defectives_when_noiseless():
    rng = np.random.default_rng(9)
    S = 12
    for _ in range(200):
        f = rng.choice(S, size=2, replace=False)
        fb = (1 << int(f[0])) | (1 << int(f[1]))
        rows, g = random_instance(rng, S, 25, 0.25, fb)
        W0, W1, _ = split_outcomes(messages_from(rows, g, S), S)
        surv = set(eliminate_nondefective(W1, W0, 0))
        seen = {j for r, gi in zip(rows, g) if gi for j in range(S) if (r >> j) & 1}
        assert {int(x) for x in f} & seen <= surv


def test_search_space_size_two_groups():
    for h1, h2 in [(1, 1), (2, 3), (4, 5)]:
        H = [list(range(h1)), list(range(10, 10 + h2))]
        assert search_space_size(H, 2) == h1 * h2 + h1 + h2
        assert sum(1 for m in (1, 2) for _ in search_space(H, 2, m)) == h1 * h2 + h1 + h2


def test_multi_decode_disjunct_clusters():
    S = 8
    membership = [0, 0, 0, 0, 1, 1, 1, 1]
    rows = [1 << i for i in range(S)]
    truth = {1, 6}
    g = [int(i in truth) for i in range(S)]
    res = multi_decode(messages_from(rows, g, S), membership, 2, 0)
    assert res.status == DETECTED and set(res.sensors) == truth


def test_multi_decode_nothing_survives():
    S = 4
    res = multi_decode(messages_from([0b0011], [0], S), [0, 0, 1, 1], 2, 0)
    assert res.status == NONE_FOUND
    assert multi_decode([], [0, 1], 2, 0).status == NONE_FOUND


def test_multi_decoder_matches_exhaustive_oracle():
    rng = np.random.default_rng(10)
    agree = 0
    for _ in range(150):
        S = int(rng.integers(6, 11))
        L = int(rng.integers(2, 4))
        membership = rng.permutation(np.arange(S) % L)
        K = 2
        picks = rng.choice(L, size=K, replace=False)
        f = [int(rng.choice(np.flatnonzero(membership == c))) for c in picks]
        fb = sum(1 << j for j in f)
        rows, g = random_instance(rng, S, int(rng.integers(5, 30)), 0.3, fb)
        res = multi_decode(messages_from(rows, g, S), membership, K, 0)
        status, sol = multi_oracle(rows, g, membership, K)
        assert res.status == status
        if res.detected:
            assert res.sensors == tuple(sorted(sol))
            agree += 1
    assert agree > 0


def test_multi_reduces_to_single_with_one_cluster():
    rng = np.random.default_rng(11)
    S = 10
    for _ in range(200):
        k = int(rng.integers(S))
        rows, g = random_instance(rng, S, int(rng.integers(3, 25)), 0.3, 1 << k)
        if not any(g):
            continue
        msgs = messages_from(rows, g, S)
        single = distance_decode_single(msgs, S, 0)
        multi = multi_decode(msgs, [0] * S, 1, 0)
        assert single.status == multi.status
        if single.detected:
            assert single.sensors == multi.sensors
