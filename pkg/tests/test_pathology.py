import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qaweights.classifier import CONVERGES, DIVERGES, NOT_QA, QA, classify, series_test
from qaweights.moments import is_log_convex, moment_sequence
from qaweights.pathology import (HARD_CAP, SequenceProfile, TruncatedError, cross_term_lower_bound,
                                 generate_blocks, off_block_tail, sum_counterexample,
                                 tangentialize_sequences, unique_basis_weight,
                                 unique_basis_report)
from qaweights.spec_io import parse_spec
from qaweights.weights import Radial


@pytest.fixture(scope="module")
def pair():
    return tangentialize_sequences(2, 6)


def tangent_block_sum(N, Np):
    """Direct sum of ``exp(-T(m)/m)`` over ``N <= m <= N'`` on the tangent at ``N``."""
    m = np.arange(N, Np + 1, dtype=float)
    return float(np.sum(np.exp(-2.0 - 2.0 * math.log(N) + 2.0 * N / m)))


def test_first_block_positions(pair):
    b0, b1 = pair.blocks[:2]
    assert (b0.N, round(b0.N_prime)) == (4, 82)
    assert b0.R == pytest.approx(376.70, abs=0.01)
    assert (round(b1.N), round(b1.N_prime)) == (377, 1_043_474)
    assert [b.owner for b in pair.blocks] == [0, 1, 0, 1, 0, 1]


def test_block_sums_exceed_one_by_direct_enumeration(pair):
    for b in pair.blocks[:2]:
        direct = tangent_block_sum(int(round(b.N)), int(round(b.N_prime)))
        assert direct > 1.0
        assert direct == pytest.approx(b.block_sum, rel=1e-9)
        # one term fewer and the block would not reach 1: N' is minimal
        assert tangent_block_sum(int(round(b.N)), int(round(b.N_prime)) - 1) <= 1.0


def test_later_blocks_are_certified(pair):
    for b in pair.blocks[2:]:
        assert b.certified_by == "integral-bound"
        assert b.block_sum > 1.0
    assert np.all(np.diff([b.log_N for b in pair.blocks]) > 0)


def test_tangents_meet_at_block_end(pair):
    for b in pair.blocks[:2]:
        (s1, c1), (s2, c2) = b.tangent, b.return_tangent
        assert (c1 - c2) / (s2 - s1) == pytest.approx(b.N_prime, rel=1e-9)


def test_sequences_follow_base_off_their_blocks(pair):
    m = np.arange(1, 2000, dtype=float)
    for j, lv in enumerate(pair.log_sequences):
        off = pair.off_block_mask(m, owner=j)
        np.testing.assert_allclose(lv[1:2000][off], 2 * m[off] * np.log(m[off]), rtol=1e-12, atol=1e-12)
        assert np.all(lv[1:2000] <= 2 * m * np.log(m) + 1e-9)


def test_sequences_are_log_convex_and_individually_divergent(pair):
    for j, seq in enumerate(pair.sequences):
        assert is_log_convex(seq.log_values)
        assert series_test(seq).conclusion == DIVERGES
        assert pair.window_sums()[j] > 2.0


def test_max_sequence_tail_is_summable(pair):
    tail = off_block_tail(pair)
    assert tail["free_exponent"] == pytest.approx(2.0, abs=1e-6)
    assert tail["window_off_block_sum"] == pytest.approx(math.pi**2 / 6, abs=1e-5)
    assert tail["tail"] < 0.1


def test_profile_recovers_sequence():
    p = SequenceProfile(2, 0)
    for m in (5, 40, 300):
        s = np.linspace(0, 20.0, 400001)
        f = m * s + p.log_value(np.exp(s))
        i = int(np.argmax(f))
        r = minimize_scalar(lambda x: -(m * x + float(p.log_value(np.exp([x]))[0])),
                            bounds=(s[i - 1], s[i + 1]), method="bounded", options={"xatol": 1e-13})
        assert max(f[i], -r.fun) == pytest.approx(float(p.log_moment(m)), rel=1e-8)


def test_profile_spec_round_trip():
    w = parse_spec({"kind": "radial", "profile": SequenceProfile(2, 1).to_dict()})
    assert isinstance(w.profile, SequenceProfile) and w.profile.j == 1


def test_unique_basis_weight(pair):
    rep = unique_basis_report(pair)
    assert [e.conclusion for e in rep["axes"]] == [DIVERGES, DIVERGES]
    assert rep["cross"].conclusion == CONVERGES
    assert classify(unique_basis_weight(pair), numeric="never").cls == QA


def test_cross_bound_requires_two_coordinates(pair):
    with pytest.raises(ValueError):
        cross_term_lower_bound(pair, [2.0, 0.0])
    seq = moment_sequence(unique_basis_weight(pair), [2.0, 0.0], 2000)
    assert series_test(seq).conclusion == DIVERGES


def test_cross_bound_is_a_lower_bound(pair):
    w = unique_basis_weight(pair)
    v = np.array([1.0, 1.0]) / math.sqrt(2)
    lb = cross_term_lower_bound(pair, v, 60).log_values
    t = np.geomspace(1e-2, 1e3, 4001)
    # brute force along the diagonal, where the bound is attained up to constants
    X = np.outer(t, [1.0, 1.0])
    for m in (10, 30, 60):
        brute = np.max(m * np.log(2 * t / math.sqrt(2)) + w.log_eval(X))
        assert lb[m] <= brute + 1e-9 or lb[m] <= float(moment_sequence(w, v, m).log_values[m]) + 1e-9


def test_sum_counterexample(pair):
    w1, w2, verdict = sum_counterexample(pair)
    assert classify(w1).cls == QA and classify(w2).cls == QA
    assert verdict.cls == NOT_QA


def test_bad_arguments():
    with pytest.raises(ValueError):
        tangentialize_sequences(1, 4)
    with pytest.raises(ValueError):
        tangentialize_sequences(3, 2)
    with pytest.raises(TruncatedError):
        tangentialize_sequences(2, 2, m_cap=HARD_CAP + 1)
    assert len(generate_blocks(3, 4)) == 4
