import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from qaweights.moments import (MomentSequence, TruncatedError, is_log_convex, log_convex_envelope,
                               log_moments, moment, moment_sequence, mu_sequence)
from qaweights.weights import (AffineMap, ExpDecay, Gaussian, Indicator, PointwiseMin, Radial,
                               RepLog, Scale, Sum, Tensor, pullback)

try:
    from hypothesis import given, settings
    from hypothesis import strategies as st
except ImportError:  # pragma: no cover
    given = None

M = np.arange(41)


def logs(w, v, ms):
    return log_moments(w, v, ms)[0]


def gaussian_oracle(m):
    return (m / 2) ** (m / 2) * math.exp(-m / 2) if m else 1.0


def _grid_sup(logf, m):
    """Independent sup of ``t^m f(t)``: dense log grid then bounded refinement."""
    t = np.geomspace(1e-6, 1e4, 20001)
    vals = m * np.log(t) + logf(t)
    i = int(np.argmax(vals))
    lo, hi = t[max(i - 1, 0)], t[min(i + 1, t.size - 1)]
    r = minimize_scalar(lambda x: -(m * math.log(x) + float(logf(np.array([x]))[0])),
                        bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return max(vals[i], -r.fun)


def test_gaussian_moments_match_closed_form():
    seq = moment_sequence(Radial(Gaussian(1.0, 1.0)), [1.0], 40)
    np.testing.assert_allclose(seq.values, [gaussian_oracle(m) for m in M], rtol=1e-8)


@pytest.mark.parametrize("C,eps", [(1.0, 1.0), (2.5, 0.3), (0.5, 4.0)])
def test_expdecay_moments_match_closed_form(C, eps):
    seq = moment_sequence(Radial(ExpDecay(C, eps)), [1.0], 40)
    expected = [C * (m / (math.e * eps)) ** m if m else C for m in M]
    np.testing.assert_allclose(seq.values, expected, rtol=1e-8)


def test_indicator_and_zero_conventions():
    seq = moment_sequence(Radial(Indicator(2.0)), [1.0], 5)
    np.testing.assert_allclose(seq.values, 2.0 ** np.arange(6))
    # 0 * inf = 0: the zero weight has zero moments
    assert moment(Scale(0.0, Radial(Gaussian())), [1.0], 3) == 0.0


def test_replog_moments_match_grid_oracle():
    p = RepLog.nu_family(0.5)
    lv = logs(Radial(p), [1.0], [5, 20, 60])
    oracle = [_grid_sup(p.log_value, m) for m in (5, 20, 60)]
    np.testing.assert_allclose(lv, oracle, rtol=1e-9)


def test_radial_moment_scales_with_vector_norm():
    w = Radial(Gaussian(1.0, 1.0), 3)
    v = np.array([1.0, 2.0, 2.0])
    np.testing.assert_allclose(logs(w, v, [4]), 4 * math.log(3) + math.log(gaussian_oracle(4)))


def test_rotated_tensor_uses_structure_and_matches_generic_path():
    w = Tensor((Gaussian(1.0, 1.0), ExpDecay(1.0, 1.0)))
    A = AffineMap.rotation(0.7)
    v = A.dual_transport(np.array([[1.0, 0.0]]))[0]
    rot = pullback(w, A)
    np.testing.assert_allclose(logs(rot, v, [2, 6, 12]), logs(w, [1.0, 0.0], [2, 6, 12]),
                               rtol=1e-9)


def test_generic_path_on_sum_matches_brute_force():
    w = Sum(Radial(Gaussian(1.0, 1.0), 2), Radial(ExpDecay(1.0, 2.0), 2))
    v = np.array([0.6, 0.8])
    t = np.linspace(0, 20, 200001)
    for m in (3, 10):
        brute = np.max(m * np.log(np.maximum(t, 1e-300)) + w.log_eval(np.outer(t, v)))
        got = logs(w, v, [m])[0]
        assert got >= brute - 1e-12
        assert got == pytest.approx(brute, rel=1e-8)


def test_min_weight_moments_bounded_by_each_side():
    a, b = Radial(Gaussian(1.0, 2.0)), Radial(ExpDecay(1.0, 1.0))
    lm = logs(PointwiseMin(a, b), [1.0], [10])
    assert lm[0] <= min(logs(a, [1.0], [10])[0], logs(b, [1.0], [10])[0]) + 1e-12


def test_moment_sequences_are_log_convex():
    for w in (Radial(Gaussian()), Radial(RepLog.nu_family(-0.25)), Radial(Indicator(3.0))):
        assert moment_sequence(w, [1.0], 60).log_convex


def test_envelope_is_largest_log_convex_minorant():
    a = np.array([1.0, 3.0, 2.0, 8.0, 5.0, 40.0])
    env = log_convex_envelope(a)
    assert env.log_convex
    assert np.all(env.values <= a * (1 + 1e-12))
    # endpoints and hull vertices are kept
    assert env.values[0] == 1.0 and env.values[-1] == 40.0


def test_envelope_zero_rules():
    assert np.all(log_convex_envelope([0.0, 1.0, 2.0]).values == 0)
    np.testing.assert_array_equal(log_convex_envelope([1.0, 2.0, 0.0, 5.0]).values, [1.0, 0, 0, 0])


def test_infinite_entries_are_unconstrained():
    env = log_convex_envelope([1.0, math.inf, 4.0, 8.0])
    assert env.log_convex
    assert env.values[0] == 1.0 and env.values[-1] == 8.0


def test_mu_sequence_window_and_truncation():
    seq = MomentSequence.from_values([1.0, 4.0, 2.0, 27.0, 16.0])
    mu = mu_sequence(seq, 1, 3)
    brute = [min(seq.values[k] ** (1 / k) for k in range(m, 5)) for m in (1, 2, 3)]
    assert mu == brute
    with pytest.raises(TruncatedError):
        mu_sequence(seq, 1, 4, tail_window=2)
    with pytest.raises(ValueError):
        mu_sequence(seq, 0, 2)


def test_sequence_validation():
    with pytest.raises(ValueError):
        MomentSequence.from_values([1.0, -1.0])


if given is not None:
    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=40), st.floats(-5, 5))
    def test_cumulative_increments_are_log_convex(incs, start):
        d = np.sort(np.asarray(incs))
        lv = start + np.concatenate([[0.0], np.cumsum(d)])
        assert is_log_convex(lv)
        np.testing.assert_allclose(log_convex_envelope(MomentSequence.from_log(lv)).log_values, lv,
                                   rtol=1e-14, atol=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-20.0, 20.0), min_size=2, max_size=30))
    def test_envelope_properties(lv):
        env = log_convex_envelope(MomentSequence.from_log(np.asarray(lv)))
        assert env.log_convex
        assert np.all(env.log_values <= np.asarray(lv) + 1e-12)
        again = log_convex_envelope(env)
        np.testing.assert_allclose(again.log_values, env.log_values, rtol=1e-12, atol=1e-12)
