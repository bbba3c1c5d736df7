import math

import numpy as np
import pytest

from qaweights.moments import MomentSequence, log_moments, moment_sequence
from qaweights.ostrowski import (NotRapidlyDecreasingError, convex_regularization, even_majorant,
                                 smooth_majorant_rho, support_interval, support_radius,
                                 weight_from_sequence)
from qaweights.weights import (ExpDecay, Gaussian, Indicator, Radial, RepLog, RhoForm, Sampled,
                               Table)


def random_log_convex(rng, n=30):
    inc = np.sort(rng.uniform(-2.0, 3.0, n - 1))
    return rng.uniform(-1, 1) + np.concatenate([[0.0], np.cumsum(inc)])


def grid_sup_log_moments(w, ms):
    """Oracle: sup over a dense log grid that contains every breakpoint."""
    t = np.unique(np.concatenate([np.geomspace(1e-8, 1e8, 40001), w.transition_points]))
    lw = w.log_value(t)
    return np.array([np.max(m * np.log(t) + lw) for m in ms])


def test_indicator_from_constant_sequence():
    w = weight_from_sequence([1.0, 1.0, 1.0])
    t = np.array([0.0, 0.5, 1.0, 1.0001, 3.0])
    np.testing.assert_array_equal(np.exp(w.log_value(t)), [1, 1, 1, 0, 0])


@pytest.mark.parametrize("seed", range(5))
def test_round_trip_recovers_sequence(seed):
    lv = random_log_convex(np.random.default_rng(seed))
    w = weight_from_sequence(MomentSequence.from_log(lv))
    ms = np.arange(lv.size)
    np.testing.assert_allclose(grid_sup_log_moments(w, ms), lv, rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(log_moments(Radial(w), [1.0], ms)[0], lv, rtol=1e-6, atol=1e-9)


def test_non_log_convex_input_rejected():
    with pytest.raises(ValueError):
        weight_from_sequence([1.0, 5.0, 1.0, 5.0])


def test_truncate_tail_is_polynomial():
    w = weight_from_sequence([1.0, 1.0, 2.0], tail="truncate")
    t = np.array([100.0, 1000.0])
    np.testing.assert_allclose(w.log_value(t), math.log(2.0) - 2 * np.log(t))


def test_gaussian_round_trip_through_moments():
    seq = moment_sequence(Radial(Gaussian()), [1.0], 60)
    w = weight_from_sequence(seq)
    t = np.array([0.5, 1.0, 2.0, 4.0])
    # the Ostrowski weight of M_w majorizes w and is close to it for log-concave profiles
    assert np.all(w.log_value(t) >= -t**2 - 1e-12)
    assert np.all(w.log_value(t) <= -t**2 + np.log(2 * t**2 + 2))


@pytest.mark.parametrize("w,expected", [
    (Radial(Indicator(2.5)), (-2.5, 2.5)),
    (Table(Sampled((-1.0, 0.0, 3.0), (0.0, 1.0, 0.0))), (-1.0, 3.0)),
])
def test_support_interval(w, expected):
    np.testing.assert_allclose(support_interval(w), expected)


def test_unbounded_support_radius():
    assert support_radius(Radial(Gaussian())) == math.inf


def test_even_majorant_requires_rapid_decay():
    with pytest.raises(NotRapidlyDecreasingError):
        even_majorant(Radial(RhoForm(1.0, 1.0, (1.0, 2.0), (2.0, 2.0))))


REG_WEIGHTS = [
    Radial(Gaussian(1.0, 2.0)),
    Radial(ExpDecay(1.0, 0.5)),
    Radial(RepLog.nu_family(0.25)),
    Radial(Indicator(7.3)),
    Table(Sampled((-40.0, -3.0, 0.0, 5.0, 30.0), (0.2, 0.9, 0.1, 0.6, 0.05))),
]


@pytest.mark.parametrize("w", REG_WEIGHTS, ids=lambda w: type(getattr(w, "profile", w)).__name__)
def test_regularization_properties(w):
    r = convex_regularization(w)
    t = r.t
    lw = np.maximum(w.log_eval_line(t), w.log_eval_line(-t))
    assert np.all(r.log_values >= lw)
    fin = np.isfinite(r.h)
    d = np.diff(r.h[fin]) / np.diff(r.s[fin])
    assert np.all(np.diff(d) >= -1e-9 * (1 + np.abs(d[1:])))
    x = np.random.default_rng(0).uniform(0, 1e3, 500)
    np.testing.assert_array_equal(r.log_at(x), r.log_at(-x))
    again = convex_regularization(r)
    np.testing.assert_array_equal(np.isinf(again.h), np.isinf(r.h))
    np.testing.assert_allclose(again.h[fin], r.h[fin], rtol=1e-9)


def test_indicator_regularization_majorizes_between_nodes():
    w = Radial(Indicator(7.3))
    r = convex_regularization(w)
    x = np.linspace(-7.3, 7.3, 1001)
    assert np.all(r.log_at(x) == 0.0)
    assert r.vanishes_beyond() >= 7.3


def test_smooth_majorant_of_bounded_support_is_positive_and_dominates():
    w = Radial(Indicator(2.0))
    rho = smooth_majorant_rho(w)
    t = np.linspace(-2.0, 2.0, 101)
    assert np.all(rho.log_value(t) >= w.log_eval_line(t))
    assert np.all(np.isfinite(rho.log_value(np.array([10.0, 1e4]))))


@pytest.mark.parametrize("w", REG_WEIGHTS[:3], ids=["Gaussian", "ExpDecay", "RepLog"])
def test_regularization_majorizes_between_nodes(w):
    r = convex_regularization(w)
    # midpoints of the sampling grid are where chord interpolation would undershoot
    x = np.exp(0.5 * (r.s[1:] + r.s[:-1]))
    lw = w.log_eval_line(x)
    assert np.all(r.log_at(x) >= lw - 1e-12 * (1 + np.abs(lw)))
