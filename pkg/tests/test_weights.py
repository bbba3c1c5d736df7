import math

import numpy as np
import pytest

from qaweights.spec_io import SpecError, dumps, parse_basis, parse_spec, serialize
from qaweights.weights import (AffineMap, BasisSpec, DimensionError, ExpDecay, Gaussian,
                               Indicator, PointwiseMin, Radial, RepLog, RhoForm, Sampled, Scale,
                               Sum, Table, Tensor, evaluate, power, pullback)


def test_gaussian_peak_is_one():
    assert evaluate(Radial(Gaussian(1.0, 1.0), 2), [0.0, 0.0]) == 1.0


@pytest.mark.parametrize("t", [0.0, 0.5, 3.0, -7.25])
def test_family_closed_forms(t):
    assert evaluate(Radial(ExpDecay(2.0, 0.5)), [t]) == pytest.approx(2 * math.exp(-0.5 * abs(t)))
    assert evaluate(Radial(Gaussian(1.5, 2.0)), [t]) == pytest.approx(1.5 * math.exp(-(t / 2) ** 2))
    assert evaluate(Radial(Indicator(1.0)), [t]) == (1.0 if abs(t) <= 1 else 0.0)


def test_replog_nu_family_matches_formula_past_threshold():
    p = RepLog.nu_family(0.5)
    t = np.array([50.0, 400.0, 3000.0])
    expected = -t / np.log(t) ** 1.5
    np.testing.assert_allclose(p.log_value(t), expected, rtol=1e-12)
    # held constant below the threshold, nonincreasing everywhere
    tt = np.linspace(0, 100, 2001)
    assert np.all(np.diff(p.log_value(tt)) <= 1e-12)


def test_replog_rejects_non_decaying_exponents():
    with pytest.raises(ValueError):
        RepLog(1.0, (1.0,), (2.0,))


def test_rhoform_zero_slope_gives_power_tail():
    p = RhoForm(1.0, 1.0, (1.0, 10.0), (2.0, 2.0))
    t = np.array([2.0, 5.0, 40.0])
    np.testing.assert_allclose(p.log_value(t), -2 * np.log(t), rtol=1e-12)


def test_sampled_loglog_interpolation_is_exact_on_power_laws():
    g = np.geomspace(1, 100, 5)
    p = Sampled(tuple(g), tuple(g ** -3.0), even=True, interp="loglog")
    t = np.array([1.7, 22.0, -60.0])
    np.testing.assert_allclose(p.log_value(t), -3 * np.log(np.abs(t)), rtol=1e-12)


def test_pullback_and_scale_and_min():
    w = Radial(Gaussian(1.0, 1.0), 2)
    A = AffineMap.translate([1.0, -2.0])
    assert evaluate(pullback(w, A), [1.0, -2.0]) == pytest.approx(1.0)
    assert evaluate(Scale(3.0, w), [0.0, 0.0]) == pytest.approx(3.0, rel=1e-15)
    m = PointwiseMin(w, Radial(ExpDecay(0.5, 1.0), 2))
    assert evaluate(m, [0.0, 0.0]) == pytest.approx(0.5, rel=1e-15)
    assert evaluate(Sum(w, w), [0.0, 0.0]) == pytest.approx(2.0, rel=1e-15)


def test_nested_pullbacks_compose():
    w = Radial(Gaussian(1.0, 1.0), 2)
    A, B = AffineMap.rotation(0.3), AffineMap.translate([0.5, 0.0])
    x = np.array([[0.7, -0.2]])
    direct = w.log_eval(A.inverse_apply(B.inverse_apply(x)))
    np.testing.assert_allclose(pullback(pullback(w, A), B).log_eval(x), direct, rtol=1e-14)


def test_tensor_is_product():
    w = Tensor((Gaussian(1.0, 1.0), ExpDecay(1.0, 2.0)))
    assert evaluate(w, [1.0, 0.5]) == pytest.approx(math.exp(-1) * math.exp(-1))


def test_dimension_mismatch_raises():
    with pytest.raises(DimensionError):
        PointwiseMin(Radial(Gaussian(), 1), Radial(Gaussian(), 2))
    with pytest.raises(DimensionError):
        evaluate(Radial(Gaussian(), 2), [1.0])


def test_basis_rejects_singular():
    with pytest.raises(ValueError):
        BasisSpec(np.array([[1.0, 0.0], [2.0, 0.0]]))


def test_dual_transport_preserves_pairing():
    A = AffineMap(np.array([[2.0, 1.0], [0.0, 1.0]]), np.zeros(2))
    v = np.array([[1.0, 3.0]])
    x = np.array([0.4, -1.1])
    lhs = A.dual_transport(v) @ A.apply(x)
    np.testing.assert_allclose(lhs, v @ x)


FAMILY = [
    Radial(Gaussian(2.0, 3.0)),
    Radial(ExpDecay(1.5, 0.25), 2),
    Radial(RepLog.nu_family(1.0)),
    Radial(RepLog.nu_family(-0.5)),
    Radial(RhoForm(0.5, 2.0, (3.0, 10.0), (1.0, 2.0))),
    Tensor((Gaussian(1.0, 1.0), RepLog.nu_family(0.25))),
    Scale(2.0, Radial(Indicator(3.0))),
]


@pytest.mark.parametrize("w", FAMILY, ids=lambda w: type(w).__name__)
@pytest.mark.parametrize("nu", [0.5, 2.0])
def test_power_matches_pointwise_power(w, nu):
    rng = np.random.default_rng(7)
    X = rng.uniform(-2000, 2000, size=(400, w.dimension))
    a, b = nu * w.log_eval(X), power(w, nu).log_eval(X)
    fin = np.isfinite(a)
    np.testing.assert_array_equal(np.isfinite(b), fin)
    np.testing.assert_allclose(b[fin], a[fin], rtol=1e-12, atol=1e-12)


def test_power_of_sum_is_rejected():
    with pytest.raises(TypeError):
        power(Sum(Radial(Gaussian()), Radial(Gaussian())), 2.0)


@pytest.mark.parametrize("w", FAMILY + [Table(Sampled((-1.0, 0.0, 2.0), (0.1, 1.0, 0.3)))],
                         ids=lambda w: type(w).__name__)
def test_spec_round_trip(w):
    back = parse_spec(dumps(serialize(w)))
    X = np.random.default_rng(1).uniform(-50, 50, size=(200, w.dimension))
    np.testing.assert_array_equal(back.log_eval(X), w.log_eval(X))


@pytest.mark.parametrize("doc", [
    "{not json",
    '{"kind": "radial"}',
    '{"kind": "radial", "profile": {"family": "gaussian", "sigma": -1}}',
    '{"kind": "radial", "profile": {"family": "nope"}}',
    '{"kind": "warp"}',
    '{"kind": "radial", "profile": {"family": "replog", "a": [1], "p": [1, 1]}}',
])
def test_bad_specs_raise(doc):
    with pytest.raises(SpecError):
        parse_spec(doc)


def test_basis_parsing():
    b = parse_basis('{"vectors": [[1, 0], [1, 1]]}')
    assert b.vectors.shape == (2, 2)


def test_dumps_is_deterministic_and_finite_safe():
    obj = {"b": [1.0, math.inf], "a": -math.inf}
    assert dumps(obj) == dumps(dict(reversed(list(obj.items()))))
    assert '"-inf"' in dumps(obj)
