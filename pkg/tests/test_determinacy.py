import math

import numpy as np
import pytest
from scipy.special import ndtr

from qaweights.classifier import CONVERGES, DIVERGES
from qaweights.determinacy import (FINITE, INFINITE, MeasureSpec, carleman_test, integral_criterion,
                                   moments_of_measure, parse_measure)
from qaweights.moments import MomentSequence
from qaweights.spec_io import SpecError
from qaweights.weights import ExpDecay, Gaussian, Indicator, Radial, RepLog


def std_normal(n):
    c = (2 * math.pi) ** (-n / 2)
    return MeasureSpec.from_log_density(lambda X: math.log(c) - 0.5 * np.sum(np.atleast_2d(X) ** 2, axis=1), n)


def test_gaussian_against_expdecay_closed_form():
    ev = integral_criterion(std_normal(1), Radial(ExpDecay(1.0, 1.0)))
    assert ev.conclusion == FINITE
    assert ev.payload["value"] == pytest.approx(2 * math.exp(0.5) * ndtr(1.0), rel=1e-9)
    assert ev.payload["certifies_determinate"]


def test_gaussian_in_the_plane_matches_polar_oracle():
    # int e^{|x|} dN_2 = int_0^inf r e^{r - r^2/2} dr
    from scipy.integrate import quad

    oracle = quad(lambda r: r * math.exp(r - r * r / 2), 0, np.inf)[0]
    ev = integral_criterion(std_normal(2), Radial(ExpDecay(1.0, 1.0), 2))
    assert ev.conclusion == FINITE
    assert ev.payload["value"] == pytest.approx(oracle, rel=1e-7)


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_with_borderline_replog(n):
    ev = integral_criterion(std_normal(n), Radial(RepLog.nu_family(0.0), n))
    assert ev.conclusion == FINITE and ev.payload["weight_class"] == "QuasiAnalytic"


def test_heavy_tail_is_infinite():
    # density ~ e^{-sqrt|x|} against 1/w = e^{|x|}
    mu = MeasureSpec.from_log_density(lambda X: -np.sqrt(np.abs(np.atleast_2d(X)[:, 0])), 1)
    assert integral_criterion(mu, Radial(ExpDecay(1.0, 1.0))).conclusion == INFINITE


def test_atoms_with_bounded_support_weight_use_majorant():
    mu = MeasureSpec.from_atoms([[0.0], [0.5], [-1.0]], [0.2, 0.3, 0.5])
    ev = integral_criterion(mu, Radial(Indicator(2.0)))
    assert ev.conclusion == FINITE
    assert "substitution" in ev.payload
    assert ev.payload["certifies_determinate"]


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        integral_criterion(std_normal(2), Radial(Gaussian()))


def test_moments_of_normal():
    seqs = moments_of_measure(std_normal(1), 8)
    # absolute moments E|X|^k
    expected = [2 ** (k / 2) * math.gamma((k + 1) / 2) / math.sqrt(math.pi) for k in range(9)]
    np.testing.assert_allclose(seqs[0].values, expected, rtol=1e-9)


def test_moments_of_planar_normal_per_axis():
    seqs = moments_of_measure(std_normal(2), 4)
    assert len(seqs) == 2
    np.testing.assert_allclose(seqs[1].values[[0, 2, 4]], [1.0, 1.0, 3.0], rtol=1e-8)


def test_cauchy_moments_are_infinite():
    mu = MeasureSpec.from_log_density(lambda X: -math.log(math.pi) - np.log1p(np.atleast_2d(X)[:, 0] ** 2), 1)
    vals = moments_of_measure(mu, 3)[0].values
    assert vals[0] == pytest.approx(1.0, rel=1e-8)
    assert np.all(np.isinf(vals[1:]))


def test_carleman_on_normal_moments():
    M = moments_of_measure(std_normal(1), 400)[0]
    ev = carleman_test(M)
    assert ev.conclusion == DIVERGES
    assert ev.payload["partial_sums"][199] > 10


def test_carleman_converges_for_fast_growth():
    k = np.arange(0, 401, dtype=float)
    M = MomentSequence.from_log(4.0 * (k / 2) ** 2)  # M_2k = e^{4 k^2}
    assert carleman_test(M).conclusion == CONVERGES


def test_carleman_needs_enough_moments():
    with pytest.raises(ValueError):
        carleman_test(MomentSequence.from_values(np.ones(10)))


def test_parse_measure_forms():
    mu = parse_measure({"form": "density", "normalization": "auto",
                        "density": {"kind": "radial", "profile": {"family": "gaussian", "sigma": 2.0}}})
    ev = integral_criterion(mu, Radial(ExpDecay(1.0, 1.0)), classify_weight=False)
    # N(0, 2) against e^{|x|}: 2 e^{1} Phi(sqrt 2)
    assert ev.payload["value"] == pytest.approx(2 * math.e * ndtr(math.sqrt(2)), rel=1e-8)
    assert parse_measure({"form": "atoms", "points": [[0.0]], "masses": [1.0]}).form == "atoms"
    assert parse_measure({"form": "moments", "moments": [[1, 0, 1]]}).form == "moments"
    with pytest.raises(SpecError):
        parse_measure({"form": "cloud"})
