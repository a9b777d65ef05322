import math

import mpmath
import numpy as np
import pytest

from detective.diffcore import digamma, lgamma, trigamma
from detective.errors import DomainError

mpmath.mp.dps = 40


def test_digamma_examples():
    # oracle: mpmath at 40 digits; -euler, psi(2) = 1 - euler, psi(1/2) = -euler - 2 ln 2
    gamma_const = float(mpmath.euler)
    assert abs(digamma(1.0) - (-gamma_const)) < 1e-12
    assert abs(digamma(1.0) - (-0.5772156649)) < 1e-10
    assert abs(digamma(2.0) - 0.4227843351) < 1e-10
    assert abs(digamma(0.5) - (-1.9635100260)) < 1e-10
    assert abs(digamma(0.5) - float(-mpmath.euler - 2 * mpmath.log(2))) < 1e-12


def test_lgamma_examples():
    assert abs(lgamma(1.0)) < 1e-15
    assert abs(lgamma(2.0)) < 1e-15
    assert abs(lgamma(0.5) - 0.5723649429) < 1e-10
    assert abs(lgamma(0.5) - 0.5 * math.log(math.pi)) < 1e-14


def test_digamma_against_high_precision():
    xs = np.geomspace(1e-3, 1e6, 400)
    got = digamma(xs)
    for x, g in zip(xs, got):
        assert abs(g - float(mpmath.digamma(x))) <= 1e-12


def test_lgamma_relative_accuracy():
    xs = np.geomspace(1e-3, 1e6, 400)
    got = lgamma(xs)
    for x, g in zip(xs, got):
        ref = float(mpmath.loggamma(x))
        assert abs(g - ref) <= 1e-12 * max(1.0, abs(ref))


def test_trigamma_against_high_precision():
    xs = np.geomspace(1e-3, 1e6, 200)
    for x, g in zip(xs, trigamma(xs)):
        ref = float(mpmath.psi(1, x))
        assert abs(g - ref) <= 1e-11 * ref


def test_recurrences_and_positivity():
    rng = np.random.default_rng(0)
    x = rng.uniform(0.01, 100, size=1000)
    assert np.max(np.abs(digamma(x + 1) - digamma(x) - 1 / x)) < 1e-12
    assert np.max(np.abs(lgamma(x + 1) - lgamma(x) - np.log(x))) < 1e-10
    assert np.all(trigamma(x) > 0)


def test_scalar_in_scalar_out():
    assert isinstance(digamma(3.0), float)
    assert isinstance(lgamma(3), float)
    assert digamma(np.array([3.0])).shape == (1,)


@pytest.mark.parametrize("fn", [digamma, lgamma, trigamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5])
def test_domain_errors(fn, bad):
    with pytest.raises(DomainError):
        fn(bad)
    with pytest.raises(DomainError):
        fn(np.array([1.0, bad]))
