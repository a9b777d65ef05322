"""Digamma, trigamma and log-gamma for positive real arguments.

All three accept a float or an ndarray and return the same kind.
Digamma and trigamma shift small arguments up to ``x >= 6`` with the
recurrences psi(x) = psi(x + 1) - 1/x and psi'(x) = psi'(x + 1) + 1/x**2,
then apply the Bernoulli asymptotic series. Log-gamma uses the Lanczos
approximation with g = 7 and nine coefficients, plus the reflection
formula below 1/2.
"""

import math

import numpy as np

from ..errors import DomainError

__all__ = ["digamma", "trigamma", "lgamma"]

_LIFT = 6.0

# B_2n / (2n), n = 1..8
_DIGAMMA_SERIES = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)

# B_2n, n = 1..8
_TRIGAMMA_SERIES = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)

_LANCZOS_G = 7.0
_LANCZOS_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_positive(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(arr > 0.0):
        bad = arr[~(arr > 0.0)].ravel()[0]
        raise DomainError(f"{name} requires x > 0, got {bad!r}")
    return arr


def _wrap(arr, like):
    if isinstance(like, np.ndarray) or np.ndim(like) > 0:
        return arr
    return float(arr)


def digamma(x):
    orig = x
    arr = _as_positive(x, "digamma")
    x = arr.copy()
    shift = np.zeros_like(x)
    for _ in range(int(_LIFT)):
        low = x < _LIFT
        if not low.any():
            break
        shift = np.where(low, shift - 1.0 / x, shift)
        x = np.where(low, x + 1.0, x)
    inv2 = 1.0 / (x * x)
    series = np.zeros_like(x)
    for c in reversed(_DIGAMMA_SERIES):
        series = (series + c) * inv2
    out = np.log(x) - 0.5 / x - series + shift
    return _wrap(out, orig)


def trigamma(x):
    orig = x
    arr = _as_positive(x, "trigamma")
    x = arr.copy()
    shift = np.zeros_like(x)
    for _ in range(int(_LIFT)):
        low = x < _LIFT
        if not low.any():
            break
        shift = np.where(low, shift + 1.0 / (x * x), shift)
        x = np.where(low, x + 1.0, x)
    inv = 1.0 / x
    inv2 = inv * inv
    series = np.zeros_like(x)
    for c in reversed(_TRIGAMMA_SERIES):
        series = (series + c) * inv2
    out = inv + 0.5 * inv2 + series * inv + shift
    return _wrap(out, orig)


def _lanczos_lgamma(x):
    # valid for x >= 0.5
    z = x - 1.0
    acc = np.full_like(z, _LANCZOS_COEF[0])
    for i, c in enumerate(_LANCZOS_COEF[1:], start=1):
        acc = acc + c / (z + i)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(acc)


def lgamma(x):
    arr = _as_positive(x, "lgamma")
    small = arr < 0.5
    # reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    refl_arg = np.where(small, 1.0 - arr, arr)
    base = _lanczos_lgamma(refl_arg)
    with np.errstate(divide="ignore"):
        refl = np.log(np.pi / np.sin(np.pi * np.where(small, arr, 0.5))) - base
    out = np.where(small, refl, base)
    return _wrap(out, x)
