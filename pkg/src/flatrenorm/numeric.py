"""Extended-precision scalars.

Hot loops use ``gmpy2.mpfr`` (MPFR), which is roughly an order of magnitude
faster than mpmath for elementary arithmetic; linear algebra uses mpmath.
Both are driven by one precision setting, and values convert exactly.
"""
from __future__ import annotations

import math
from contextlib import contextmanager

import gmpy2
import mpmath
from gmpy2 import mpfr

__all__ = [
    "mpfr",
    "num",
    "bits",
    "precision",
    "to_mp",
    "from_mp",
    "fmt",
    "decimal_string",
    "eps",
    "INF",
]

Real = type(mpfr(0))


def bits() -> int:
    return gmpy2.get_context().precision


@contextmanager
def precision(nbits: int):
    """Set the working precision of both libraries; exponent range is maximal."""
    ctx = gmpy2.context(
        gmpy2.get_context(),
        precision=int(nbits),
        emax=gmpy2.get_emax_max(),
        emin=gmpy2.get_emin_min(),
    )
    with ctx, mpmath.mp.workprec(int(nbits)):
        yield


def num(x) -> Real:
    """Coerce ints, floats, decimal strings, mpfr and mpmath values to mpfr."""
    if isinstance(x, Real):
        return x
    if isinstance(x, mpmath.mpf):
        return from_mp(x)
    if isinstance(x, str):
        return mpfr(x.strip())
    return mpfr(x)


def to_mp(x) -> mpmath.mpf:
    if isinstance(x, mpmath.mpf):
        return x
    x = num(x)
    if gmpy2.is_zero(x):
        return mpmath.mpf(0)
    if gmpy2.is_nan(x):
        return mpmath.mpf("nan")
    if gmpy2.is_infinite(x):
        return mpmath.mpf("inf") if x > 0 else mpmath.mpf("-inf")
    m, e = x.as_mantissa_exp()
    return mpmath.mpf((int(m), int(e)))


def from_mp(x) -> Real:
    x = mpmath.mpf(x)
    if not mpmath.isfinite(x):
        return mpfr(str(x))
    sign, man, exp, _ = x._mpf_
    if not man:
        return mpfr(0)
    v = gmpy2.mul_2exp(mpfr(int(man)), int(exp))
    return -v if sign else v


def fmt(x, digits: int = 8) -> str:
    if x is None:
        return "None"
    return mpmath.nstr(to_mp(x), digits)


def decimal_string(x, digits: int | None = None) -> str:
    """Decimal string that round-trips at the current precision."""
    if digits is None:
        digits = int(math.ceil(bits() * math.log10(2))) + 2
    return mpmath.nstr(to_mp(x), digits, min_fixed=-math.inf, max_fixed=math.inf)


def eps(slack_bits: int = 16) -> Real:
    return gmpy2.mul_2exp(mpfr(1), -(bits() - slack_bits))


INF = gmpy2.inf()
