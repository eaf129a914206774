"""Orientation-preserving diffeomorphisms of [0, 1] as immutable expression DAGs.

Every node fixes 0 and 1 and is strictly increasing.  Nodes are built from
five shapes: the identity, named primitives with closed-form derivatives,
the power-map family ``q_s``, affine zooms and compositions.  Two more nodes
conjugate by ``x -> 1 - x``: ``Reflect`` for any child and ``QsMirror`` in
closed form for ``q_s``.  The renormalization of the right branch needs them.

All arithmetic runs on MPFR numbers (``gmpy2.mpfr``) at the precision that is active
when the call is made (see :class:`PrecisionPolicy`).  Zooms cache the images
of their endpoints at construction time, so a DAG should be built and used
under the same policy.
"""
from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator

import gmpy2

from .numeric import INF, Real, bits, decimal_string, fmt, num, precision
from .errors import (
    ConvergenceError,
    DegenerateInterval,
    DerivativeSingularity,
    DomainError,
    PrecisionExhausted,
)

__all__ = [
    "PrecisionPolicy",
    "Diffeo",
    "Identity",
    "Primitive",
    "Qs",
    "Zoom",
    "Compose",
    "Reflect",
    "QsMirror",
    "IDENTITY",
    "zoom_top",
    "exp_family",
    "zoom",
    "compose",
    "reflect",
    "deriv",
    "second_deriv",
    "invert",
    "distortion",
    "c2_norm_estimate",
    "diffeo_from_spec",
    "qs_value",
    "qs_deriv",
    "qs_inverse",
    "int_pow",
    "format_number",
]


@dataclass(frozen=True)
class PrecisionPolicy:
    """Working precision and solver limits.

    ``rel_tol`` defaults to ``2**-(bits - 16)``.  ``guard_bits`` is the number
    of trustworthy significant bits a result must keep; below that the
    computation is declared precision-exhausted.
    """

    bits: int = 256
    rel_tol: object = None
    max_iter: int = 200
    guard_bits: int = 64

    def __post_init__(self):
        if int(self.bits) != self.bits or self.bits < 64:
            raise DomainError(f"mantissa bits must be an integer >= 64, got {self.bits!r}")
        if self.rel_tol is not None:
            t = float(self.rel_tol)
            if not 0.0 < t < 1.0:
                raise DomainError(f"tolerance must lie in (0, 1), got {self.rel_tol!r}")
        if self.max_iter < 1:
            raise DomainError("max_iter must be positive")

    @property
    def tol(self) -> Real:
        if self.rel_tol is None:
            return num(2) ** -(self.bits - 16)
        return num(self.rel_tol)

    @contextmanager
    def activate(self):
        with precision(self.bits):
            yield self


def _current_policy() -> PrecisionPolicy:
    return PrecisionPolicy(bits=max(64, bits()))


def _slack() -> Real:
    return num(2) ** -(bits() - 16)


def format_number(x, digits: int | None = None) -> str:
    """Decimal string that round-trips at the current precision."""
    return decimal_string(x, digits)


def _check_unit(x, what: str = "x") -> Real:
    x = num(x)
    slack = _slack()
    if x < -slack or x > 1 + slack:
        raise DomainError(f"{what}={fmt(x, 8)} outside [0, 1]")
    if x < 0:
        return num(0)
    if x > 1:
        return num(1)
    return x


# --------------------------------------------------------------------------
# scalar q_s family


def _int_exponent(ell):
    """The exponent as a Python int when it is a small integer, else None."""
    if ell == int(ell) and 1 <= ell <= 64:
        return int(ell)
    return None


def _qs_den(s, ell):
    # 1 - s**ell without cancellation for s near 1
    k = _int_exponent(ell)
    if k is not None:
        return (1 - s) * sum(s**j for j in range(k))
    return -gmpy2.expm1(ell * gmpy2.log(s))


def _binom_excess(a, b, k):
    # (a + b)**k - a**k for a, b >= 0, as a sum of positive terms
    total = num(0)
    c = 1
    bp = num(1)
    for j in range(1, k + 1):
        c = c * (k - j + 1) // j
        bp *= b
        total += c * a ** (k - j) * bp
    return total


def qs_value(s, ell, x):
    """q_s(x) = (((1-s)x + s)**ell - s**ell) / (1 - s**ell)."""
    s, ell, x = num(s), num(ell), num(x)
    if x == 0:
        return num(0)
    if ell == 1 or s == 1:
        return x
    k = _int_exponent(ell)
    if s == 0:
        return x**k if k is not None else x**ell
    if k is not None:
        return _binom_excess(s, (1 - s) * x, k) / _qs_den(s, ell)
    z = (1 - s) * x / s
    return s**ell * gmpy2.expm1(ell * gmpy2.log1p(z)) / _qs_den(s, ell)


def int_pow(u, ell):
    """u**ell, using exact integer powering when ell is a small integer."""
    k = _int_exponent(ell)
    return u**k if k is not None else u**ell


def qs_deriv(s, ell, x):
    s, ell, x = num(s), num(ell), num(x)
    if ell == 1 or s == 1:
        return num(1)
    if s == 0:
        return ell * int_pow(x, ell - 1)
    u = s + (1 - s) * x
    return ell * (1 - s) * int_pow(u, ell - 1) / _qs_den(s, ell)


def qs_second(s, ell, x):
    s, ell, x = num(s), num(ell), num(x)
    if ell == 1 or s == 1:
        return num(0)
    if s == 0:
        if x == 0 and ell < 2:
            return INF
        return ell * (ell - 1) * int_pow(x, ell - 2)
    u = s + (1 - s) * x
    return ell * (ell - 1) * (1 - s) ** 2 * int_pow(u, ell - 2) / _qs_den(s, ell)


def qs_inverse(s, ell, y):
    s, ell, y = num(s), num(ell), num(y)
    if y == 0:
        return num(0)
    if ell == 1 or s == 1:
        return y
    if s == 0:
        return y ** (1 / ell)
    z = y * _qs_den(s, ell) / int_pow(s, ell)
    return s * gmpy2.expm1(gmpy2.log1p(z) / ell) / (1 - s)


def _mirror_excess(z, ell):
    # 1 - (1 - z)**ell for z in [0, 1]
    k = _int_exponent(ell)
    if k is None or k > 8:
        return -gmpy2.expm1(ell * gmpy2.log1p(-z))
    if z >= 0.5:
        return 1 - (1 - z) ** k
    total = num(0)
    c = 1
    zp = num(1)
    for j in range(1, k + 1):
        c = c * (k - j + 1) // j
        zp *= z
        total += c * zp if j % 2 else -c * zp
    return total


# --------------------------------------------------------------------------
# DAG nodes


class Diffeo:
    """Base node.  Subclasses implement ``_value``, ``_jet`` and ``_jet2``.

    ``lost_bits`` is a running estimate of the significant bits destroyed by
    cancellation inside the DAG (zoom normalizations are the only source).
    """

    __slots__ = ("depth", "lost_bits", "_hash")
    kind = "abstract"

    def __call__(self, x):
        return self._value(_check_unit(x))

    def eval(self, x):
        return self._value(_check_unit(x))

    def deriv(self, x):
        return deriv(self, x)

    def invert(self, y, policy: PrecisionPolicy | None = None):
        return invert(self, y, policy)

    # value only
    def _value(self, x):
        raise NotImplementedError

    # (value, first derivative)
    def _jet(self, x):
        raise NotImplementedError

    # (value, first derivative, second derivative)
    def _jet2(self, x):
        raise NotImplementedError

    # closed-form or structural inverse; None when unavailable
    def _inverse(self, y):
        return None

    def children(self) -> tuple[Diffeo, ...]:
        return ()

    def nodes(self) -> Iterator[Diffeo]:
        """Unique nodes of the DAG, each yielded once."""
        seen: set[int] = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            yield node
            stack.extend(node.children())

    @property
    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} depth={self.depth}>"


class Identity(Diffeo):
    __slots__ = ()
    kind = "identity"

    def __init__(self):
        self.depth = 0
        self.lost_bits = 0.0

    def _value(self, x):
        return x

    def _jet(self, x):
        return x, num(1)

    def _jet2(self, x):
        return x, num(1), num(0)

    def _inverse(self, y):
        return y

    def to_spec(self):
        return {"kind": "identity"}


IDENTITY = Identity()


class Primitive(Diffeo):
    """Named primitive with user-supplied value, first and second derivative.

    The callables receive and return ``gmpy2.mpfr`` numbers.  ``inverse`` is optional;
    without it inversion falls back to the bracketed Newton solver.
    """

    __slots__ = ("name", "params", "f", "df", "d2f", "inv", "mirror")
    kind = "primitive"

    def __init__(
        self,
        name: str,
        f: Callable,
        df: Callable,
        d2f: Callable,
        inverse: Callable | None = None,
        params: dict | None = None,
        mirror: Callable | None = None,
    ):
        if d2f is None:
            raise DomainError("named primitives need a second-derivative evaluator")
        self.name = name
        self.params = dict(params or {})
        self.f, self.df, self.d2f, self.inv = f, df, d2f, inverse
        # zero-argument factory for x -> 1 - f(1 - x) in closed form
        self.mirror = mirror
        self.depth = 0
        self.lost_bits = 0.0

    def _value(self, x):
        if x == 0 or x == 1:
            return x
        return self.f(x)

    def _jet(self, x):
        return self._value(x), self.df(x)

    def _jet2(self, x):
        return self._value(x), self.df(x), self.d2f(x)

    def _inverse(self, y):
        if self.inv is None:
            return None
        return self.inv(y)

    def to_spec(self):
        spec = {"kind": self.name}
        spec.update({k: format_number(v) for k, v in self.params.items()})
        return spec


def exp_family(a) -> Diffeo:
    """e_a(x) = (exp(a x) - 1) / (exp(a) - 1); a = 0 is the identity."""
    a = num(a)
    if a == 0:
        return IDENTITY
    den = gmpy2.expm1(a)

    def f(x):
        return gmpy2.expm1(a * x) / den

    def df(x):
        return a * gmpy2.exp(a * x) / den

    def d2f(x):
        return a * a * gmpy2.exp(a * x) / den

    def inv(y):
        return gmpy2.log1p(y * den) / a

    return Primitive("exp", f, df, d2f, inv, params={"a": a}, mirror=lambda: exp_family(-a))


class Qs(Diffeo):
    """The diffeomorphic part of x**ell, parametrized by s in [0, 1]."""

    __slots__ = ("s", "ell")
    kind = "qs"

    def __init__(self, s, ell):
        s, ell = num(s), num(ell)
        if not 0 <= s <= 1:
            raise DomainError(f"q_s needs s in [0, 1], got {fmt(s, 8)}")
        if ell < 1:
            raise DomainError(f"q_s needs exponent >= 1, got {fmt(ell, 8)}")
        self.s, self.ell = s, ell
        self.depth = 0
        self.lost_bits = 0.0

    def _value(self, x):
        return qs_value(self.s, self.ell, x)

    def _jet(self, x):
        return qs_value(self.s, self.ell, x), qs_deriv(self.s, self.ell, x)

    def _jet2(self, x):
        s, ell = self.s, self.ell
        return qs_value(s, ell, x), qs_deriv(s, ell, x), qs_second(s, ell, x)

    def _inverse(self, y):
        return qs_inverse(self.s, self.ell, y)

    def to_spec(self):
        return {"kind": "qs", "s": format_number(self.s), "l": format_number(self.ell)}


class QsMirror(Diffeo):
    """x -> 1 - q_s(1 - x), evaluated without cancellation near 0."""

    __slots__ = ("s", "ell", "den")
    kind = "qs_mirror"

    def __init__(self, s, ell):
        s, ell = num(s), num(ell)
        if not 0 <= s <= 1 or ell < 1:
            raise DomainError("mirrored q_s needs s in [0, 1] and exponent >= 1")
        self.s, self.ell = s, ell
        self.den = num(1) if s == 0 else _qs_den(s, ell)
        self.depth = 0
        self.lost_bits = 0.0

    def _trivial(self):
        return self.ell == 1 or self.s == 1

    def _value(self, x):
        if x == 0 or self._trivial():
            return x
        return _mirror_excess((1 - self.s) * x, self.ell) / self.den

    def _jet(self, x):
        if self._trivial():
            return x, num(1)
        c = 1 - self.s
        u = 1 - c * x
        return self._value(x), self.ell * c * int_pow(u, self.ell - 1) / self.den

    def _jet2(self, x):
        if self._trivial():
            return x, num(1), num(0)
        c = 1 - self.s
        u = 1 - c * x
        v, d = self._jet(x)
        if u == 0 and self.ell < 2:
            return v, d, -INF
        return v, d, -self.ell * (self.ell - 1) * c * c * int_pow(u, self.ell - 2) / self.den

    def _inverse(self, y):
        if y == 0 or self._trivial():
            return y
        return -gmpy2.expm1(gmpy2.log1p(-y * self.den) / self.ell) / (1 - self.s)

    def to_spec(self):
        return {"kind": "reflect", "of": Qs(self.s, self.ell).to_spec()}


def _cancel_bits(scale, diff) -> float:
    if diff <= 0:
        return math.inf
    return max(0.0, float(gmpy2.log2(scale / diff)))


class Zoom(Diffeo):
    """Z_[a,b] g (x) = (g((b-a) x + a) - g(a)) / (g(b) - g(a))."""

    __slots__ = ("child", "a", "b", "width", "ga", "gb", "span")
    kind = "zoom"

    def __init__(self, child: Diffeo, a, b):
        a, b = num(a), num(b)
        if not (0 <= a < b <= 1):
            raise DegenerateInterval(
                f"zoom interval [{fmt(a, 8)}, {fmt(b, 8)}] is not inside [0, 1]"
            )
        width = b - a
        if width <= _slack() * max(b, num(1) / 2 ** 64):
            raise DegenerateInterval("zoom interval narrower than working tolerance")
        ga = num(0) if a == 0 else child._value(a)
        gb = num(1) if b == 1 else child._value(b)
        span = gb - ga
        if span <= 0:
            raise DegenerateInterval("zoom interval collapses under the child map")
        self.child, self.a, self.b = child, a, b
        self.width, self.ga, self.gb, self.span = width, ga, gb, span
        self.depth = child.depth + 1
        self.lost_bits = (
            child.lost_bits
            + _cancel_bits(max(abs(a), abs(b)), width)
            + _cancel_bits(max(abs(ga), abs(gb)), span)
        )

    def children(self):
        return (self.child,)

    def _value(self, x):
        if x == 0:
            return num(0)
        if x == 1:
            return num(1)
        return (self.child._value(self.a + self.width * x) - self.ga) / self.span

    def _jet(self, x):
        v, d = self.child._jet(self.a + self.width * x)
        return (v - self.ga) / self.span, self.width * d / self.span

    def _jet2(self, x):
        v, d, d2 = self.child._jet2(self.a + self.width * x)
        w = self.width
        return (v - self.ga) / self.span, w * d / self.span, w * w * d2 / self.span

    def _inverse(self, y):
        t = self.child._inverse(self.ga + self.span * y)
        if t is None:
            return None
        return (t - self.a) / self.width

    def to_spec(self):
        return {
            "kind": "zoom",
            "a": format_number(self.a),
            "b": format_number(self.b),
            "of": self.child.to_spec(),
        }


class Compose(Diffeo):
    """outer o inner."""

    __slots__ = ("outer", "inner")
    kind = "compose"

    def __init__(self, outer: Diffeo, inner: Diffeo):
        self.outer, self.inner = outer, inner
        self.depth = 1 + max(outer.depth, inner.depth)
        self.lost_bits = max(outer.lost_bits, inner.lost_bits)

    def children(self):
        return (self.outer, self.inner)

    def _value(self, x):
        return self.outer._value(self.inner._value(x))

    def _jet(self, x):
        vi, di = self.inner._jet(x)
        vo, do = self.outer._jet(vi)
        return vo, do * di

    def _jet2(self, x):
        vi, di, d2i = self.inner._jet2(x)
        vo, do, d2o = self.outer._jet2(vi)
        return vo, do * di, d2o * di * di + do * d2i

    def _inverse(self, y):
        t = self.outer._inverse(y)
        if t is None:
            return None
        return self.inner._inverse(min(max(t, num(0)), num(1)))

    def to_spec(self):
        return {"kind": "compose", "outer": self.outer.to_spec(), "inner": self.inner.to_spec()}


class Reflect(Diffeo):
    """x -> 1 - g(1 - x); orientation preserving whenever g is."""

    __slots__ = ("child",)
    kind = "reflect"

    def __init__(self, child: Diffeo):
        self.child = child
        self.depth = child.depth + 1
        self.lost_bits = child.lost_bits

    def children(self):
        return (self.child,)

    def _value(self, x):
        return 1 - self.child._value(1 - x)

    def _jet(self, x):
        v, d = self.child._jet(1 - x)
        return 1 - v, d

    def _jet2(self, x):
        v, d, d2 = self.child._jet2(1 - x)
        return 1 - v, d, -d2

    def _inverse(self, y):
        t = self.child._inverse(1 - y)
        if t is None:
            return None
        return 1 - t

    def to_spec(self):
        return {"kind": "reflect", "of": self.child.to_spec()}


# --------------------------------------------------------------------------
# constructors


def zoom(d: Diffeo, a, b) -> Diffeo:
    """Z_[a,b] d.  Zooms of the identity collapse to the identity."""
    a, b = num(a), num(b)
    if isinstance(d, Identity):
        if not (0 <= a < b <= 1):
            raise DegenerateInterval("zoom interval is not inside [0, 1]")
        return IDENTITY
    if a == 0 and b == 1:
        return d
    return Zoom(d, a, b)


def compose(outer: Diffeo, inner: Diffeo) -> Diffeo:
    return Compose(outer, inner)


def reflect(d: Diffeo, _memo: dict | None = None) -> Diffeo:
    """The conjugate x -> 1 - d(1 - x).

    The conjugation is pushed through compositions and zooms down to the
    primitives, which have closed-form mirrors.  Values near 0 of the result
    are therefore computed with full relative precision, which matters when
    the renormalization zooms into intervals abutting 1.
    """
    memo = {} if _memo is None else _memo
    key = id(d)
    if key in memo:
        return memo[key]
    if isinstance(d, Identity):
        out = d
    elif isinstance(d, Reflect):
        out = d.child
    elif isinstance(d, Qs):
        out = QsMirror(d.s, d.ell)
    elif isinstance(d, QsMirror):
        out = Qs(d.s, d.ell)
    elif isinstance(d, Compose):
        out = Compose(reflect(d.outer, memo), reflect(d.inner, memo))
    elif isinstance(d, Zoom):
        out = _mirror_zoom(d, memo)
    elif isinstance(d, Primitive) and d.mirror is not None:
        out = d.mirror()
    else:
        out = Reflect(d)
    memo[key] = out
    return out


def _mirror_zoom(d: Zoom, memo: dict) -> Diffeo:
    if d.a == 0:
        # mirroring would place the interval against 1, where the endpoint
        # images cancel; the generic conjugation keeps absolute accuracy
        return Reflect(d)
    child = reflect(d.child, memo)
    node = Zoom.__new__(Zoom)
    node.child = child
    node.a, node.b = 1 - d.b, 1 - d.a
    node.width = d.width
    node.ga = num(0) if d.b == 1 else child._value(node.a)
    node.span = d.span
    node.gb = node.ga + node.span
    node.depth = child.depth + 1
    node.lost_bits = d.lost_bits
    return node


def zoom_top(d: Diffeo, eps) -> Diffeo:
    """Z_[1-eps, 1] d evaluated as 1 - Rd(eps (1 - x)) / Rd(eps), Rd = reflect(d).

    The interval endpoints never have to be formed as 1 - eps, so eps may be
    far below the working epsilon.
    """
    eps = num(eps)
    if not 0 < eps <= 1:
        raise DegenerateInterval("zoom width must lie in (0, 1]")
    if eps == 1 or isinstance(d, Identity):
        return d
    return Reflect(zoom(reflect(d), 0, eps))


# --------------------------------------------------------------------------
# operations


def deriv(d: Diffeo, x):
    """Exact chain-rule derivative; raises on a vanishing derivative."""
    x = _check_unit(x)
    value = d._jet(x)[1]
    if not value > 0 or not gmpy2.is_finite(value):
        raise DerivativeSingularity(f"derivative {value} at x={fmt(x, 8)}")
    return value


def second_deriv(d: Diffeo, x):
    return d._jet2(_check_unit(x))[2]


def invert(d: Diffeo, y, policy: PrecisionPolicy | None = None):
    """Solve d(x) = y.

    A structural inverse (closed forms pushed through the DAG) supplies the
    starting point, then a safeguarded Newton iteration polishes it: Newton
    steps are taken only while they stay inside the monotone bracket and
    shrink fast enough, otherwise the bracket is bisected.  Convergence is
    relative to min(y, 1 - y), so roots near either endpoint keep full
    relative precision.
    """
    policy = policy or _current_policy()
    y = _check_unit(y, "y")
    if y == 0 or y == 1:
        return y
    tol = policy.tol
    target = min(y, 1 - y)
    lo, hi = num(0), num(1)
    x = d._inverse(y)
    if x is None or not (0 < x < 1):
        x = y
    dx_old = dx = num(1)
    best_x, best_r, stall = x, None, 0
    for _ in range(policy.max_iter):
        v, dv = d._jet(x)
        r = v - y
        if abs(r) <= tol * target:
            return x
        if best_r is None or abs(r) < abs(best_r) / 2:
            stall = 0
        else:
            stall += 1
        if best_r is None or abs(r) < abs(best_r):
            best_x, best_r = x, r
        if stall >= 4:
            # rounding noise of the DAG dominates the residual
            floor = abs(best_r) / target
            if floor > num(2) ** -policy.guard_bits:
                raise PrecisionExhausted(
                    f"inverse residual stalled at relative {fmt(floor, 3)}"
                )
            return best_x
        if r < 0:
            lo = x
        else:
            hi = x
        if hi - lo <= tol * min(x, 1 - x):
            return x
        newton_ok = dv > 0 and lo < x - r / dv < hi and abs(2 * r) <= abs(dx_old * dv)
        dx_old = dx
        if newton_ok:
            dx = r / dv
            x = x - dx
        else:
            # geometric bisection near 0 keeps tiny roots cheap to reach
            if lo == 0 and hi < num(1) / 4:
                x = hi / 4
            elif hi == 1 and lo > num(3) / 4:
                x = 1 - (1 - lo) / 4
            else:
                x = (lo + hi) / 2
            dx = hi - lo
    raise ConvergenceError(
        f"inverse did not converge in {policy.max_iter} iterations (y={fmt(y, 8)})"
    )


def _grid(lo, hi, m: int) -> list:
    lo, hi = num(lo), num(hi)
    if m < 2:
        raise DomainError("grid needs at least two points")
    step = (hi - lo) / (m - 1)
    return [lo + step * i for i in range(m)]


def distortion(d: Diffeo, T=(0, 1), m: int = 64):
    """max over grid pairs of log(Dd(x) / Dd(y)) on the interval T."""
    lo, hi = _check_unit(T[0]), _check_unit(T[1])
    if not lo <= hi:
        raise DomainError("distortion interval must be ordered")
    logs = [gmpy2.log(deriv(d, x)) for x in _grid(lo, hi, m)]
    return max(logs) - min(logs)


def c2_norm_estimate(d: Diffeo, m: int = 65):
    """Sampled sup|d| + sup|d'| + sup|d''| + sup|1/d'| on [0, 1].

    The grid is dyadic with 2**ceil(log2(m-1)) + 1 points, so grids are nested
    and the estimate never decreases with m.  The 1/d' term makes the value
    blow up as the derivative degenerates (e.g. q_s with s -> 0).
    """
    if m < 3:
        raise DomainError("C2 estimate needs m >= 3")
    k = max(1, math.ceil(math.log2(m - 1)))
    n = 2**k
    sup_v = sup_d = sup_d2 = sup_inv = num(0)
    for i in range(n + 1):
        x = num(i) / n
        v, d1, d2 = d._jet2(x)
        sup_v = max(sup_v, abs(v))
        sup_d = max(sup_d, abs(d1))
        sup_d2 = max(sup_d2, abs(d2))
        sup_inv = max(sup_inv, INF if d1 == 0 else 1 / abs(d1))
    return sup_v + sup_d + sup_d2 + sup_inv


# --------------------------------------------------------------------------
# serialization


def diffeo_from_spec(spec: dict) -> Diffeo:
    """Inverse of ``Diffeo.to_spec`` (trees; shared nodes are duplicated)."""
    kind = spec.get("kind")
    if kind == "identity":
        return IDENTITY
    if kind == "exp":
        return exp_family(num(spec["a"]))
    if kind == "qs":
        return Qs(num(spec["s"]), num(spec["l"]))
    if kind == "zoom":
        return zoom(diffeo_from_spec(spec["of"]), num(spec["a"]), num(spec["b"]))
    if kind == "compose":
        return compose(diffeo_from_spec(spec["outer"]), diffeo_from_spec(spec["inner"]))
    if kind == "reflect":
        return reflect(diffeo_from_spec(spec["of"]))
    raise DomainError(f"unknown diffeo kind {kind!r}")
