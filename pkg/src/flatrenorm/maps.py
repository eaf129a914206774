"""The family of circle maps with a flat interval, in X, S and Y coordinates.

A map is determined by four points x1 < 0 < x3 < x4 < 1, the critical value
x2 = f(1) = f(x1), the power-map parameter s, two critical exponents and
three diffeomorphisms.  On [x1, 1] (x1 identified with 1):

    [x1, 0):  (1 - x2) q_s(phi(1 - x/x1)) + x2
    [0, x3]:  x1 phil((x3 - x)/x3) ** l1
    (x3, x4): 0
    [x4, 1]:  x2 phir((x - x4)/(1 - x4)) ** l2

X coordinates are canonical.  S and Y are derived views that also carry s,
so the chart degeneracy at l2 = 1 (where S5 = 1 for every s) is harmless.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import gmpy2

from .diffeo import IDENTITY, Diffeo, diffeo_from_spec, format_number, int_pow, qs_value
from .numeric import Real, bits, fmt, num
from .errors import DomainError, ExponentDegeneracy

__all__ = [
    "MapX",
    "MapS",
    "MapY",
    "qs_eval",
    "eval_map",
    "x_to_s",
    "s_to_x",
    "s_to_y",
    "y_to_s",
    "validate",
    "alpha",
    "alpha_s",
    "make_map",
    "map_to_json",
    "map_from_json",
    "map_to_dict",
    "map_from_dict",
]


@dataclass(frozen=True)
class MapX:
    x1: Real
    x2: Real
    x3: Real
    x4: Real
    s: Real
    l1: Real
    l2: Real
    phi: Diffeo = IDENTITY
    phil: Diffeo = IDENTITY
    phir: Diffeo = IDENTITY

    def __post_init__(self):
        for name in ("x1", "x2", "x3", "x4", "s", "l1", "l2"):
            object.__setattr__(self, name, num(getattr(self, name)))

    def __call__(self, x):
        return eval_map(self, x)

    def with_(self, **changes) -> MapX:
        return replace(self, **changes)

    @property
    def flat(self) -> tuple:
        return self.x3, self.x4


@dataclass(frozen=True)
class MapS:
    S1: Real
    S2: Real
    S3: Real
    S4: Real
    S5: Real
    l1: Real
    l2: Real
    phi: Diffeo = IDENTITY
    phil: Diffeo = IDENTITY
    phir: Diffeo = IDENTITY
    s: Real | None = field(default=None)

    def __post_init__(self):
        for name in ("S1", "S2", "S3", "S4", "S5", "l1", "l2"):
            object.__setattr__(self, name, num(getattr(self, name)))
        if self.s is not None:
            object.__setattr__(self, "s", num(self.s))

    @property
    def values(self) -> tuple:
        return self.S1, self.S2, self.S3, self.S4, self.S5


@dataclass(frozen=True)
class MapY:
    y1: Real
    y2: Real
    y3: Real
    y4: Real
    y5: Real
    l1: Real
    l2: Real
    phi: Diffeo = IDENTITY
    phil: Diffeo = IDENTITY
    phir: Diffeo = IDENTITY
    s: Real | None = field(default=None)

    @property
    def w(self) -> tuple:
        return self.y2, self.y3, self.y4, self.y5


def make_map(x1, x2, x3, x4, s, l1, l2, phi=IDENTITY, phil=IDENTITY, phir=IDENTITY) -> MapX:
    return MapX(x1, x2, x3, x4, s, l1, l2, phi, phil, phir)


def qs_eval(s, ell, x):
    """Scalar q_s with domain checks."""
    s, ell, x = num(s), num(ell), num(x)
    if not 0 <= x <= 1:
        raise DomainError(f"q_s argument {fmt(x, 8)} outside [0, 1]")
    if not 0 <= s <= 1:
        raise DomainError(f"q_s parameter {fmt(s, 8)} outside [0, 1]")
    return qs_value(s, ell, x)


def _clip(u):
    if u < 0:
        return num(0)
    if u > 1:
        return num(1)
    return u


def eval_map(f: MapX, x):
    x = num(x)
    slack = num(2) ** -(bits() - 16)
    if x < f.x1 - slack * abs(f.x1) or x > 1 + slack:
        raise DomainError(f"x={fmt(x, 8)} outside [x1, 1]")
    if x < 0:
        u = _clip(1 - x / f.x1)
        return (1 - f.x2) * qs_value(f.s, f.l2, f.phi._value(u)) + f.x2
    if x <= f.x3:
        u = _clip((f.x3 - x) / f.x3)
        return f.x1 * int_pow(f.phil._value(u), f.l1)
    if x < f.x4:
        return num(0)
    u = _clip((x - f.x4) / (1 - f.x4))
    return f.x2 * int_pow(f.phir._value(u), f.l2)


def x_to_s(f: MapX) -> MapS:
    S1 = (f.x3 - f.x2) / f.x3
    S2 = (1 - f.x4) / (1 - f.x2)
    S3 = f.x3 / (1 - f.x4)
    S4 = f.x2 / (-f.x1)
    S5 = int_pow(f.s, f.l2 - 1)
    return MapS(S1, S2, S3, S4, S5, f.l1, f.l2, f.phi, f.phil, f.phir, s=f.s)


def s_to_x(g: MapS) -> MapX:
    S1, S2, S3, S4, S5 = g.values
    k = S3 * (1 - S1) * S2
    den = 1 + k
    x1 = -k / (den * S4)
    x2 = k / den
    x3 = S3 * S2 / den
    x4 = 1 - S2 / den
    if g.s is not None:
        s = g.s
    elif g.l2 == 1:
        raise ExponentDegeneracy("S5 = 1 carries no information about s when l2 = 1")
    else:
        s = S5 ** (1 / (g.l2 - 1))
    return MapX(x1, x2, x3, x4, s, g.l1, g.l2, g.phi, g.phil, g.phir)


def s_to_y(g: MapS) -> MapY:
    for name in ("S2", "S3", "S4", "S5"):
        if not getattr(g, name) > 0:
            raise DomainError(f"{name} must be positive to take logarithms")
    return MapY(
        g.S1,
        gmpy2.log(g.S2),
        gmpy2.log(g.S3),
        gmpy2.log(g.S4),
        gmpy2.log(g.S5),
        g.l1,
        g.l2,
        g.phi,
        g.phil,
        g.phir,
        s=g.s,
    )


def y_to_s(g: MapY) -> MapS:
    return MapS(
        g.y1,
        gmpy2.exp(g.y2),
        gmpy2.exp(g.y3),
        gmpy2.exp(g.y4),
        gmpy2.exp(g.y5),
        g.l1,
        g.l2,
        g.phi,
        g.phil,
        g.phir,
        s=g.s,
    )


def alpha(f: MapX):
    """x3 / x4: position of the flat interval relative to 0."""
    return f.x3 / f.x4


def alpha_s(g: MapS):
    S1, S2, S3 = g.S1, g.S2, g.S3
    return S2 * S3 / (1 - S2 + (1 - S1) * S2 * S3)


def validate(f: MapX, tol=None) -> list[str]:
    """Violated inequalities of the simplex plus the circle identification."""
    out = []
    if tol is None:
        tol = num(2) ** -(bits() - 24)
    if not f.x1 < 0:
        out.append("x1 < 0")
    if not 0 < f.x3:
        out.append("0 < x3")
    if not f.x3 < f.x4:
        out.append("x3 < x4")
    if not f.x4 < 1:
        out.append("x4 < 1")
    if not 0 < f.x2:
        out.append("0 < x2")
    if not f.x2 < 1:
        out.append("x2 < 1")
    if not 0 < f.s:
        out.append("0 < s")
    if not f.s < 1:
        out.append("s < 1")
    if not f.l1 >= 1:
        out.append("l1 >= 1")
    if not f.l2 >= 1:
        out.append("l2 >= 1")
    if out:
        return out
    try:
        if abs(eval_map(f, f.x1) - f.x2) > tol:
            out.append("f(x1) = x2")
        if abs(eval_map(f, 1) - f.x2) > tol:
            out.append("f(1) = x2")
    except DomainError as exc:
        out.append(f"evaluation failed: {exc}")
    return out


# --------------------------------------------------------------------------
# serialization


def map_to_dict(f: MapX) -> dict:
    return {
        "l1": format_number(f.l1),
        "l2": format_number(f.l2),
        "x1": format_number(f.x1),
        "x2": format_number(f.x2),
        "x3": format_number(f.x3),
        "x4": format_number(f.x4),
        "s": format_number(f.s),
        "phi": f.phi.to_spec(),
        "phil": f.phil.to_spec(),
        "phir": f.phir.to_spec(),
    }


def _num(d: dict, key: str):
    if key not in d:
        raise DomainError(f"map spec is missing {key!r}")
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise DomainError(f"map field {key!r} must be a number or decimal string")
    try:
        return num(v)
    except (ValueError, TypeError) as exc:
        raise DomainError(f"map field {key!r} is not a number: {v!r}") from exc


def map_from_dict(d: dict) -> MapX:
    def diffeo(key):
        spec = d.get(key, {"kind": "identity"})
        if not isinstance(spec, dict):
            raise DomainError(f"{key!r} must be a diffeo spec object")
        return diffeo_from_spec(spec)

    return MapX(
        _num(d, "x1"),
        _num(d, "x2"),
        _num(d, "x3"),
        _num(d, "x4"),
        _num(d, "s"),
        _num(d, "l1"),
        _num(d, "l2"),
        diffeo("phi"),
        diffeo("phil"),
        diffeo("phir"),
    )


def map_to_json(f: MapX) -> str:
    return json.dumps(map_to_dict(f), indent=2, sort_keys=True)


def map_from_json(text: str) -> MapX:
    return map_from_dict(json.loads(text))
