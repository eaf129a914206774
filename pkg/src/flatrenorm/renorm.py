"""The renormalization operator, the iteration driver and the Fibonacci tuner.

R f is the first return map of f to [x1, x2], rescaled by h(x) = x/x1.  The
new map belongs to the same family with the two critical exponents swapped.
``renorm_x`` builds it from the X coordinates; ``renorm_s`` builds the same
operator from the S coordinates through a different (split) chain of zooms,
so the two serve as cross-checks of each other.

Zooms into intervals abutting 1 are taken through mirrored zooms near 0
(``zoom_top``) so that gaps of size far below the working epsilon remain
exact.  The S chart keeps those gaps as ratios and therefore reaches much
deeper than the X chart in degenerate regimes, where 1 - x4 underflows the
mantissa after a few levels.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import gmpy2
import mpmath

from .diffeo import (
    IDENTITY,
    Diffeo,
    PrecisionPolicy,
    Qs,
    compose,
    distortion,
    int_pow,
    invert,
    reflect,
    zoom,
    zoom_top,
)
from .errors import BracketError, DomainError, NotRenormalizable, PrecisionExhausted
from .maps import MapS, MapX, alpha_s, s_to_x, x_to_s
from .numeric import Real, bits, fmt, num, to_mp

__all__ = [
    "LevelRecord",
    "FailureRecord",
    "RenormTrace",
    "TuneResult",
    "is_renormalizable",
    "renorm_x",
    "renorm_s",
    "iterate",
    "tune_to_fibonacci",
    "tune_parameter",
    "trace_to_csv",
    "TRACE_COLUMNS",
    "sci",
]

TRACE_COLUMNS = [
    "n", "S1", "S2", "S3", "S4", "S5", "s", "y2", "y3", "y4", "y5",
    "alpha", "dist_phi", "dist_phil", "dist_phir", "dag_depth", "renormalizable",
]


def is_renormalizable(f) -> bool:
    """0 < x2 < x3, i.e. S1 in (0, 1) in the S chart."""
    if isinstance(f, MapS):
        return bool(0 < f.S1 < 1)
    return bool(0 < f.x2 < f.x3)


def _qphi(s, ell, phi: Diffeo) -> Diffeo:
    q = Qs(s, ell)
    if ell == 1 or s == 1:
        return phi
    if phi is IDENTITY:
        return q
    return compose(q, phi)


def _budget(policy: PrecisionPolicy) -> Real:
    # smallest relative quantity still resolved with guard bits to spare
    return num(2) ** -(policy.bits - policy.guard_bits)


def renorm_x(f: MapX, policy: PrecisionPolicy | None = None) -> MapX:
    """R f computed from X coordinates."""
    policy = policy or PrecisionPolicy(bits=bits())
    if not is_renormalizable(f):
        raise NotRenormalizable(
            f"need 0 < x2 < x3, got x2={fmt(f.x2, 10)}, x3={fmt(f.x3, 10)}"
        )
    x1, x2, x3, x4 = f.x1, f.x2, f.x3, f.x4
    S1 = (x3 - x2) / x3
    s_new = f.phil._value(S1)
    x2_new = int_pow(s_new, f.l1)

    qphi = _qphi(f.s, f.l2, f.phi)
    mirror = reflect(qphi)
    # 1 - (q o phi)^-1(y) is the mirrored inverse at 1 - y
    x3_new = invert(mirror, (1 - x4) / (1 - x2), policy)
    t4 = invert(qphi, (x3 - x2) / (1 - x2), policy)
    if t4 < _budget(policy):
        raise PrecisionExhausted("1 - x4 underflows the mantissa in the X chart")

    phi_new = zoom_top(f.phil, x2 / x3)
    phil_new = compose(f.phir, zoom_top(qphi, x3_new))
    phir_new = compose(zoom(f.phil, 0, S1), reflect(zoom(qphi, 0, t4)))
    return MapX(x2 / x1, x2_new, x3_new, 1 - t4, s_new, f.l2, f.l1, phi_new, phil_new, phir_new)


def renorm_s(g: MapS, policy: PrecisionPolicy | None = None) -> MapS:
    """R f computed from S coordinates.

    The diffeomorphisms use the split form Z_I(q o phi) = Z_{phi(I)} q o Z_I phi.
    """
    policy = policy or PrecisionPolicy(bits=bits())
    S1, S2, S3, S4, _ = g.values
    if not 0 < S1 < 1:
        raise NotRenormalizable(f"need S1 in (0, 1), got {fmt(S1, 10)}")
    s = g.s if g.s is not None else s_to_x(g).s
    l1, l2 = g.l1, g.l2
    q = Qs(s, l2)
    qm = reflect(q)
    phim = reflect(g.phi)

    # right end of the flat interval: gap measured from 1
    u3 = invert(qm, S2, policy)
    a3 = invert(phim, u3, policy)
    # left end: measured from 0
    u4 = invert(q, S1 * S2 * S3, policy)
    a4 = invert(g.phi, u4, policy)

    p = g.phil._value(S1)
    p1 = int_pow(p, l1)
    S1n = 1 - p1 / a3
    S2n = a4 / (1 - p1)
    S3n = a3 / a4
    S4n = p1 / S4
    S5n = int_pow(p, l1 - 1)

    phi_new = zoom_top(g.phil, 1 - S1)
    phil_new = compose(g.phir, compose(zoom_top(q, u3), zoom_top(g.phi, a3)))
    phir_new = compose(
        zoom(g.phil, 0, S1), reflect(compose(zoom(q, 0, u4), zoom(g.phi, 0, a4)))
    )
    return MapS(S1n, S2n, S3n, S4n, S5n, l2, l1, phi_new, phil_new, phir_new, s=p)


# --------------------------------------------------------------------------
# iteration


@dataclass
class LevelRecord:
    n: int
    S: tuple
    s: Real
    w: tuple
    alpha: Real
    l1: Real
    l2: Real
    dist_phi: Real | None
    dist_phil: Real | None
    dist_phir: Real | None
    dag_depth: int
    renormalizable: bool = True


@dataclass
class FailureRecord:
    level: int
    side: str  # "undershoot" (x2 <= 0) or "overshoot" (x2 >= x3)
    S1: Real

    @property
    def sign(self) -> int:
        """Bisection side: the failure mode combined with the level parity."""
        base = 1 if self.side == "overshoot" else -1
        return base if self.level % 2 == 0 else -base


@dataclass
class RenormTrace:
    levels: list = field(default_factory=list)
    maps: list = field(default_factory=list)
    failure: FailureRecord | None = None
    stop_reason: str = "depth"
    policy: PrecisionPolicy | None = None
    chart: str = "x"

    @property
    def depth(self) -> int:
        return len(self.levels)

    def __len__(self):
        return len(self.levels)

    def w(self, n: int) -> tuple:
        return self.levels[n].w

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.levels]


def _log_or_zero(v):
    return num(0) if v == 1 else gmpy2.log(v)


def _record(n: int, g: MapS, measure: bool, grid: int) -> LevelRecord:
    S = g.values
    w = tuple(_log_or_zero(v) for v in S[1:])
    dists = (None, None, None)
    if measure:
        dists = tuple(distortion(d, (0, 1), grid) for d in (g.phi, g.phil, g.phir))
    depth = max(g.phi.depth, g.phil.depth, g.phir.depth)
    return LevelRecord(n, S, g.s, w, alpha_s(g), g.l1, g.l2, *dists, depth)


def _failure(n: int, S1) -> FailureRecord:
    side = "overshoot" if S1 <= 0 else "undershoot"
    return FailureRecord(n, side, S1)


def iterate(
    f,
    n_max: int,
    policy: PrecisionPolicy | None = None,
    chart: str = "x",
    measure: bool = True,
    grid: int = 64,
) -> RenormTrace:
    """Apply R until n_max renormalizable levels are recorded or R fails.

    Level n describes R^n f.  A failing level is stored in ``failure``
    (not in ``levels``).  Precision exhaustion stops the run with
    ``stop_reason == "precision"``.
    """
    policy = policy or PrecisionPolicy(bits=max(64, bits()))
    if chart not in ("x", "s"):
        raise DomainError("chart must be 'x' or 's'")
    if n_max < 0:
        raise DomainError("depth must be nonnegative")
    trace = RenormTrace(policy=policy, chart=chart)
    with policy.activate():
        if isinstance(f, MapS):
            current = f if chart == "s" else s_to_x(f)
        else:
            current = x_to_s(f) if chart == "s" else f
        for n in range(n_max):
            g = current if chart == "s" else x_to_s(current)
            if not is_renormalizable(current):
                trace.failure = _failure(n, g.S1)
                trace.stop_reason = "not_renormalizable"
                break
            if not all(v > 0 for v in g.values[1:]) or not 0 < alpha_s(g) < 1:
                trace.stop_reason = "precision"
                break
            trace.levels.append(_record(n, g, measure, grid))
            trace.maps.append(current)
            if n + 1 == n_max:
                break
            try:
                current = renorm_s(current, policy) if chart == "s" else renorm_x(current, policy)
            except PrecisionExhausted:
                trace.stop_reason = "precision"
                break
    return trace


# --------------------------------------------------------------------------
# tuning


@dataclass
class TuneResult:
    value: Real
    bracket: tuple
    steps: int
    depth: int
    map: MapX


def _with_param(template: MapX, name: str, value) -> MapX:
    if name not in ("x1", "x2", "x3", "x4", "s"):
        raise DomainError(f"cannot tune field {name!r}")
    return template.with_(**{name: num(value)})


def _probe(template, name, value, depth, policy, chart):
    tr = iterate(_with_param(template, name, value), depth, policy, chart=chart, measure=False)
    return tr


def tune_parameter(
    template: MapX,
    depth: int,
    policy: PrecisionPolicy | None = None,
    param: str = "x2",
    bracket: tuple | None = None,
    chart: str = "x",
) -> TuneResult:
    """Bisect one scalar field until the map admits ``depth`` renormalizations.

    The two sides of the bracket are told apart by how the cascade fails:
    the failure mode (x2 <= 0 or x2 >= x3) combined with the parity of the
    failing level, since each renormalization reverses orientation.
    """
    policy = policy or PrecisionPolicy(bits=max(64, bits()))
    with policy.activate():
        if depth <= 0:
            v = getattr(template, param)
            return TuneResult(v, (v, v), 0, 0, template)
        if bracket is None:
            if param != "x2":
                raise BracketError(f"no default bracket for {param!r}")
            bracket = (num(0), template.x3)
        lo, hi = num(bracket[0]), num(bracket[1])
        if not lo < hi:
            raise BracketError("bracket must satisfy lo < hi")

        def side(v):
            tr = _probe(template, param, v, depth, policy, chart)
            if tr.failure is None and tr.stop_reason == "depth":
                return 0, tr
            if tr.failure is None:
                raise PrecisionExhausted(
                    f"cascade lost precision at level {tr.depth} before reaching depth {depth}"
                )
            return tr.failure.sign, tr

        s_lo, _ = side(lo)
        s_hi, _ = side(hi)
        if s_lo == 0:
            return TuneResult(lo, (lo, hi), 0, depth, _with_param(template, param, lo))
        if s_hi == 0:
            return TuneResult(hi, (lo, hi), 0, depth, _with_param(template, param, hi))
        if s_lo == s_hi:
            raise BracketError("bracket endpoints fail on the same side")
        budget = _budget(policy)
        steps = 0
        while True:
            mid = (lo + hi) / 2
            steps += 1
            s_mid, tr = side(mid)
            if s_mid == 0:
                return TuneResult(mid, (lo, hi), steps, depth, _with_param(template, param, mid))
            if s_mid == s_lo:
                lo = mid
            else:
                hi = mid
            if hi - lo <= budget * max(abs(lo), abs(hi)):
                raise PrecisionExhausted(
                    f"bracket collapsed after {steps} steps with best depth {tr.depth} < {depth}"
                )


def tune_to_fibonacci(
    template: MapX,
    depth: int,
    policy: PrecisionPolicy | None = None,
    param: str = "x2",
    bracket: tuple | None = None,
    chart: str = "x",
) -> MapX:
    return tune_parameter(template, depth, policy, param, bracket, chart).map


# --------------------------------------------------------------------------
# output


def sci(x, digits: int = 17) -> str:
    """Scientific notation with ``digits`` significant digits."""
    if x is None:
        return ""
    x = to_mp(x)
    if x == 0:
        return "0." + "0" * (digits - 1) + "e+00"
    if not mpmath.isfinite(x):
        return str(x)
    sign = "-" if x < 0 else ""
    x = abs(x)
    e = int(mpmath.floor(mpmath.log10(x)))
    for _ in range(2):
        m = mpmath.nstr(x / mpmath.mpf(10) ** e, digits, min_fixed=-math.inf,
                        max_fixed=math.inf, strip_zeros=False)
        # rounding can carry the mantissa into the next decade
        if mpmath.mpf(m) < 10:
            break
        e += 1
    if "." not in m:
        m += "."
    return f"{sign}{m}e{e:+03d}"


def trace_rows(trace: RenormTrace, digits: int = 17) -> list[list[str]]:
    rows = []
    for r in trace.levels:
        rows.append(
            [str(r.n)]
            + [sci(v, digits) for v in r.S]
            + [sci(r.s, digits)]
            + [sci(v, digits) for v in r.w]
            + [sci(r.alpha, digits), sci(r.dist_phi, digits), sci(r.dist_phil, digits), sci(r.dist_phir, digits)]
            + [str(r.dag_depth), "1"]
        )
    return rows


def trace_to_csv(trace: RenormTrace, digits: int = 17) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    w.writerows(trace_rows(trace, digits))
    return buf.getvalue()
