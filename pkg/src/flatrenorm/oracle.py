"""Direct iteration of the circle map, used to check the renormalization operator.

Nothing here uses the operator's closed-form recursion.  Return times, the
dynamical points and the first-return maps come from iterating f (and its
branch inverses) in the original coordinates; the level-n picture is then
compared with the renormalization trace.

Index convention: q_0 = q_1 = 1, q_2 = 2, ...  R^n f is the first return
map of f to P_n [x1_n, 1], rescaled by P_n, the product of the x1 of the
earlier levels.  Its return times are q_n on the side of 0 containing x1_n
and q_{n+1} on the side containing 1, and the level-n points x1_n, x2_n
sit at f^{q_{n+1}}(0), f^{q_{n+2}}(0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import mpmath

from .diffeo import PrecisionPolicy, _int_exponent, invert, qs_inverse
from .errors import ConvergenceError, DomainError, NotRenormalizable
from .maps import MapS, MapX, eval_map, s_to_x
from .numeric import Real, bits, fmt, num, to_mp
from .renorm import RenormTrace, is_renormalizable, renorm_x

__all__ = [
    "fibonacci",
    "OrbitRecord",
    "inverse_branch",
    "first_return",
    "orbit_points",
    "level_scales",
    "verify_renorm",
    "VerifyReport",
    "return_time_law",
    "ReturnTimeReport",
    "gap_decay_check",
    "GapReport",
    "preimage_gap_ratios",
    "box_dimension",
    "DimensionReport",
    "DIMENSION_COLUMNS",
]

DIMENSION_COLUMNS = ["depth", "scale", "box_count", "local_slope"]


def fibonacci(n: int) -> int:
    """q_n with q_0 = q_1 = 1 and q_2 = 2."""
    if n < 0:
        raise DomainError("Fibonacci index must be nonnegative")
    a, b = 1, 1
    for _ in range(n):
        a, b = b, a + b
    return a


def _root(u, ell):
    k = _int_exponent(ell)
    if k is not None:
        return gmpy2.root(u, k)
    return u ** (1 / ell)


def inverse_branch(f: MapX, y, policy: PrecisionPolicy | None = None):
    """The unique preimage of y != 0 (each branch covers a disjoint arc)."""
    y = num(y)
    if y == 0:
        raise DomainError("0 is the image of the whole flat interval")
    if y < 0:
        u = invert(f.phil, _root(y / f.x1, f.l1), policy)
        return f.x3 - f.x3 * u
    if y <= f.x2:
        u = invert(f.phir, _root(y / f.x2, f.l2), policy)
        return f.x4 + (1 - f.x4) * u
    v = qs_inverse(f.s, f.l2, (y - f.x2) / (1 - f.x2))
    return f.x1 * (1 - invert(f.phi, v, policy))


def first_return(f: MapX, x, lo=None, hi=None, budget: int = 10000) -> tuple:
    """Iterate until the orbit of x re-enters [lo, hi] (default [x1, x2]).

    Returns (point, return time).  Points of the flat interval go to 0 and
    the orbit continues from there.
    """
    lo = f.x1 if lo is None else num(lo)
    hi = f.x2 if hi is None else num(hi)
    y = num(x)
    for k in range(1, budget + 1):
        y = eval_map(f, y)
        if lo <= y <= hi:
            return y, k
    raise ConvergenceError(f"no return within {budget} iterations")


def _forward_orbit(f: MapX, x, length: int) -> list:
    out = [num(x)]
    for _ in range(length):
        out.append(eval_map(f, out[-1]))
    return out


def _backward_orbit(f: MapX, y, length: int, policy) -> list:
    out = [num(y)]
    for _ in range(length):
        out.append(inverse_branch(f, out[-1], policy))
    return out


@dataclass
class OrbitRecord:
    """Dynamical points of levels 0 .. depth-1, found by iterating f.

    ``points[n]`` is (x1_n, x2_n, x3_n, x4_n) in the coordinates of f:
    x1_n = f^{q_{n+1}}(0), x2_n = f^{q_{n+2}}(0), and x3_n, x4_n are the
    preimages of order q_{n+1} - 1 of x3 and x4.  The rescaling reverses
    orientation at odd levels, where x3_n comes from x4 and vice versa.
    """

    f: MapX
    depth: int
    q: list
    points: list = field(default_factory=list)


def orbit_points(f: MapX, depth: int, policy: PrecisionPolicy | None = None) -> OrbitRecord:
    policy = policy or PrecisionPolicy(bits=max(64, bits()))
    with policy.activate():
        q = [fibonacci(k) for k in range(depth + 2)]
        rec = OrbitRecord(f, depth, q)
        if depth <= 0:
            return rec
        fwd = _forward_orbit(f, 0, q[depth + 1])
        back3 = _backward_orbit(f, f.x3, q[depth] - 1, policy)
        back4 = _backward_orbit(f, f.x4, q[depth] - 1, policy)
        for n in range(depth):
            a, b = back3[q[n + 1] - 1], back4[q[n + 1] - 1]
            if n % 2:
                a, b = b, a
            rec.points.append((fwd[q[n + 1]], fwd[q[n + 2]], a, b))
        return rec


def level_scales(trace: RenormTrace) -> list:
    """P_n with x = P_n u taking level-n coordinates u to those of f."""
    out, p = [], num(1)
    for m in trace.maps:
        out.append(p)
        g = s_to_x(m) if isinstance(m, MapS) else m
        p = p * g.x1
    return out


def _circle_dist(a, b, period):
    d = abs(a - b)
    return min(d, abs(d - period))


# --------------------------------------------------------------------------
# operator check


@dataclass
class VerifyReport:
    max_err: Real
    samples: int
    tol: Real
    passed: bool

    def to_dict(self) -> dict:
        return {"max_err": fmt(self.max_err, 6), "samples": self.samples, "pass": self.passed}


def _sample_points(lo, hi, m: int) -> list:
    # cell midpoints: avoids the endpoints and the branch point 0 for even m
    return [lo + (hi - lo) * (2 * i + 1) / (2 * m) for i in range(m)]


def verify_renorm(
    f: MapX,
    m: int = 100,
    tol=1e-20,
    policy: PrecisionPolicy | None = None,
    perturb: dict | None = None,
) -> VerifyReport:
    """Compare renorm_x(f) with h o (first return of f to [x1, x2]) o h^-1.

    ``perturb`` adds offsets to fields of the computed R f before the
    comparison; it exists to show that the check detects a wrong operator.
    """
    policy = policy or PrecisionPolicy(bits=max(64, bits()))
    with policy.activate():
        if not is_renormalizable(f):
            raise NotRenormalizable("verify_renorm needs 0 < x2 < x3")
        tol = num(tol)
        if m <= 0:
            return VerifyReport(num(0), 0, tol, True)
        g = renorm_x(f, policy)
        if perturb:
            g = g.with_(**{k: getattr(g, k) + num(v) for k, v in perturb.items()})
        period = 1 - g.x1
        worst = num(0)
        for u in _sample_points(g.x1, num(1), m):
            direct, _ = first_return(f, f.x1 * u)
            err = _circle_dist(direct / f.x1, eval_map(g, u), period)
            worst = max(worst, err)
        return VerifyReport(worst, m, tol, bool(worst <= tol))


@dataclass
class ReturnTimeReport:
    levels: list
    expected: list
    observed: list
    max_err: list
    passed: bool


def return_time_law(
    f: MapX,
    trace: RenormTrace,
    samples: int = 20,
    policy: PrecisionPolicy | None = None,
) -> ReturnTimeReport:
    """First return times of f to each level interval, and the rescaled return map.

    For every recorded level n, points u of [x1_n, 1] are pushed to
    x = P_n u.  The first return of x to P_n [x1_n, 1] must take q_n steps
    for u < 0 and q_{n+1} steps for u > 0, and the returned point divided
    by P_n must equal R^n f(u).  Half of the samples go to each side of 0.
    """
    policy = policy or trace.policy or PrecisionPolicy(bits=max(64, bits()))
    with policy.activate():
        scales = level_scales(trace)
        rep = ReturnTimeReport([], [], [], [], True)
        for n, m in enumerate(trace.maps):
            g = s_to_x(m) if isinstance(m, MapS) else m
            p = scales[n]
            ends = sorted((p * g.x1, p))
            q_neg, q_pos = fibonacci(n), fibonacci(n + 1)
            budget = 10 * fibonacci(n + 2)
            half = max(1, samples // 2)
            us = _sample_points(g.x1, num(0), half) + _sample_points(num(0), num(1), half)
            seen, worst, ok = set(), num(0), True
            for u in us:
                y, k = first_return(f, p * u, ends[0], ends[1], budget)
                seen.add(k)
                ok &= k == (q_neg if u < 0 else q_pos)
                worst = max(worst, _circle_dist(y / p, eval_map(g, u), 1 - g.x1))
            rep.levels.append(n)
            rep.expected.append((q_neg, q_pos))
            rep.observed.append(sorted(seen))
            rep.max_err.append(worst)
            rep.passed &= ok
        return rep


# --------------------------------------------------------------------------
# gap decay


@dataclass
class GapReport:
    gaps: list
    slope: float | None
    intercept: float | None
    r2: float | None
    loglog_slope: float | None
    passed: bool
    reason: str = ""
    superexponential: bool = False


def _linfit(xs, ys) -> tuple:
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    syy = sum((y - my) ** 2 for y in ys)
    slope = sxy / sxx
    r2 = 1.0 if syy == 0 else (sxy * sxy) / (sxx * syy)
    return slope, my - slope * mx, r2


def _accelerating(ys) -> bool:
    # two-step decrements of log gaps, per parity, all negative and growing in size
    for start in (0, 1):
        seq = ys[start::2]
        d = [b - a for a, b in zip(seq, seq[1:])]
        if len(d) < 2 or any(x >= 0 for x in d):
            return False
        if any(b > a for a, b in zip(d, d[1:])):
            return False
    return True


def gap_decay_check(
    f: MapX,
    depth: int,
    policy: PrecisionPolicy | None = None,
    min_r2: float = 0.9,
    record: OrbitRecord | None = None,
) -> GapReport:
    """Fit log |[0, x2_n]| against n for the orbit points of f.

    Passes when the slope is negative and the decay is at least
    exponential: either the linear fit explains ``min_r2`` of the variance
    or the decay accelerates (superexponential).  ``loglog_slope`` is the
    slope of log|log|[0, x2_2n]|| over the later half of the even levels,
    which approaches log lambda_u in the degenerate regime.
    """
    if depth < 3:
        return GapReport([], None, None, None, None, False, "insufficient data: need depth >= 3")
    rec = record or orbit_points(f, depth, policy)
    gaps = [abs(to_mp(p[1])) for p in rec.points]
    if any(g == 0 for g in gaps):
        return GapReport(gaps, None, None, None, None, False, "a gap vanished at working precision")
    ys = [float(mpmath.log(g)) for g in gaps]
    xs = [float(n) for n in range(len(ys))]
    slope, icpt, r2 = _linfit(xs, ys)
    even = [(n // 2, y) for n, y in enumerate(ys) if n % 2 == 0 and y < 0]
    even = even[len(even) // 2:] if len(even) >= 6 else even
    ll = None
    if len(even) >= 3:
        ll, _, _ = _linfit([float(k) for k, _ in even], [math.log(-y) for _, y in even])
    fast = _accelerating(ys)
    ok = slope < 0 and (r2 >= min_r2 or fast)
    if ok:
        reason = ""
    elif slope >= 0:
        reason = "slope not negative"
    else:
        reason = f"r2 {r2:.3f} below {min_r2} and decay not accelerating"
    return GapReport(gaps, slope, icpt, r2, ll, ok, reason, fast)


def preimage_gap_ratios(rec: OrbitRecord) -> tuple:
    """Ratios comparing level-n gaps with the flat-interval preimages.

    First list: max(|[0, x3_n]|, |[x4_n, x3_{n-2}]|) / |[x3_n, x4_n]| for
    n >= 2.  Second: |[0, x2_n]| / |[x3_{n+1}, x4_{n+1}]|.
    """
    pts = rec.points
    first, second = [], []
    for n in range(2, len(pts)):
        x3, x4 = pts[n][2], pts[n][3]
        num_ = max(abs(x3), abs(pts[n - 2][2] - x4))
        first.append(num_ / abs(x4 - x3))
    for n in range(len(pts) - 1):
        second.append(abs(pts[n][1]) / abs(pts[n + 1][3] - pts[n + 1][2]))
    return first, second


# --------------------------------------------------------------------------
# box counting on the complement of the flat-interval preimages


@dataclass
class DimensionReport:
    depth: int
    estimate: float | None
    scales: list
    counts: list
    local_slopes: list
    gaps: int
    bridges: int
    window: str = "gaps"

    def rows(self) -> list:
        out = []
        for i, (e, c) in enumerate(zip(self.scales, self.counts)):
            ls = "" if i == 0 else f"{self.local_slopes[i - 1]:.10g}"
            out.append([str(self.depth), mpmath.nstr(e, 12), str(c), ls])
        return out


def _gaps(f: MapX, count: int, policy) -> list:
    """The intervals f^-i(U), 0 <= i < count, as sorted (left, right) pairs."""
    out = []
    a, b = f.x3, f.x4
    for i in range(count):
        out.append((a, b))
        if i + 1 < count:
            a, b = inverse_branch(f, a, policy), inverse_branch(f, b, policy)
    return sorted(out)


def _bridges(f: MapX, gaps: list) -> list:
    """Complementary closed arcs in the coordinate t = x - x1 on [0, 1 - x1)."""
    period = 1 - f.x1
    pts = []
    prev = num(0)
    for a, b in gaps:
        pts.append((prev, a - f.x1))
        prev = b - f.x1
    # the arc through x1 ~ 1 wraps around; split at 0 and keep both pieces
    pts.append((prev, period))
    return [(lo, hi) for lo, hi in pts if hi > lo]


def _box_count(bridges: list, eps) -> int:
    total, last = 0, -1
    for lo, hi in bridges:
        i0 = int(gmpy2.floor(lo / eps))
        i1 = int(gmpy2.floor(hi / eps))
        if i1 * eps == hi and i1 > i0:
            i1 -= 1
        i0 = max(i0, last + 1)
        if i1 >= i0:
            total += i1 - i0 + 1
            last = i1
    return total


def box_dimension(
    f: MapX,
    depth: int,
    scale_count: int = 12,
    policy: PrecisionPolicy | None = None,
) -> DimensionReport:
    """Box-counting estimate for the non-wandering set at a finite level.

    The level-``depth`` approximation removes the q_{depth+1} first
    preimages of the flat interval.  Dyadic boxes of the circle are counted
    from half the circle down to the widest remaining arc: below that scale
    every arc is resolved and the count only measures length.  The estimate
    is the least-squares slope of log count against log(1/scale).

    When that window holds fewer than four scales (no gap structure yet, as
    at depth 0) the count runs over ``scale_count`` scales below the widest
    arc instead, which measures the arcs themselves and gives a slope near 1.
    """
    policy = policy or PrecisionPolicy(bits=max(64, bits()))
    if depth < 0:
        raise DomainError("depth must be nonnegative")
    if scale_count < 2:
        raise DomainError("need at least two scales")
    with policy.activate():
        gaps = _gaps(f, fibonacci(depth + 1), policy)
        arcs = _bridges(f, gaps)
        period = 1 - f.x1
        widest = max(hi - lo for lo, hi in arcs)
        k_arc = int(gmpy2.floor(gmpy2.log2(period / widest)))
        ks = list(range(1, k_arc + 1))
        window = "gaps"
        if len(ks) < 4:
            ks = list(range(k_arc + 1, k_arc + scale_count + 1))
            window = "arcs"
        scales, counts = [], []
        for k in ks:
            eps = period / num(2) ** k
            scales.append(to_mp(eps))
            counts.append(_box_count(arcs, eps))
        lx = [k * math.log(2) for k in ks]
        ly = [math.log(c) for c in counts]
        local = [(ly[i + 1] - ly[i]) / math.log(2) for i in range(len(ly) - 1)]
        return DimensionReport(depth, _linfit(lx, ly)[0], scales, counts, local, len(gaps), len(arcs), window)
