"""Seeded invariant suites shared by the ``verify`` command.

Each check samples random inputs from a ``random.Random`` seeded by the
caller and returns a :class:`CheckResult`; nothing here raises on failure.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

import mpmath

from .diffeo import (
    IDENTITY,
    Diffeo,
    PrecisionPolicy,
    Qs,
    compose,
    deriv,
    exp_family,
    invert,
    zoom,
)
from .maps import MapX, alpha, alpha_s, eval_map, s_to_x, x_to_s
from .numeric import num
from .renorm import is_renormalizable, renorm_s, renorm_x
from .spectral import charpoly, eigen, polyval

__all__ = [
    "CheckResult",
    "diffeo_invariants",
    "map_invariants",
    "chart_commutation",
    "spectral_invariants",
    "sample_diffeos",
    "random_map",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": self.passed, "worst": self.worst, "detail": self.detail}


def sample_diffeos(rng: random.Random) -> list[Diffeo]:
    """A few nontrivial DAGs: primitives, zooms, compositions and nestings."""
    q = Qs(rng.uniform(0.05, 0.95), rng.choice([2, 3, 1.5]))
    e = exp_family(rng.uniform(-2, 2))
    a = rng.uniform(0.0, 0.5)
    b = rng.uniform(a + 0.1, 1.0)
    z = zoom(q, a, b)
    return [q, e, z, compose(e, z), zoom(compose(z, e), 0, rng.uniform(0.01, 0.9))]


def random_map(rng: random.Random, l1=None, l2=None) -> MapX:
    """A random point of the X simplex with 0 < x2 < x3."""
    x1 = -rng.uniform(0.05, 1.0)
    x3 = rng.uniform(0.05, 0.6)
    x4 = rng.uniform(x3 + 0.05, 0.98)
    x2 = rng.uniform(0.05, 0.95) * x3
    s = rng.uniform(0.05, 0.95)
    l1 = rng.choice([1, 2, 3, 1.5]) if l1 is None else l1
    l2 = rng.choice([1, 2, 3, 2.5]) if l2 is None else l2
    return MapX(x1, x2, x3, x4, s, l1, l2, exp_family(rng.uniform(-1, 1)), IDENTITY, exp_family(rng.uniform(-1, 1)))


def _rel(a, b):
    a, b = num(a), num(b)
    scale = max(abs(a), abs(b), num(2) ** -1000)
    return abs(a - b) / scale


def diffeo_invariants(rng: random.Random, policy: PrecisionPolicy, points: int = 20,
                      diffeos: list | None = None) -> list[CheckResult]:
    out = []
    with policy.activate():
        ds = diffeos if diffeos is not None else sample_diffeos(rng)
        tol = policy.tol * 2**8
        worst_end = num(0)
        for d in ds:
            worst_end = max(worst_end, abs(d(0)), abs(d(1) - 1))
        out.append(CheckResult("diffeo.endpoints", bool(worst_end <= tol), float(worst_end)))

        bad = 0
        for d in ds:
            prev = None
            for i in range(1025):
                v = d(num(i) / 1024)
                if prev is not None and not v > prev:
                    bad += 1
                prev = v
        out.append(CheckResult("diffeo.monotone_1024", bad == 0, float(bad)))

        worst = num(0)
        for d in ds:
            for _ in range(points):
                x = num(rng.uniform(0.001, 0.999))
                worst = max(worst, _rel(invert(d, d(x), policy), x))
        out.append(CheckResult("diffeo.invert_eval", bool(worst <= tol * 2**8), float(worst)))

        worst = num(0)
        h = num(2) ** -(policy.bits // 2)
        for d in ds:
            for _ in range(points):
                x = num(rng.uniform(0.01, 0.99))
                fd = (d(x + h) - d(x - h)) / (2 * h)
                worst = max(worst, _rel(deriv(d, x), fd))
        out.append(CheckResult("diffeo.deriv_fd", bool(worst <= 1e-6), float(worst)))

        worst = num(0)
        a, b, c = ds[0], ds[1], ds[2]
        for _ in range(points):
            x = num(rng.uniform(0, 1))
            worst = max(worst, abs(compose(compose(a, b), c)(x) - compose(a, compose(b, c))(x)))
            worst = max(worst, abs(zoom(a, 0, 1)(x) - a(x)))
            worst = max(worst, abs(zoom(IDENTITY, 0.2, 0.6)(x) - x))
        out.append(CheckResult("diffeo.zoom_compose", bool(worst <= tol), float(worst)))
    return out


def map_invariants(rng: random.Random, policy: PrecisionPolicy, count: int = 100) -> list[CheckResult]:
    out = []
    with policy.activate():
        worst_rt = worst_alpha = worst_pts = num(0)
        for _ in range(count):
            f = random_map(rng)
            g = s_to_x(x_to_s(f))
            for k in ("x1", "x2", "x3", "x4", "s"):
                worst_rt = max(worst_rt, _rel(getattr(g, k), getattr(f, k)))
            worst_alpha = max(worst_alpha, _rel(alpha(f), alpha_s(x_to_s(f))))
            for x, want in ((f.x3, 0), (f.x4, 0), (0, f.x1), (1, f.x2), (f.x1, f.x2)):
                worst_pts = max(worst_pts, abs(eval_map(f, x) - want))
        tol = num(10) ** -30 if policy.bits >= 128 else policy.tol * 2**8
        out.append(CheckResult("map.x_s_round_trip", bool(worst_rt <= tol), float(worst_rt)))
        out.append(CheckResult("map.alpha_charts", bool(worst_alpha <= tol), float(worst_alpha)))
        out.append(CheckResult("map.branch_points", bool(worst_pts <= policy.tol * 2**8), float(worst_pts)))
    return out


def chart_commutation(maps: list, policy: PrecisionPolicy, tol=1e-20) -> CheckResult:
    """x_to_s(renorm_x(f)) against renorm_s(x_to_s(f)) on the S values and s."""
    worst = num(0)
    with policy.activate():
        for f in maps:
            if not is_renormalizable(f):
                continue
            a = x_to_s(renorm_x(f, policy))
            b = renorm_s(x_to_s(f), policy)
            for u, v in zip(a.values + (a.s,), b.values + (b.s,)):
                worst = max(worst, _rel(u, v))
    return CheckResult("renorm.chart_commutation", bool(worst <= num(tol)), float(worst))


def spectral_invariants(rng: random.Random, policy: PrecisionPolicy, count: int = 50) -> list[CheckResult]:
    with policy.activate():
        return _spectral_invariants(rng, count)


def _spectral_invariants(rng, count):
    worst_root = worst_sym = worst_vec = mpmath.mpf(0)
    for _ in range(count):
        l1, l2 = rng.uniform(1, 5), rng.uniform(1, 5)
        sd = eigen(l1, l2)
        cp = charpoly(sd.L_even)
        for lam in (0, 1, sd.lambda_s, sd.lambda_u):
            worst_root = max(worst_root, abs(polyval(cp, lam)))
        worst_sym = max(worst_sym, abs(sd.lambda_u * sd.lambda_s - 1 / (sd.l1 * sd.l2)))
        for k, lam in sd.lambdas.items():
            r = sd.L_even * sd.E[k] - lam * sd.E[k]
            worst_vec = max(worst_vec, mpmath.norm(r))
    return [
        CheckResult("spectral.charpoly_roots", bool(worst_root <= 1e-12), float(worst_root)),
        CheckResult("spectral.product_sum", bool(worst_sym <= 1e-12), float(worst_sym)),
        CheckResult("spectral.eigen_residual", bool(worst_vec <= 1e-25), float(worst_vec)),
    ]
