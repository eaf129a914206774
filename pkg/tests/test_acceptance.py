"""The nine acceptance criteria, each at its stated tolerance and time budget.

Run ``pytest tests/test_acceptance.py`` to get one PASS/FAIL line per
criterion in the terminal summary.
"""
import math
import random
import time

import mpmath
import pytest

from flatrenorm import checks
from flatrenorm.diffeo import PrecisionPolicy
from flatrenorm.numeric import fmt, to_mp
from flatrenorm.oracle import box_dimension, fibonacci, gap_decay_check, return_time_law, verify_renorm
from flatrenorm.spectral import (
    build_matrices,
    charpoly,
    classify_geometry,
    decompose,
    eigen,
    eigenvalues,
    gamma_curve,
    polyval,
)


def _detail(request, text):
    request.node.user_properties.append(("detail", text))


def _w_norm(w):
    return math.sqrt(sum(float(v) ** 2 for v in w))


@pytest.mark.criterion(1, "spectral closed form")
def test_spectral_closed_form(request):
    rng = random.Random(20240501)
    t0 = time.perf_counter()
    worst_root = worst_prod = worst_sum = mpmath.mpf(0)
    with mpmath.workprec(128):
        for _ in range(1000):
            l1, l2 = mpmath.mpf(rng.uniform(1, 5)), mpmath.mpf(rng.uniform(1, 5))
            lu, ls = eigenvalues(l1, l2)
            cp = charpoly(build_matrices(l1, l2)["L_even"])
            for lam in (0, 1, ls, lu):
                worst_root = max(worst_root, abs(polyval(cp, lam)))
            worst_prod = max(worst_prod, abs(lu * ls - 1 / (l1 * l2)))
            worst_sum = max(worst_sum, abs(lu + ls - (1 + l1 + l2) / (l1 * l2)))
    elapsed = time.perf_counter() - t0
    _detail(request, f"root {fmt(worst_root, 3)}, product {fmt(worst_prod, 3)}, "
                     f"sum {fmt(worst_sum, 3)}, {elapsed:.2f}s")
    assert worst_root <= 1e-12
    assert worst_prod <= 1e-12
    assert worst_sum <= 1e-12
    assert elapsed < 5


@pytest.mark.criterion(2, "matrix product identity")
def test_matrix_products(request):
    rng = random.Random(7)
    t0 = time.perf_counter()
    worst_even = worst_odd = mpmath.mpf(0)
    step_differs = 0
    with mpmath.workprec(160):
        for _ in range(100):
            l1, l2 = mpmath.mpf(rng.uniform(1, 5)), mpmath.mpf(rng.uniform(1, 5))
            m = build_matrices(l1, l2)
            worst_even = max(worst_even, mpmath.mnorm(m["L1"] * m["L2"] - m["L_even"], 1))
            worst_odd = max(worst_odd, mpmath.mnorm(m["L2"] * m["L1"] - m["L_odd"], 1))
            # the step recursion's product L2 L1 is the similar partner, not L_even
            if mpmath.mnorm(m["L2"] * m["L1"] - m["L_even"], 1) > 1e-6:
                step_differs += 1
    elapsed = time.perf_counter() - t0
    _detail(request, f"even {fmt(worst_even, 3)}, odd {fmt(worst_odd, 3)}, "
                     f"L2L1 != L_even at {step_differs}/100, {elapsed:.2f}s")
    assert worst_even <= 1e-30
    assert worst_odd <= 1e-30
    assert step_differs == 100
    assert elapsed < 1


@pytest.mark.criterion(3, "Gamma anchor")
def test_gamma_anchor(request):
    t0 = time.perf_counter()
    with mpmath.workprec(128):
        (a, b), = gamma_curve([2])
        (_, none), = gamma_curve([1])
        grid = [1.25, 1.5, 2, 2.5, 3, 4, 5]
        roots = gamma_curve(grid)
        asym = mpmath.mpf(0)
        for a_, b_ in roots:
            (_, back), = gamma_curve([b_])
            asym = max(asym, abs(back - a_))
    elapsed = time.perf_counter() - t0
    _detail(request, f"l2* at 2 = {fmt(b, 15)}, symmetry {fmt(asym, 3)}, {elapsed:.2f}s")
    assert abs(b - 2) <= 1e-10
    assert none is None
    assert asym <= 1e-10
    assert elapsed < 5


@pytest.mark.criterion(4, "operator-oracle equivalence")
def test_operator_oracle(request, tuned22):
    t0 = time.perf_counter()
    pol = PrecisionPolicy(256)
    rep = verify_renorm(tuned22.map, m=100, tol=1e-20, policy=pol)
    comm = checks.chart_commutation(tuned22.trace.maps, pol, tol=1e-20)
    elapsed = time.perf_counter() - t0
    _detail(request, f"oracle {fmt(rep.max_err, 3)}, commutation {comm.worst:.3g} over "
                     f"{len(tuned22.trace.maps)} levels, {elapsed:.1f}s")
    assert rep.samples == 100 and rep.passed
    assert comm.passed
    assert elapsed < 60


@pytest.mark.criterion(5, "Q+ boundedness surrogate")
def test_q_plus_bounded(request, tuned33):
    trace = tuned33.trace
    assert trace.depth >= 10
    norms = [_w_norm(r.w) for r in trace.levels]
    alphas = [float(r.alpha) for r in trace.levels]
    last = norms[-4:]
    # |w_n| alternates with period two, so compare same-parity levels
    same_parity = [last[i + 2] / last[i] for i in range(2)]
    tail_min = min(alphas[-4:])
    spec = eigen(to_mp(3), to_mp(3))
    verdict = classify_geometry(decompose(trace, spec), spec)
    _detail(request, f"depth {trace.depth}, max|w| {max(norms):.4f}, last4 {[round(x, 3) for x in last]}, "
                     f"min alpha(last4) {tail_min:.3g} vs alpha_6 {alphas[6]:.3g}, {verdict}")
    assert all(r <= 1.05 for r in same_parity)
    assert max(last) <= 1.05 * max(norms[:-4])
    assert tail_min > 1e-3
    assert alphas[6] / 2 <= tail_min <= 2 * alphas[6]
    assert verdict == "Bounded"


@pytest.mark.criterion(6, "Q- degeneracy surrogate")
def test_q_minus_degenerate(request, tuned12):
    with tuned12.policy.activate():
        spec = eigen(to_mp(1), to_mp(2))
        rep = decompose(tuned12.trace, spec)
        lu = spec.lambda_u
        ratios = rep.ratios[-3:]
        ratio_err = max(abs(r / lu - 1) for r in ratios)
        cos_last = abs(rep.cosines[-1])
        # slope of log|log alpha_2n| against n over the later half of the even levels
        alphas = [to_mp(tuned12.trace.levels[n].alpha) for n in rep.even_levels]
        ks = list(range(len(alphas)))[len(alphas) // 2:]
        ys = [mpmath.log(abs(mpmath.log(alphas[k]))) for k in ks]
        mk, my = sum(ks) / len(ks), sum(ys) / len(ys)
        slope = sum((k - mk) * (y - my) for k, y in zip(ks, ys)) / sum((k - mk) ** 2 for k in ks)
        slope_err = abs(slope / mpmath.log(lu) - 1)
    _detail(request, f"{rep.verdict}, ratio err {float(ratio_err):.3f}, |cos| {float(cos_last):.6f}, "
                     f"G_u {fmt(rep.G_u, 4)}, loglog slope {fmt(slope, 4)} vs {fmt(mpmath.log(lu), 4)}")
    assert rep.verdict == "Degenerate"
    assert ratio_err <= 0.25
    assert cos_last >= 0.99
    assert rep.G_u < 0
    assert slope_err <= 0.10


@pytest.mark.criterion(7, "dimension contrast")
def test_dimension_contrast(request, tuned33, tuned12):
    with tuned33.policy.activate():
        d33 = box_dimension(tuned33.map, 8, policy=tuned33.policy).estimate
    with tuned12.policy.activate():
        d12 = [box_dimension(tuned12.map, d, policy=tuned12.policy).estimate for d in range(4, 9)]
    _detail(request, f"(3,3) {d33:.4f} vs (1,2) {d12[-1]:.4f}; (1,2) depths 4..8 {[round(x, 4) for x in d12]}")
    assert d33 > d12[-1]
    # Fibonacci pairing makes consecutive depths share a value; require no increase
    # and an overall strict decrease
    assert all(b <= a for a, b in zip(d12, d12[1:]))
    assert d12[-1] < d12[0]


@pytest.mark.criterion(8, "combinatorics")
def test_combinatorics(request, tuned22):
    t0 = time.perf_counter()
    rep = return_time_law(tuned22.map, tuned22.trace, samples=20, policy=tuned22.policy)
    gaps = gap_decay_check(tuned22.map, 12, tuned22.policy)
    elapsed = time.perf_counter() - t0
    exact = all(obs == sorted(set(exp)) for obs, exp in zip(rep.observed, rep.expected))
    _detail(request, f"levels 0..{rep.levels[-1]} return times {[e[1] for e in rep.expected]}, "
                     f"gap slope {gaps.slope:.3f} (r2 {gaps.r2:.3f}), {elapsed:.1f}s")
    assert tuned22.trace.depth == 12
    assert exact and rep.passed
    assert [e[0] for e in rep.expected] == [fibonacci(n) for n in range(12)]
    assert max(rep.max_err) <= 1e-20
    assert gaps.slope < 0 and gaps.passed
    assert elapsed < 300


@pytest.mark.criterion(9, "diffeo and coordinate micro-suites")
def test_micro_suites(request, tuned22):
    t0 = time.perf_counter()
    pol = PrecisionPolicy()
    rng = random.Random(11)
    results = []
    results += checks.diffeo_invariants(rng, pol, points=100)
    # every diffeo produced during a renormalization run
    run_diffeos = [d for g in tuned22.trace.maps[:6] for d in (g.phi, g.phil, g.phir)]
    results += checks.diffeo_invariants(rng, pol, points=5, diffeos=run_diffeos)
    results += checks.map_invariants(rng, pol, count=1000)
    results += checks.spectral_invariants(rng, pol, count=50)
    results.append(checks.chart_commutation([checks.random_map(rng) for _ in range(100)], pol))
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    _detail(request, f"{len(results) - len(failed)}/{len(results)} checks pass, {elapsed:.1f}s")
    assert not failed, failed
    assert elapsed < 30


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
