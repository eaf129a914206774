import csv
import io

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatrenorm.diffeo import PrecisionPolicy, exp_family
from flatrenorm.errors import BracketError, NotRenormalizable
from flatrenorm.maps import MapX, x_to_s
from flatrenorm.numeric import num, to_mp
from flatrenorm.oracle import verify_renorm
from flatrenorm.renorm import (
    TRACE_COLUMNS,
    is_renormalizable,
    iterate,
    renorm_s,
    renorm_x,
    trace_to_csv,
    tune_parameter,
)

POLICY = PrecisionPolicy()

# (2,2), identity diffeos, bracket [0, 0.1] on x2, depth 8: frozen bisection result
TUNED_22_DEPTH8 = "0.0736573557835072251220864814058586489409"


@pytest.fixture(autouse=True)
def working_precision():
    with POLICY.activate():
        yield


def example(**kw):
    base = dict(x1="-0.2", x2="0.3", x3="0.5", x4="0.7", s="0.5", l1=2, l2=3)
    base.update(kw)
    return MapX(**base)


def test_is_renormalizable():
    assert is_renormalizable(example())
    assert not is_renormalizable(example(x2="0.5"))
    assert not is_renormalizable(example(x2="-0.1"))


def _qs_inverse(s, ell, y):
    return ((y * (1 - s**ell) + s**ell) ** (mpmath.mpf(1) / ell) - s) / (1 - s)


def test_renorm_x_scalars_against_formulas():
    f = example()
    g = renorm_x(f, POLICY)
    with mpmath.workprec(256):
        x1, x2, x3, x4, s = (mpmath.mpf(v) for v in ("-0.2", "0.3", "0.5", "0.7", "0.5"))
        S1 = (x3 - x2) / x3
        want = {
            "x1": x2 / x1,
            "x2": S1**2,
            "x3": 1 - _qs_inverse(s, 3, (x4 - x2) / (1 - x2)),
            "x4": 1 - _qs_inverse(s, 3, (x3 - x2) / (1 - x2)),
            "s": S1,
        }
        for k, v in want.items():
            assert abs(to_mp(getattr(g, k)) - v) <= 1e-70, k
    assert g.x1 < 0 and g.x3 < g.x4
    # exponents swap
    assert (g.l1, g.l2) == (f.l2, f.l1)


def test_renorm_rejects():
    with pytest.raises(NotRenormalizable):
        renorm_x(example(x2="0.6"), POLICY)


def test_renorm_s_scalars():
    f = example()
    g = renorm_s(x_to_s(f), POLICY)
    rx = renorm_x(f, POLICY)
    assert abs(g.S5 - rx.s ** (rx.l2 - 1)) <= 1e-70
    assert g.S4 > 0


def test_renorm_with_diffeos_matches_first_return():
    # nontrivial phi, phil, phir exercise every diffeo update of the operator
    f = MapX("-0.3", "0.03", "0.1", "0.9", "0.5", 2, 3, exp_family(num("0.4")), exp_family(num("-0.3")),
             exp_family(num("0.6")))
    f = tune_parameter(f, 6, POLICY, bracket=(0, 0.1)).map
    g = f
    for _ in range(4):
        rep = verify_renorm(g, m=40, tol=1e-20, policy=POLICY)
        assert rep.passed, rep.max_err
        g = renorm_x(g, POLICY)


def test_iterate_non_renormalizable():
    tr = iterate(example(x2="0.6"), 5, POLICY)
    assert tr.depth == 0
    assert tr.failure.level == 0 and tr.failure.side == "overshoot"
    tr = iterate(example(x2="-0.1"), 5, POLICY)
    assert tr.failure.side == "undershoot"


def test_iterate_depth_zero():
    tr = iterate(example(), 0, POLICY)
    assert tr.depth == 0 and tr.failure is None


def test_trace_csv():
    tr = iterate(example(), 1, POLICY)
    rows = list(csv.reader(io.StringIO(trace_to_csv(tr))))
    assert rows[0] == list(TRACE_COLUMNS)
    assert TRACE_COLUMNS[0] == "n" and TRACE_COLUMNS[-1] == "renormalizable"
    assert len(rows) == 2
    assert float(rows[1][TRACE_COLUMNS.index("alpha")]) == pytest.approx(0.5 / 0.7)


def test_tune_depth_zero_returns_template():
    f = example()
    assert tune_parameter(f, 0, POLICY).map is f


def test_tune_depth_one():
    res = tune_parameter(MapX(-0.3, 0.03, 0.1, 0.9, 0.5, 2, 2), 1, POLICY, bracket=(0, 0.1))
    assert iterate(res.map, 1, POLICY).depth == 1


def test_tune_regression_fixture():
    res = tune_parameter(MapX(-0.3, 0.03, 0.1, 0.9, 0.5, 2, 2), 8, POLICY, bracket=(0, 0.1))
    width = res.bracket[1] - res.bracket[0]
    assert abs(res.value - num(TUNED_22_DEPTH8)) <= width
    again = tune_parameter(MapX(-0.3, 0.03, 0.1, 0.9, 0.5, 2, 2), 8, POLICY, bracket=(0, 0.1))
    assert again.value == res.value
    assert res.value == (res.bracket[0] + res.bracket[1]) / 2
    assert iterate(res.map, 8, POLICY).depth == 8


def test_tune_bad_bracket():
    with pytest.raises(BracketError):
        tune_parameter(MapX(-0.3, 0.03, 0.1, 0.9, 0.5, 2, 2), 6, POLICY, bracket=(0.09, 0.1))


def test_trace_invariants(tuned33):
    tr = tuned33.trace
    for r in tr.levels:
        assert 0 < r.alpha < 1
        assert all(mpmath.isfinite(to_mp(v)) for v in r.w)


def test_parity_swap():
    tr = iterate(tune_parameter(MapX(-0.3, 0.03, 0.1, 0.9, 0.5, 2, 3), 4, POLICY, bracket=(0, 0.1)).map, 4, POLICY)
    assert [(int(r.l1), int(r.l2)) for r in tr.levels] == [(2, 3), (3, 2), (2, 3), (3, 2)]


def test_bounded_level_ratios(tuned33):
    with tuned33.policy.activate():
        lv = tuned33.trace.levels
        a = [to_mp(r.S[0] * r.S[1] * r.S[2] / r.alpha) for r in lv]
        b = [to_mp(r.l2 * r.S[0] ** r.l1 / r.S[1]) for r in lv]
    assert max(a) / min(a) < 2
    assert max(b) / min(b) < 2


def test_distortion_law(tuned33):
    lv = tuned33.trace.levels
    ratios = [float(lv[n].dist_phil) / float(lv[n - 1].alpha) ** (1 / 3) for n in range(2, len(lv))]
    assert max(ratios) / min(ratios) < 20
    assert max(ratios) < 10


def test_chart_commutation_on_tuned_run(tuned33):
    with tuned33.policy.activate():
        for f in tuned33.trace.maps[:8]:
            a = x_to_s(renorm_x(f, tuned33.policy))
            b = renorm_s(x_to_s(f), tuned33.policy)
            for u, v in zip(a.values, b.values):
                assert abs(u - v) <= 1e-20 * abs(v)


@st.composite
def renormalizable_maps(draw):
    x1 = -draw(st.floats(0.05, 1.0))
    x3 = draw(st.floats(0.05, 0.6))
    x4 = draw(st.floats(x3 + 0.05, 0.98))
    x2 = draw(st.floats(0.05, 0.95)) * x3
    s = draw(st.floats(0.05, 0.95))
    l1, l2 = draw(st.sampled_from([1, 2, 3, 1.5])), draw(st.sampled_from([1, 2, 3, 2.5]))
    phis = [exp_family(draw(st.floats(-1, 1))) for _ in range(3)]
    return MapX(x1, x2, x3, x4, s, l1, l2, *phis)


@settings(max_examples=100, deadline=None)
@given(renormalizable_maps())
def test_chart_commutation_property(f):
    with POLICY.activate():
        a = x_to_s(renorm_x(f, POLICY))
        b = renorm_s(x_to_s(f), POLICY)
        for u, v in zip(a.values + (a.s,), b.values + (b.s,)):
            assert abs(u - v) <= 1e-20 * max(abs(v), 1e-300)
        g = renorm_x(f, POLICY)
        assert g.x1 < 0 and g.x3 < g.x4


@settings(max_examples=30, deadline=None)
@given(renormalizable_maps())
def test_renormalized_diffeos_monotone(f):
    with POLICY.activate():
        g = renorm_x(f, POLICY)
        for d in (g.phi, g.phil, g.phir):
            vals = [d(num(i) / 1024) for i in range(1025)]
            assert all(b > a for a, b in zip(vals, vals[1:]))
            assert abs(d(0)) <= POLICY.tol and abs(d(1) - 1) <= POLICY.tol
