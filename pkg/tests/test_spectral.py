import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatrenorm.errors import DomainError, IllConditionedBasis, NotApplicable
from flatrenorm.spectral import (
    HorizonPolicy,
    build_matrices,
    charpoly,
    classify_geometry,
    classify_quadrant,
    decompose,
    eigen,
    estimate_Gu,
    gamma_curve,
    l_matrix,
    polyval,
    solve_singular,
)

mp = mpmath.mp


@pytest.fixture(autouse=True)
def working_precision():
    with mpmath.workprec(256):
        yield


def root(n):
    return mpmath.sqrt(mpmath.mpf(n))


def test_l_matrix_first_row():
    assert [l_matrix(1)[0, j] for j in range(4)] == [2, 1, 0, -1]


def test_l_even_third_column_of_first_row():
    for l1, l2 in ((1, 1), (2, 3), (4.5, 1.25)):
        assert build_matrices(l1, l2)["L_even"][0, 2] == 0


def test_products_match_displayed():
    m = build_matrices(mpmath.mpf("1.7"), mpmath.mpf("3.2"))
    assert mpmath.mnorm(m["L1"] * m["L2"] - m["L_even"], 1) <= 1e-70
    assert mpmath.mnorm(m["L2"] * m["L1"] - m["L_odd"], 1) <= 1e-70
    # the step recursion's product is not the displayed even matrix
    assert mpmath.mnorm(m["L2"] * m["L1"] - m["L_even"], 1) > 0.1


def test_eigenvalues_closed_form():
    sd = eigen(1, 1)
    assert abs(sd.lambda_u - (3 + root(5)) / 2) <= 1e-70
    assert abs(sd.lambda_s - (3 - root(5)) / 2) <= 1e-70
    sd = eigen(2, 2)
    assert sd.lambda_u == 1 and sd.lambda_s == mpmath.mpf(1) / 4
    assert abs(eigen(1, 2).lambda_u - (1 + root(2) / 2)) <= 1e-70
    assert abs(eigen(1.5, 1.5).lambda_u - (4 + root(7)) / 4.5) <= 1e-70


def test_quadrants():
    assert classify_quadrant(3, 3) == "Q+"
    assert abs(eigen(3, 3).lambda_u - 0.589) < 1e-3
    assert classify_quadrant(1.5, 1.5) == "Q-"
    assert classify_quadrant(2, 2) == "Gamma"


def test_gamma_curve_examples():
    (a, b), = gamma_curve([2])
    assert abs(b - 2) <= 1e-10
    assert gamma_curve([1])[0][1] is None
    with pytest.raises(DomainError):
        gamma_curve([0.5])


def test_gamma_symmetry():
    for a, b in gamma_curve([1.5, 3, 4]):
        (_, back), = gamma_curve([b])
        assert abs(back - a) <= 1e-10


def test_domain():
    with pytest.raises(DomainError):
        eigen(0.5, 2)


def test_e1_and_orientation():
    sd = eigen(mpmath.mpf("2.5"), mpmath.mpf("1.7"))
    assert [sd.E["1"][i] for i in range(4)] == [0, 0, 1, 0]
    eu = sd.E["u"]
    assert abs(mpmath.norm(eu) - 1) <= 1e-70
    assert eu[0] + eu[1] > 0


def test_eu_zero_on_unit_exponent_line():
    # l1 = 1 kills the last row of L1, so the last component of E_u vanishes
    assert eigen(1, 2).E["u"][3] == 0


def test_decompose_synthetic():
    sd = eigen(mpmath.mpf("1.5"), mpmath.mpf("2.5"))
    E = sd.E
    rep = decompose([list(E["1"])] * 5, sd, matrix="displayed")
    for c in rep.C_u + rep.C_s + rep.C_0:
        assert abs(c) <= 1e-60
    assert all(abs(c - 1) <= 1e-60 for c in rep.C_1)
    w = 2 * E["u"] + 3 * E["0"]
    rep = decompose([list(w)] * 3, sd, matrix="displayed")
    got = (rep.C_u[0], rep.C_s[0], rep.C_1[0], rep.C_0[0])
    for g, want in zip(got, (2, 0, 0, 3)):
        assert abs(g - want) <= 1e-60


def test_decompose_picks_matching_matrix():
    sd = eigen(mpmath.mpf("1.5"), mpmath.mpf("2.5"))
    w = mpmath.matrix([1, 2, -1, 0.5])
    seq = [w]
    for _ in range(4):
        seq.append(sd.L1 * seq[-1] if len(seq) % 2 else sd.L2 * seq[-1])
    assert decompose([list(v) for v in seq], sd).matrix == "step"
    with pytest.raises(DomainError):
        decompose([list(w)], sd, matrix="bogus")


def test_decompose_ill_conditioned():
    sd = eigen(mpmath.mpf("1.5"), mpmath.mpf("2.5"))
    with pytest.raises(IllConditionedBasis):
        decompose([[1, 2, 3, 4]] * 3, sd, max_cond=1)


def test_gamma_basis_completion():
    # on Gamma the eigenvalue 1 has a two-dimensional eigenspace at (2,2)
    sd = eigen(2, 2)
    M = sd.L2 * sd.L1
    x, null = solve_singular(M - mpmath.eye(4), sd.E_step["u"])
    assert x is None and len(null) == 2
    rep = decompose([[-1, 1, 2, 0.5]] * 6, sd)
    assert rep.basis_labels == ["u", "s", "1'", "0"]
    assert rep.condition < 1e3
    assert rep.linear_G is not None


def test_solve_singular_particular():
    A = mpmath.matrix([[1, 1, 0], [0, 0, 0], [2, 2, 1]])
    x, null = solve_singular(A, [3, 0, 7])
    assert mpmath.norm(A * x - mpmath.matrix([3, 0, 7])) <= 1e-70
    assert len(null) == 1 and mpmath.norm(A * null[0]) <= 1e-70


def test_estimate_gu_synthetic():
    lam = 1 + root(2) / 2
    g, err = estimate_Gu([-3 * lam**n for n in range(6)], lam)
    assert abs(g + 3) <= 1e-60 and err <= 1e-60
    g, err = estimate_Gu([-3 * lam**n + 1 for n in range(6)], lam)
    assert abs(g + 3) <= err + 1e-60
    with pytest.raises(NotApplicable):
        estimate_Gu([1, 2, 3, 4], 0.5)
    with pytest.raises(NotApplicable):
        estimate_Gu([1, 2, 3], 2)


def test_classify_short_trace():
    sd = eigen(3, 3)
    rep = decompose([[-1, 1, 2, 0.5]], sd)
    assert classify_geometry(rep, sd) == "Undetermined"


def test_classify_synthetic_degenerate_and_bounded():
    sd = eigen(1, 2)
    lam = sd.lambda_u
    ws = []
    for n in range(12):
        k = n // 2
        v = -100 * lam**k * sd.E_step["u"] + sd.E_step["s"]
        ws.append(list(v if n % 2 == 0 else sd.L1 * v))
    rep = decompose(ws, sd)
    assert rep.verdict == "Degenerate"
    # under the threshold for the whole horizon counts as bounded
    assert classify_geometry(rep, sd, HorizonPolicy(K=1e9)) == "Bounded"
    # above the threshold but growing at the wrong rate
    fast = [list(-100 * mpmath.mpf(3) ** (n // 2) * sd.E_step["u"]) for n in range(12)]
    assert decompose(fast, sd).verdict == "Undetermined"
    sd33 = eigen(3, 3)
    rep = decompose([[-1, 1, 2, 0.5]] * 10, sd33)
    assert rep.verdict == "Bounded"


def test_bounded_q_plus_run(tuned33):
    sd = eigen(3, 3)
    rep = decompose(tuned33.trace, sd)
    assert rep.verdict == "Bounded"
    assert mpmath.isfinite(rep.max_w)


def test_degenerate_q_minus_run(tuned12):
    with tuned12.policy.activate():
        sd = eigen(1, 2)
        rep = decompose(tuned12.trace, sd)
    assert rep.matrix == "step"
    assert rep.verdict == "Degenerate"
    # C_s and C_0 stay bounded while C_u grows geometrically
    assert max(abs(c) for c in rep.C_s + rep.C_0) < 10
    assert abs(rep.C_u[-1]) > 10 * abs(rep.C_u[1])
    assert abs(rep.ratios[-1] / sd.lambda_u - 1) <= 0.05
    assert rep.G_u < 0
    # odd levels line up with the transported unstable direction
    assert abs(rep.odd_cosines[-1]) >= 0.99


# --------------------------------------------------------------------------
# property tests

exponents = st.floats(1, 5)


@settings(max_examples=100, deadline=None)
@given(exponents, exponents)
def test_spectral_identities(l1, l2):
    with mpmath.workprec(256):
        sd = eigen(l1, l2)
        l1, l2 = sd.l1, sd.l2
        lu, ls = sd.lambda_u, sd.lambda_s
        assert 0 < ls < 1 and lu > 0
        assert abs(lu * ls - 1 / (l1 * l2)) <= 1e-30
        assert abs(lu + ls - (1 + l1 + l2) / (l1 * l2)) <= 1e-30
        cp = charpoly(sd.L_even)
        for lam in (0, 1, ls, lu):
            assert abs(polyval(cp, lam)) <= 1e-12
        tr = sum(sd.L_even[i, i] for i in range(4))
        assert abs(tr - (1 + 1 / l1 + 1 / l2 + 1 / (l1 * l2))) <= 1e-30
        assert abs(tr - (1 + lu + ls)) <= 1e-30
        assert abs(mpmath.det(sd.L_even)) <= 1e-12
        for k, lam in sd.lambdas.items():
            assert mpmath.norm(sd.L_even * sd.E[k] - lam * sd.E[k]) <= 1e-25
        # restriction to span{E_u, E_s}
        B = mpmath.matrix(4, 2)
        for i in range(4):
            B[i, 0], B[i, 1] = sd.E["u"][i], sd.E["s"][i]
        R = mpmath.inverse(B.T * B) * B.T * sd.L_even * B
        assert abs(mpmath.det(R) - 1 / (l1 * l2)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 5), st.floats(1.01, 5))
def test_eu_components_nonzero(l1, l2):
    with mpmath.workprec(256):
        if classify_quadrant(l1, l2, 1e-6) == "Gamma":
            return
        eu = eigen(l1, l2).E["u"]
        assert all(abs(eu[i]) > 1e-40 for i in range(4))


@settings(max_examples=100, deadline=None)
@given(exponents, exponents)
def test_quadrant_symmetry(a, b):
    assert classify_quadrant(a, b) == classify_quadrant(b, a)
