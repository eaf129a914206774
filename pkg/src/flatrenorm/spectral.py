"""Linearized renormalization: the L matrices, their spectrum and the curve Gamma.

The scaling vector w_n = (log S2, log S3, log S4, log S5) of R^n f obeys
w_{n+1} = L(l) w_n + O(1), where l is the left exponent of the level-n map.
Two steps therefore act through L2 L1 on even levels and L1 L2 on odd ones.
The displayed "even" matrix of the literature is L1 L2; it is similar to
L2 L1 (same spectrum, eigenvectors transported by L1), so ``decompose``
computes both and keeps whichever one the trace data actually follow.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import mpmath
from mpmath import mp, mpf

from .errors import DomainError, IllConditionedBasis, NotApplicable
from .numeric import to_mp

__all__ = [
    "SpectralData",
    "GeometryReport",
    "HorizonPolicy",
    "l_matrix",
    "build_matrices",
    "eigenvalues",
    "lambda_u",
    "eigen",
    "charpoly",
    "classify_quadrant",
    "gamma_curve",
    "decompose",
    "solve_singular",
    "estimate_Gu",
    "classify_geometry",
    "linear_growth_fit",
    "direction_cosine",
]


def _check_exponents(l1, l2):
    l1, l2 = mpf(l1), mpf(l2)
    if not (l1 >= 1 and l2 >= 1):
        raise DomainError(f"critical exponents must be >= 1, got ({l1}, {l2})")
    return l1, l2


def l_matrix(ell) -> mpmath.matrix:
    """One-step linearization for a level whose left exponent is ell."""
    e = mpf(ell)
    return mpmath.matrix(
        [
            [1 + 1 / e, 1, 0, -1],
            [-1 / e, -1, 0, 1],
            [1, 0, -1, 0],
            [1 - 1 / e, 0, 0, 0],
        ]
    )


def build_matrices(l1, l2) -> dict:
    """L1, L2 and the two displayed two-step matrices, entry by entry."""
    l1, l2 = _check_exponents(l1, l2)
    a, b = 1 / l1, 1 / l2
    ab = a * b
    even = mpmath.matrix(
        [
            [a + b + ab, a, 0, -a],
            [1 - a - ab, 1 - a, 0, a - 1],
            [b, 1, 1, -1],
            [1 - a - ab + b, 1 - a, 0, a - 1],
        ]
    )
    odd = mpmath.matrix(
        [
            [b + a + ab, b, 0, -b],
            [1 - b - ab, 1 - b, 0, b - 1],
            [a, 1, 1, -1],
            [1 - b - ab + a, 1 - b, 0, b - 1],
        ]
    )
    return {"L1": l_matrix(l1), "L2": l_matrix(l2), "L_even": even, "L_odd": odd}


def _disc(l1, l2):
    d = l1 * l1 + l2 * l2 + 2 * l1 + 2 * l2 - 2 * l1 * l2 + 1
    if not d > 0:
        raise DomainError("discriminant must be positive for exponents >= 1")
    return d


def eigenvalues(l1, l2) -> tuple:
    """(lambda_u, lambda_s) in closed form."""
    l1, l2 = _check_exponents(l1, l2)
    r = mpmath.sqrt(_disc(l1, l2))
    c = 2 * l1 * l2
    return (1 + l1 + l2 + r) / c, (1 + l1 + l2 - r) / c


def lambda_u(l1, l2):
    return eigenvalues(l1, l2)[0]


def charpoly(M: mpmath.matrix) -> list:
    """Monic characteristic polynomial coefficients [1, c1, ..., cn] (Faddeev-LeVerrier)."""
    n = M.rows
    coeffs = [mpf(1)]
    Mk = mpmath.zeros(n, n)
    eye = mpmath.eye(n)
    for k in range(1, n + 1):
        Mk = M * (Mk + coeffs[-1] * eye)
        c = -sum(Mk[i, i] for i in range(n)) / k
        coeffs.append(c)
    return coeffs


def polyval(coeffs: list, x):
    acc = mpf(0)
    for c in coeffs:
        acc = acc * x + c
    return acc


def null_vector(A: mpmath.matrix, rel_tol=None) -> mpmath.matrix:
    """A unit vector spanning the (assumed one-dimensional) kernel of A.

    Gaussian elimination with full pivoting; the column without a usable
    pivot is the free variable.
    """
    n = A.rows
    M = [[mpf(A[i, j]) for j in range(n)] for i in range(n)]
    scale = max((abs(v) for row in M for v in row), default=mpf(1)) or mpf(1)
    tol = rel_tol if rel_tol is not None else mpf(2) ** (-mp.prec // 2)
    cols = list(range(n))
    rank = 0
    for r in range(n):
        best, bi, bj = mpf(0), -1, -1
        for i in range(r, n):
            for j in range(r, n):
                if abs(M[i][j]) > best:
                    best, bi, bj = abs(M[i][j]), i, j
        if best <= tol * scale:
            break
        M[r], M[bi] = M[bi], M[r]
        for row in M:
            row[r], row[bj] = row[bj], row[r]
        cols[r], cols[bj] = cols[bj], cols[r]
        for i in range(r + 1, n):
            f = M[i][r] / M[r][r]
            if f:
                for j in range(r, n):
                    M[i][j] -= f * M[r][j]
        rank += 1
    if rank == n:
        raise DomainError("matrix is nonsingular; no kernel vector")
    # free variable: first column after the pivots; others zero
    z = [mpf(0)] * n
    z[rank] = mpf(1)
    for i in range(rank - 1, -1, -1):
        acc = sum(M[i][j] * z[j] for j in range(i + 1, n))
        z[i] = -acc / M[i][i]
    v = [mpf(0)] * n
    for k in range(n):
        v[cols[k]] = z[k]
    norm = mpmath.sqrt(sum(x * x for x in v))
    return mpmath.matrix([x / norm for x in v])


def solve_singular(A: mpmath.matrix, b=None) -> tuple:
    """Full-pivot elimination for a possibly singular A.

    Returns (x, null) where x solves A x = b with free variables zero (None
    if b is omitted or the system is inconsistent) and null is a list of
    null-space basis vectors.
    """
    n = A.rows
    rhs = [mpf(0)] * n if b is None else [mpf(b[i]) for i in range(n)]
    M = [[mpf(A[i, j]) for j in range(n)] + [rhs[i]] for i in range(n)]
    scale = max((abs(v) for row in M for v in row[:n]), default=mpf(1)) or mpf(1)
    tol = mpf(2) ** (-mp.prec // 2) * scale
    cols = list(range(n))
    rank = 0
    for r in range(n):
        best, bi, bj = mpf(0), -1, -1
        for i in range(r, n):
            for j in range(r, n):
                if abs(M[i][j]) > best:
                    best, bi, bj = abs(M[i][j]), i, j
        if best <= tol:
            break
        M[r], M[bi] = M[bi], M[r]
        for row in M:
            row[r], row[bj] = row[bj], row[r]
        cols[r], cols[bj] = cols[bj], cols[r]
        for i in range(r + 1, n):
            f = M[i][r] / M[r][r]
            if f:
                for j in range(r, n + 1):
                    M[i][j] -= f * M[r][j]
        rank += 1

    def back(last, free):
        z = [mpf(0)] * n
        for k, v in free.items():
            z[k] = v
        for i in range(rank - 1, -1, -1):
            acc = last[i] - sum(M[i][j] * z[j] for j in range(i + 1, n))
            z[i] = acc / M[i][i]
        x = [mpf(0)] * n
        for k in range(n):
            x[cols[k]] = z[k]
        return mpmath.matrix(x)

    null = [back([mpf(0)] * n, {k: mpf(1)}) for k in range(rank, n)]
    x = None
    if b is not None and all(abs(M[i][n]) <= tol * max(1, mpmath.norm(mpmath.matrix(rhs))) for i in range(rank, n)):
        x = back([M[i][n] for i in range(n)], {})
    return x, null


def _orient(v: mpmath.matrix) -> mpmath.matrix:
    # e2 + e3 > 0 when that sum is nonzero, else the first nonzero entry positive
    key = v[0] + v[1]
    tiny = mpf(2) ** (-mp.prec // 2)
    if abs(key) <= tiny:
        key = next((x for x in v if abs(x) > tiny), mpf(1))
    return v if key > 0 else -v


def _unit(v):
    return v / mpmath.sqrt(sum(x * x for x in v))


@dataclass
class SpectralData:
    l1: mpf
    l2: mpf
    L1: mpmath.matrix
    L2: mpmath.matrix
    L_even: mpmath.matrix
    L_odd: mpmath.matrix
    lambda_u: mpf
    lambda_s: mpf
    # eigenvectors of the displayed L_even, keyed "u", "s", "1", "0"
    E: dict
    # L1 applied to each E (eigenvectors of L_odd)
    L1E: dict
    # eigenvectors of the even-step matrix L2 L1 implied by the step recursion
    E_step: dict
    quadrant: str
    gamma_distance: mpf

    @property
    def lambdas(self) -> dict:
        return {"u": self.lambda_u, "s": self.lambda_s, "1": mpf(1), "0": mpf(0)}

    def basis(self, which: str = "displayed") -> list:
        src = self.E if which == "displayed" else self.E_step
        return [src[k] for k in ("u", "s", "1", "0")]

    def to_dict(self, digits: int = 20) -> dict:
        def num(x):
            return mpmath.nstr(x, digits)

        def mat(M):
            return [[num(M[i, j]) for j in range(M.cols)] for i in range(M.rows)]

        def vecs(d):
            return {k: [num(x) for x in v] for k, v in d.items()}

        return {
            "l1": num(self.l1),
            "l2": num(self.l2),
            "lambda_u": num(self.lambda_u),
            "lambda_s": num(self.lambda_s),
            "lambda_1": "1",
            "lambda_0": "0",
            "quadrant": self.quadrant,
            "gamma_distance": num(self.gamma_distance),
            "matrices": {
                "L1": mat(self.L1),
                "L2": mat(self.L2),
                "L_even": mat(self.L_even),
                "L_odd": mat(self.L_odd),
            },
            "eigenvectors_L_even": vecs(self.E),
            "eigenvectors_L_odd": vecs(self.L1E),
            "eigenvectors_step": vecs(self.E_step),
        }


def _eigvecs(M, lams: dict) -> dict:
    n = M.rows
    out = {}
    for key, lam in lams.items():
        A = M - lam * mpmath.eye(n)
        out[key] = _orient(null_vector(A))
    return out


def eigen(l1, l2, gamma_tol=1e-12) -> SpectralData:
    l1, l2 = _check_exponents(l1, l2)
    mats = build_matrices(l1, l2)
    lu, ls = eigenvalues(l1, l2)
    lams = {"u": lu, "s": ls, "1": mpf(1), "0": mpf(0)}
    E = _eigvecs(mats["L_even"], lams)
    L1E = {k: mats["L1"] * v for k, v in E.items()}
    E_step = _eigvecs(mats["L2"] * mats["L1"], lams)
    return SpectralData(
        l1,
        l2,
        mats["L1"],
        mats["L2"],
        mats["L_even"],
        mats["L_odd"],
        lu,
        ls,
        E,
        L1E,
        E_step,
        classify_quadrant(l1, l2, gamma_tol),
        lu - 1,
    )


def classify_quadrant(l1, l2, tol=1e-12) -> str:
    """'Q-' where lambda_u > 1, 'Q+' where lambda_u < 1, 'Gamma' within tol of 1."""
    lu = lambda_u(l1, l2)
    if abs(lu - 1) <= tol:
        return "Gamma"
    return "Q-" if lu > 1 else "Q+"


def gamma_curve(grid, tol=1e-12, l2_max=1e12) -> list:
    """For each l1, the l2 with lambda_u(l1, l2) = 1, or None when there is none.

    lambda_u decreases in l2 from a value above 1 at l2 = 1 toward 1/l1, so
    a root exists exactly when l1 > 1; it is bracketed by doubling.
    """
    out = []
    for a in grid:
        a = mpf(a)
        if a < 1:
            raise DomainError("grid must lie in [1, inf)")
        lo = mpf(1)
        if lambda_u(a, lo) <= 1:
            out.append((a, lo if lambda_u(a, lo) == 1 else None))
            continue
        hi = mpf(2)
        while lambda_u(a, hi) > 1 and hi < l2_max:
            lo, hi = hi, hi * 2
        if lambda_u(a, hi) > 1:
            out.append((a, None))
            continue
        while hi - lo > tol * max(1, lo):
            mid = (lo + hi) / 2
            if lambda_u(a, mid) > 1:
                lo = mid
            else:
                hi = mid
        out.append((a, (lo + hi) / 2))
    return out


# --------------------------------------------------------------------------
# decomposition of a trace


@dataclass
class HorizonPolicy:
    K: float = 50.0
    k: int = 3
    band: float = 0.25


@dataclass
class GeometryReport:
    matrix: str  # "step" (L2 L1) or "displayed" (L_even)
    residuals: dict
    even_levels: list
    C_u: list
    C_s: list
    C_1: list
    C_0: list
    odd_levels: list = field(default_factory=list)
    odd_coords: list = field(default_factory=list)
    cosines: list = field(default_factory=list)
    odd_cosines: list = field(default_factory=list)
    max_w: mpf | None = None
    G_u: mpf | None = None
    G_u_err: mpf | None = None
    linear_G: mpf | None = None
    verdict: str = "Undetermined"
    ratios: list = field(default_factory=list)
    condition: mpf | None = None
    basis_labels: list = field(default_factory=lambda: ["u", "s", "1", "0"])

    def to_dict(self, digits: int = 12) -> dict:
        def num(x):
            return None if x is None else mpmath.nstr(x, digits)

        return {
            "matrix": self.matrix,
            "residuals": {k: num(v) for k, v in self.residuals.items()},
            "even_levels": self.even_levels,
            "C_u": [num(x) for x in self.C_u],
            "C_s": [num(x) for x in self.C_s],
            "C_1": [num(x) for x in self.C_1],
            "C_0": [num(x) for x in self.C_0],
            "ratios": [num(x) for x in self.ratios],
            "cosines": [num(x) for x in self.cosines],
            "odd_cosines": [num(x) for x in self.odd_cosines],
            "max_w": num(self.max_w),
            "G_u": num(self.G_u),
            "G_u_err": num(self.G_u_err),
            "linear_G": num(self.linear_G),
            "verdict": self.verdict,
            "basis_condition": num(self.condition),
            "basis": self.basis_labels,
        }


def _mat_from_cols(cols: list) -> mpmath.matrix:
    n = len(cols)
    M = mpmath.matrix(n, n)
    for j, c in enumerate(cols):
        for i in range(n):
            M[i, j] = c[i]
    return M


def _cond(M) -> mpf:
    try:
        return mpmath.cond(M)
    except (ZeroDivisionError, TypeError):
        # mpmath's LU signals an exactly singular matrix either way
        return mpmath.inf


def direction_cosine(w, v) -> mpf:
    w = [mpf(x) for x in w]
    v = [mpf(x) for x in v]
    nw = mpmath.sqrt(sum(x * x for x in w))
    nv = mpmath.sqrt(sum(x * x for x in v))
    if nw == 0 or nv == 0:
        return mpf(0)
    return sum(a * b for a, b in zip(w, v)) / (nw * nv)


def _even_step_matrices(spec: SpectralData) -> dict:
    # the trace alternates exponents; even levels carry the original (l1, l2)
    return {"step": spec.L2 * spec.L1, "displayed": spec.L_even}


def decompose(trace, spec: SpectralData, horizon: HorizonPolicy | None = None,
              max_cond=1e12, matrix: str | None = None) -> GeometryReport:
    """Coordinates of w_{2n} in the eigenbasis of the even two-step matrix.

    ``trace`` is a RenormTrace or a plain list of w vectors (level 0 first).
    ``matrix`` forces "step" or "displayed"; by default the one with the
    smaller two-step residual on the data is used.
    """
    rows = [r.w for r in trace.levels] if hasattr(trace, "levels") else trace
    ws = [[to_mp(x) for x in w] for w in rows]
    if not ws:
        raise DomainError("decomposition needs at least one level")
    if matrix not in (None, "step", "displayed"):
        raise DomainError(f"unknown matrix choice {matrix!r}")
    mats = _even_step_matrices(spec)
    even = list(range(0, len(ws), 2))
    residuals = {}
    for name, M in mats.items():
        worst = mpf(0)
        for n in even:
            if n + 2 < len(ws):
                r = mpmath.matrix(ws[n + 2]) - M * mpmath.matrix(ws[n])
                worst = max(worst, mpmath.norm(r))
        residuals[name] = worst
    if matrix is not None:
        choice = matrix
    elif len(even) >= 2 and residuals["displayed"] < residuals["step"]:
        choice = "displayed"
    else:
        choice = "step"
    basis = spec.basis(choice)
    labels = ["u", "s", "1", "0"]
    if spec.quadrant == "Gamma":
        # lambda_u = 1 collides with the fixed eigenvalue 1.  Either the
        # eigenspace is two dimensional (complete it with a second null
        # vector of M - I) or it is a Jordan block (use a generalized
        # eigenvector J with (M - I) J = E_u; C_u then grows linearly)
        M = mats[choice]
        J, null = solve_singular(M - mpmath.eye(M.rows), basis[0])
        eu = basis[0]
        second = None
        for v in null:
            w = v - (mpmath.fdot(v, eu) / mpmath.fdot(eu, eu)) * eu
            if mpmath.norm(w) > mpf(2) ** (-mp.prec // 4) * mpmath.norm(v):
                second = _unit(w)
                break
        if second is not None:
            basis = [eu, basis[1], second, basis[3]]
            labels = ["u", "s", "1'", "0"]
        elif J is not None:
            basis = [eu, basis[1], J, basis[3]]
            labels = ["u", "s", "J", "0"]
    B = _mat_from_cols(basis)
    cond = _cond(B)
    if not cond < max_cond:
        raise IllConditionedBasis(f"eigenbasis condition number {mpmath.nstr(cond, 5)}")
    coords = [mpmath.lu_solve(B, mpmath.matrix(ws[n])) for n in even]
    report = GeometryReport(
        matrix=choice,
        residuals=residuals,
        even_levels=even,
        C_u=[c[0] for c in coords],
        C_s=[c[1] for c in coords],
        C_1=[c[2] for c in coords],
        C_0=[c[3] for c in coords],
        condition=cond,
        basis_labels=labels,
    )
    report.cosines = [direction_cosine(ws[n], basis[0]) for n in even]
    # odd levels against the transported basis
    transport = spec.L2 if choice == "displayed" else spec.L1
    odd_basis = [_unit(transport * v) if mpmath.norm(transport * v) > 0 else v for v in basis]
    report.odd_levels = list(range(1, len(ws), 2))
    report.odd_cosines = [direction_cosine(ws[n], odd_basis[0]) for n in report.odd_levels]
    Bo = _mat_from_cols(odd_basis)
    if _cond(Bo) < max_cond:
        report.odd_coords = [list(mpmath.lu_solve(Bo, mpmath.matrix(ws[n]))) for n in report.odd_levels]
    report.max_w = max(mpmath.norm(mpmath.matrix(w)) for w in ws)
    report.ratios = [
        report.C_u[i + 1] / report.C_u[i] if report.C_u[i] != 0 else mpmath.inf
        for i in range(len(report.C_u) - 1)
    ]
    lu = spec.lambda_u
    if lu > 1 and len(report.C_u) >= 4:
        report.G_u, report.G_u_err = estimate_Gu(report.C_u, lu)
    if abs(lu - 1) <= mpf("1e-12") and len(report.C_u) >= 3:
        report.linear_G = linear_growth_fit(report.C_u)
    report.verdict = classify_geometry(report, spec, horizon)
    return report


def estimate_Gu(C_u, lam) -> tuple:
    """Limit of C_u(n) / lambda^n with a geometric-tail error bar.

    ``C_u`` is the even-level sequence (or a GeometryReport).  With
    c_n = C_u(n)/lambda^n and d = c_N - c_{N-1}, a correction decaying like
    lambda^-n gives the extrapolation c_N + d/(lambda - 1).
    """
    if hasattr(C_u, "C_u"):
        C_u = C_u.C_u
    lam = mpf(lam)
    if not lam > 1:
        raise NotApplicable("G_u is only defined when lambda_u > 1")
    if len(C_u) < 4:
        raise NotApplicable("G_u needs at least four even levels")
    c = [mpf(x) / lam**n for n, x in enumerate(C_u)]
    d = c[-1] - c[-2]
    return c[-1] + d / (lam - 1), abs(d) / (lam - 1)


def linear_growth_fit(C_u) -> mpf:
    """Least-squares G in C_u(n) ~ -G n + b (the lambda_u = 1 boundary law)."""
    n = len(C_u)
    xs = [mpf(i) for i in range(n)]
    ys = [mpf(v) for v in C_u]
    mx, my = sum(xs) / n, sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return -sxy / sxx


def classify_geometry(report: GeometryReport, spec: SpectralData,
                      horizon: HorizonPolicy | None = None) -> str:
    """Finite-horizon surrogate for bounded versus degenerate geometry.

    The size of the unstable coordinate is |C_u|; its sign depends on the
    eigenvector orientation and on G_u, which is negative in the degenerate
    regime.
    """
    h = horizon or HorizonPolicy()
    mags = [abs(x) for x in report.C_u]
    if len(mags) < h.k + 1:
        return "Undetermined"
    lu = spec.lambda_u
    tail = mags[-(h.k + 1):]
    ratios = [tail[i + 1] / tail[i] for i in range(h.k) if tail[i] != 0]
    growing = len(ratios) == h.k and all(abs(r / lu - 1) <= h.band for r in ratios)
    if lu >= 1 and tail[-1] > h.K and growing:
        return "Degenerate"
    if max(mags) <= h.K:
        return "Bounded"
    return "Undetermined"
