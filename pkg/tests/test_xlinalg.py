import math

import numpy as np
import pytest
from mpmath import mp

from szego_lab.xlinalg import (
    PRECISION_BITS,
    CholeskyFactor,
    HermitianMatrix,
    NotPositiveDefinite,
    PrecisionTag,
    cholesky,
    constrained_max_leading,
    frobenius_residual,
    next_tag,
    schur_leading,
    solve_lower,
    solve_upper_conj,
)


def random_pd(rng, n, bits, shift=None):
    """Gram of random complex rows plus a diagonal shift, mirrored exactly."""
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    g = a @ a.conj().T
    cols = [[0.0] * n for _ in range(n)]
    for j in range(n):
        for k in range(j + 1):
            v = complex(g[j, k]) if j != k else g[j, j].real + (shift or n)
            cols[k][j] = v
            cols[j][k] = v.conjugate() if j != k else v
    return HermitianMatrix(cols, bits)


# ---------------------------------------------------------------- structure


def test_precision_tag_validation():
    PrecisionTag(128)
    with pytest.raises(ValueError):
        PrecisionTag(64)
    assert next_tag(53) == 128 and next_tag(256) == 512
    assert next_tag(512) is None


def test_hermitian_validation():
    HermitianMatrix.from_rows([[1.0, 2.0 + 1j], [2.0 - 1j, 5.0]])
    with pytest.raises(ValueError):
        HermitianMatrix.from_rows([[1.0, 2.0], [3.0, 1.0]])
    with pytest.raises(ValueError):
        HermitianMatrix([[1.0, 2.0]], 53)  # not square


def test_row_column_accessors():
    g = HermitianMatrix.from_rows([[2.0, 1j], [-1j, 3.0]], 128)
    assert g.entry(0, 1) == mp.mpc(1j)
    assert g.row(1) == (mp.mpc(-1j), mp.mpc(3.0))
    sub = g.principal_block(1)
    assert sub.dim == 1 and sub.entry(0, 0) == mp.mpc(2.0)


# ------------------------------------------------------------------ cholesky


def test_cholesky_identity_and_scalar():
    l3 = cholesky(HermitianMatrix.identity(3))
    for i in range(3):
        for j in range(3):
            want = 1.0 if i == j else 0.0
            assert l3.entry(i, j) == want
    l1 = cholesky(HermitianMatrix.from_rows([[4.0]]))
    assert l1.entry(0, 0) == 2.0


def test_cholesky_2x2_hand_oracle():
    # G = [[1, a], [conj(a), 1 + |a|^2]] factors as L = [[1, 0], [conj(a), 1]]
    a = 1.0 + 1.0j
    sq = (a * a.conjugate()).real  # exactly 2
    g = HermitianMatrix.from_rows([[1.0, a], [a.conjugate(), 1.0 + sq]])
    l = cholesky(g)
    assert l.entry(0, 0) == 1.0
    assert l.entry(1, 0) == mp.mpc(a.conjugate())
    assert l.entry(1, 1) == 1.0


def test_cholesky_residual_contract():
    rng = np.random.default_rng(5)
    for bits in (53, 128, 256):
        for n in (4, 12, 25):
            g = random_pd(rng, n, bits)
            res = frobenius_residual(g, cholesky(g))
            assert res <= n * mp.mpf(2) ** (-bits + 8)


def test_not_positive_definite_pivot_index():
    with pytest.raises(NotPositiveDefinite) as e:
        cholesky(HermitianMatrix.from_rows([[1.0, 2.0], [2.0, 1.0]]))
    assert e.value.pivot == 1
    with pytest.raises(NotPositiveDefinite) as e:
        cholesky(HermitianMatrix.from_rows([[-1.0]]))
    assert e.value.pivot == 0
    with pytest.raises(NotPositiveDefinite) as e:
        cholesky(HermitianMatrix.from_rows([[0.0]]))
    assert e.value.pivot == 0


def test_triangular_solves_roundtrip():
    rng = np.random.default_rng(8)
    g = random_pd(rng, 6, 128)
    l = cholesky(g)
    b = [complex(x, y) for x, y in rng.standard_normal((6, 2))]
    y = solve_lower(l, b)
    x = solve_upper_conj(l, y)
    # check G x = b by direct multiply
    with mp.workprec(128):
        for i in range(6):
            got = mp.fdot(g.row(i), x)
            assert abs(got - mp.mpc(b[i])) < mp.mpf(2) ** -100


# --------------------------------------------------------------- extremals


def test_schur_leading_examples():
    assert schur_leading(HermitianMatrix.identity(4)) == 1.0
    v = schur_leading(HermitianMatrix.from_rows([[1.3]]))
    assert abs(v - 1.0 / math.sqrt(1.3)) < 1e-15
    d = HermitianMatrix.from_rows([[1.0, 0.0], [0.0, 4.0]])
    assert abs(schur_leading(d) - 0.5) < 1e-15


def test_constrained_max_leading_examples():
    eta, wit = constrained_max_leading(HermitianMatrix.identity(2))
    assert abs(eta - 1.0) < 1e-15
    assert abs(wit[0]) < 1e-15 and abs(wit[1] - 1.0) < 1e-15
    eta, wit = constrained_max_leading(
        HermitianMatrix.from_rows([[1.0, 0.0], [0.0, 4.0]]))
    assert abs(eta - 0.5) < 1e-15
    assert abs(wit[1] - 0.5) < 1e-15


def test_route_equivalence_random():
    rng = np.random.default_rng(21)
    for bits in PRECISION_BITS[:3]:
        for n in (2, 7, 19, 40):
            g = random_pd(rng, n, bits)
            s = schur_leading(g)
            eta, _ = constrained_max_leading(g)
            assert abs(s - eta) <= mp.mpf(2) ** (-bits // 2) * eta


def test_route_equivalence_5x5_at_256():
    rng = np.random.default_rng(23)
    g = random_pd(rng, 5, 256)
    s = schur_leading(g)
    eta, _ = constrained_max_leading(g)
    assert abs(s - eta) < 1e-12 * eta


def test_witness_feasibility_and_optimality():
    rng = np.random.default_rng(29)
    g = random_pd(rng, 9, 256)
    eta, wit = constrained_max_leading(g)
    with mp.workprec(256):
        quad = mp.fdot((mp.fdot(g.row(i), wit) for i in range(9)),
                       wit, conjugate=True)
        assert abs(quad - 1) < mp.mpf(2) ** -128
        assert abs(wit[-1] - eta) < mp.mpf(2) ** -128
        # pushing the leading coordinate past eta must break feasibility
        bumped = list(wit)
        bumped[-1] = bumped[-1] + mp.mpf("1e-3")
        quad2 = mp.fdot((mp.fdot(g.row(i), bumped) for i in range(9)),
                        bumped, conjugate=True)
        assert mp.re(quad2) > 1


def test_schur_monotone_under_span_growth():
    # Gram of (u_1..u_m, p) for nested m: enlarging the span can only
    # shrink the distance from p to it, so the reciprocal grows
    rng = np.random.default_rng(31)
    d = 12
    vecs = rng.standard_normal((6, d)) + 1j * rng.standard_normal((6, d))
    pivot = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    prev = None
    for m in range(1, 7):
        basis = [vecs[i] for i in range(m)] + [pivot]
        n = len(basis)
        cols = [[0.0] * n for _ in range(n)]
        for j in range(n):
            for k in range(j + 1):
                v = complex(np.vdot(basis[k], basis[j]))  # <basis_j, basis_k>
                cols[k][j] = v
                cols[j][k] = v.conjugate()
        val = schur_leading(HermitianMatrix(cols, 128))
        if prev is not None:
            assert val >= prev * (1 - mp.mpf(2) ** -60)
        prev = val


def test_escalation_is_explicit():
    # a matrix that defeats 53-bit factorization but yields at 128:
    # Gram of nearly parallel vectors separated at the 2^-30 scale
    eps = mp.mpf(2) ** -30
    with mp.workprec(300):
        g11 = mp.mpf(1)
        g12 = 1 - eps
        g22 = (1 - eps) ** 2 + eps ** 4
    rows = [[g11, g12], [g12, g22]]
    with pytest.raises(NotPositiveDefinite):
        cholesky(HermitianMatrix.from_rows(rows, 53))
    bits = next_tag(53)
    l = cholesky(HermitianMatrix.from_rows(rows, bits))
    assert l.dim == 2
