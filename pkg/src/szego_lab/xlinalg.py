"""Extended-precision Hermitian linear algebra for Gram-matrix certificates.

Dense column-stored Hermitian matrices at a fixed mantissa-bit tag, a
left-looking Cholesky factorization, and the two routes to the constrained
leading-coefficient extremal problem: the Schur complement of the pivoted
last coordinate (via the leading principal sub-block) and the explicit
maximizer built from the full inverse applied to the last basis vector.
Both routes are kept deliberately distinct so their agreement is a check,
not a tautology.

Precision never escalates silently: a failed pivot raises
NotPositiveDefinite and the caller decides whether to retry higher.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Sequence

from mpmath import mp

__all__ = [
    "PRECISION_BITS",
    "PrecisionTag",
    "next_tag",
    "HermitianMatrix",
    "CholeskyFactor",
    "NotPositiveDefinite",
    "cholesky",
    "solve_lower",
    "solve_upper_conj",
    "schur_leading",
    "constrained_max_leading",
    "frobenius_residual",
]

PRECISION_BITS = (53, 128, 256, 512)

# mpmath's working precision is process-global; serialize precision-scoped
# regions so threaded certificate sweeps stay correct.
_MP_LOCK = threading.RLock()


@dataclass(frozen=True)
class PrecisionTag:
    bits: int

    def __post_init__(self):
        if self.bits not in PRECISION_BITS:
            raise ValueError(f"bits must be one of {PRECISION_BITS}")


def next_tag(bits: int) -> int | None:
    """The next escalation step above bits, or None at the top."""
    for b in PRECISION_BITS:
        if b > bits:
            return b
    return None


class NotPositiveDefinite(ArithmeticError):
    """Pivot <= 0 during factorization; carries the failing pivot index."""

    def __init__(self, pivot: int, value=None):
        self.pivot = pivot
        self.value = value
        super().__init__(f"nonpositive pivot at index {pivot}" +
                         (f" (value {mp.nstr(value, 8)})" if value is not None else ""))


def _round_to(x, bits: int):
    with mp.workprec(bits):
        return +mp.mpc(x)


class HermitianMatrix:
    """Hermitian matrix in dense column storage at a precision tag.

    columns[k][j] is the (j, k) entry.  Construction verifies Hermitian
    symmetry to one unit in the last place of the tag.
    """

    __slots__ = ("dim", "columns", "bits")

    def __init__(self, columns: Sequence[Sequence], bits: int = 53, _skip_check: bool = False):
        PrecisionTag(bits)
        with _MP_LOCK:
            cols = tuple(tuple(_round_to(v, bits) for v in col) for col in columns)
            n = len(cols)
            if any(len(col) != n for col in cols):
                raise ValueError("matrix must be square")
            if not _skip_check:
                with mp.workprec(bits):
                    ulp = mp.mpf(2) ** (1 - bits)
                    for k in range(n):
                        for j in range(k, n):
                            a = cols[k][j]
                            b = mp.conj(cols[j][k])
                            scale = max(abs(a), abs(b), mp.mpf(1))
                            if abs(a - b) > ulp * scale:
                                raise ValueError(
                                    f"not Hermitian at ({j},{k}): {a} vs conj {b}")
        self.dim = n
        self.columns = cols
        self.bits = bits

    def entry(self, j: int, k: int):
        return self.columns[k][j]

    def row(self, j: int) -> tuple:
        return tuple(self.columns[k][j] for k in range(self.dim))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], bits: int = 53) -> "HermitianMatrix":
        n = len(rows)
        return cls([[rows[j][k] for j in range(n)] for k in range(n)], bits)

    @classmethod
    def identity(cls, n: int, bits: int = 53) -> "HermitianMatrix":
        return cls([[1 if j == k else 0 for j in range(n)] for k in range(n)],
                   bits, _skip_check=True)

    def principal_block(self, m: int) -> "HermitianMatrix":
        """Leading m-by-m principal sub-block (shares the tag)."""
        out = HermitianMatrix.__new__(HermitianMatrix)
        out.dim = m
        out.columns = tuple(col[:m] for col in self.columns[:m])
        out.bits = self.bits
        return out


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor; rows[i] holds entries (i, 0..i)."""

    rows: tuple
    bits: int

    @property
    def dim(self) -> int:
        return len(self.rows)

    def entry(self, i: int, j: int):
        if j > i:
            return mp.mpc(0)
        return self.rows[i][j]


def cholesky(g: HermitianMatrix) -> CholeskyFactor:
    """Left-looking Cholesky L with L L* = G.

    Raises NotPositiveDefinite (with the pivot index) on a nonpositive
    diagonal pivot; that signal drives the caller-side precision escalation
    protocol.
    """
    n = g.dim
    with _MP_LOCK, mp.workprec(g.bits):
        rows: list[list] = []
        for i in range(n):
            row = []
            for j in range(i):
                s = mp.fdot(row[:j], rows[j][:j], conjugate=True) if j else mp.mpc(0)
                row.append((g.entry(i, j) - s) / rows[j][j])
            s = mp.fdot(row, row, conjugate=True) if row else mp.mpf(0)
            pivot = mp.re(g.entry(i, i) - s)
            if pivot <= 0:
                raise NotPositiveDefinite(i, pivot)
            row.append(mp.sqrt(pivot))
            rows.append(row)
        return CholeskyFactor(tuple(tuple(r) for r in rows), g.bits)


def solve_lower(l: CholeskyFactor, b: Sequence) -> list:
    """Forward substitution for L y = b."""
    with _MP_LOCK, mp.workprec(l.bits):
        y: list = []
        for i in range(l.dim):
            s = mp.fdot(l.rows[i][:i], y) if i else mp.mpc(0)
            y.append((mp.mpc(b[i]) - s) / l.rows[i][i])
        return y


def solve_upper_conj(l: CholeskyFactor, y: Sequence) -> list:
    """Back substitution for L* x = y."""
    n = l.dim
    with _MP_LOCK, mp.workprec(l.bits):
        x: list = [mp.mpc(0)] * n
        for i in range(n - 1, -1, -1):
            s = mp.fdot((mp.conj(l.rows[k][i]) for k in range(i + 1, n)),
                        (x[k] for k in range(i + 1, n)))
            x[i] = (mp.mpc(y[i]) - s) / mp.conj(l.rows[i][i])
        return x


def schur_leading(g: HermitianMatrix):
    """1/sqrt of the Schur complement of the last coordinate.

    The leading (N-1)-block is factored and the coupling column forward
    solved; the complement G_NN - |y|^2 is the squared distance from the
    pivot to the span of the others.  Returns an mpf.
    """
    n = g.dim
    with _MP_LOCK, mp.workprec(g.bits):
        if n == 1:
            s = mp.re(g.entry(0, 0))
        else:
            sub = cholesky(g.principal_block(n - 1))
            coupling = [g.entry(j, n - 1) for j in range(n - 1)]
            y = solve_lower(sub, coupling)
            s = mp.re(g.entry(n - 1, n - 1)) - mp.re(mp.fdot(y, y, conjugate=True))
        if s <= 0:
            raise NotPositiveDefinite(n - 1, s)
        return 1 / mp.sqrt(s)


def constrained_max_leading(g: HermitianMatrix):
    """Maximize |v_N| subject to v* G v <= 1.

    Returns (eta, witness): eta = sqrt((G^-1)_NN) and the maximizer
    v = G^-1 e_N / eta, so v_N = eta and v* G v = 1.
    """
    n = g.dim
    l = cholesky(g)
    with _MP_LOCK, mp.workprec(g.bits):
        e_n = [mp.mpc(0)] * n
        e_n[n - 1] = mp.mpc(1)
        y = solve_lower(l, e_n)
        x = solve_upper_conj(l, y)
        w = mp.re(x[n - 1])
        if w <= 0:
            raise NotPositiveDefinite(n - 1, w)
        eta = mp.sqrt(w)
        witness = tuple(xi / eta for xi in x)
        return eta, witness


def frobenius_residual(g: HermitianMatrix, l: CholeskyFactor):
    """||L L* - G||_F / ||G||_F, measured 64 bits above the working tag."""
    n = g.dim
    with _MP_LOCK, mp.workprec(g.bits + 64):
        num = mp.mpf(0)
        den = mp.mpf(0)
        for i in range(n):
            for j in range(n):
                m = min(i, j) + 1
                rec = mp.fdot(l.rows[i][:m], l.rows[j][:m], conjugate=True)
                diff = rec - g.entry(i, j)
                num += abs(diff) ** 2
                den += abs(g.entry(i, j)) ** 2
        return mp.sqrt(num) / mp.sqrt(den)
