"""Cohomology of symmetric products of a genus g surface and Lefschetz numbers.

H*(S^d Sigma) is modelled as Z[U] (x) Lambda* H^1 modulo monomials U^i (x) gamma_S
with i + |S| > d.  U has degree 2, each gamma_s degree 1.  A mapping class acts
through its symplectic matrix A on H^1 (gamma_s -> sum_t A[t][s] gamma_t) and
fixes U.
"""

from __future__ import annotations

import cmath
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import least_squares

from .errors import PreconditionError


@dataclass(frozen=True, order=True)
class MacdonaldBasisElement:
    u_power: int
    subset: tuple[int, ...]

    @property
    def degree(self) -> int:
        return 2 * self.u_power + len(self.subset)


def _check_gd(g: int, d: int) -> None:
    if g < 1 or d < 0:
        raise PreconditionError("need g >= 1 and d >= 0")


def basis(g: int, d: int, k: int) -> list[MacdonaldBasisElement]:
    """Monomials of degree k, U-power major then lexicographic in the subset."""
    _check_gd(g, d)
    if not 0 <= k <= 2 * d:
        raise PreconditionError("degree must lie in [0, 2d]")
    out = []
    for i in range(k // 2 + 1):
        j = k - 2 * i
        if i + j > d or j > 2 * g:
            continue
        for s in combinations(range(1, 2 * g + 1), j):
            out.append(MacdonaldBasisElement(i, s))
    return out


def betti(g: int, d: int) -> list[int]:
    return [len(basis(g, d, k)) for k in range(2 * d + 1)]


def euler(g: int, d: int) -> int:
    return sum((-1) ** k * b for k, b in enumerate(betti(g, d)))


def betti_generating(g: int, dmax: int) -> dict[tuple[int, int], int]:
    """Coefficients [q^d t^k] of prod (1+qt)^{2g} / ((1-q)(1-qt^2)), d <= dmax."""
    # polynomials as dicts {(d, k): coeff}, truncated at q^dmax
    def mul(p1, p2):
        out = {}
        for (d1, k1), c1 in p1.items():
            for (d2, k2), c2 in p2.items():
                if d1 + d2 <= dmax:
                    key = (d1 + d2, k1 + k2)
                    out[key] = out.get(key, 0) + c1 * c2
        return out

    poly = {(0, 0): 1}
    for _ in range(2 * g):
        poly = mul(poly, {(0, 0): 1, (1, 1): 1})
    poly = mul(poly, {(n, 0): 1 for n in range(dmax + 1)})
    poly = mul(poly, {(n, 2 * n): 1 for n in range(dmax + 1)})
    return poly


def euler_generating(g: int, d: int) -> int:
    """[t^d] (1-t)^{2g-2}."""
    n = 2 * g - 2
    return (-1) ** d * math.comb(n, d) if d <= n else 0


def _sorted_sign(seq) -> int:
    inv = 0
    for x in range(len(seq)):
        for y in range(x + 1, len(seq)):
            if seq[x] > seq[y]:
                inv += 1
    return -1 if inv % 2 else 1


def cup(e1: MacdonaldBasisElement, e2: MacdonaldBasisElement, g: int, d: int):
    """Product as (sign, element) or None when it vanishes."""
    _check_gd(g, d)
    if set(e1.subset) & set(e2.subset):
        return None
    i = e1.u_power + e2.u_power
    merged = e1.subset + e2.subset
    if i + len(merged) > d:
        return None
    return _sorted_sign(merged), MacdonaldBasisElement(i, tuple(sorted(merged)))


def cup_vectors(x: dict, y: dict, g: int, d: int) -> dict:
    """Cup product of linear combinations {element: coeff}."""
    out: dict = {}
    for e1, c1 in x.items():
        for e2, c2 in y.items():
            r = cup(e1, e2, g, d)
            if r is not None:
                s, e = r
                out[e] = out.get(e, 0) + s * c1 * c2
    return {e: c for e, c in out.items() if c}


# --- exact integer linear algebra ----------------------------------------

def bareiss_det(m) -> int:
    """Fraction-free Gaussian elimination determinant of an integer matrix."""
    a = [list(row) for row in m]
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k] != 0:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = a[k][k]
        rowk = a[k]
        for i in range(k + 1, n):
            rowi = a[i]
            aik = rowi[k]
            for j in range(k + 1, n):
                rowi[j] = (rowi[j] * akk - aik * rowk[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


def _as_int_matrix(A) -> list[list[int]]:
    rows = [[int(v) for v in row] for row in (A.tolist() if hasattr(A, "tolist") else A)]
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise PreconditionError("matrix must be square")
    return rows


def j0(g: int) -> list[list[int]]:
    """Standard skew form in the basis (a1, b1, a2, b2, ...)."""
    n = 2 * g
    j = [[0] * n for _ in range(n)]
    for i in range(g):
        j[2 * i][2 * i + 1] = 1
        j[2 * i + 1][2 * i] = -1
    return j


def matmul(A, B) -> list[list[int]]:
    bt = list(zip(*B))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in A]


def transpose(A) -> list[list[int]]:
    return [list(r) for r in zip(*A)]


def is_symplectic(A, g: int) -> bool:
    A = _as_int_matrix(A)
    if len(A) != 2 * g:
        return False
    J = j0(g)
    return matmul(matmul(transpose(A), J), A) == J


def _check_symplectic(A, g: int) -> list[list[int]]:
    A = _as_int_matrix(A)
    if not is_symplectic(A, g):
        raise PreconditionError("matrix is not symplectic for the standard form")
    return A


def compound(A, j: int) -> list[list[int]]:
    """j-th exterior power: entry (T, S) is the minor with rows T, columns S."""
    n = len(A)
    subs = list(combinations(range(n), j))
    return [[bareiss_det([[A[r][c] for c in S] for r in T]) for S in subs] for T in subs]


def _element_index(g: int, d: int):
    out = {}
    for k in range(2 * d + 1):
        for idx, e in enumerate(basis(g, d, k)):
            out[e] = (k, idx)
    return out


def induced_map(A, g: int, d: int) -> dict[int, list[list[int]]]:
    """Matrix of the induced map on H^k for each k, acting on column vectors."""
    A = _check_symplectic(A, g)
    comps = {}
    out = {}
    for k in range(2 * d + 1):
        elts = basis(g, d, k)
        pos = {e: n for n, e in enumerate(elts)}
        mat = [[0] * len(elts) for _ in elts]
        for e in elts:
            j = len(e.subset)
            if j not in comps:
                comps[j] = (compound(A, j), {s: n for n, s in enumerate(combinations(range(2 * g), j))})
            cm, sidx = comps[j]
            col = sidx[tuple(s - 1 for s in e.subset)]
            for T, row in sidx.items():
                v = cm[row][col]
                if v:
                    mat[pos[MacdonaldBasisElement(e.u_power, tuple(t + 1 for t in T))]][pos[e]] = v
        out[k] = mat
    return out


def apply_induced(maps: dict, x: dict, g: int, d: int) -> dict:
    """Apply induced_map output to a combination {element: coeff}."""
    out: dict = {}
    for e, c in x.items():
        k = e.degree
        elts = basis(g, d, k)
        col = elts.index(e)
        for r, row in enumerate(maps[k]):
            if row[col]:
                out[elts[r]] = out.get(elts[r], 0) + row[col] * c
    return {e: c for e, c in out.items() if c}


def _principal_minor_sums(A, jmax: int) -> list[int]:
    """Traces of the exterior powers 0..jmax (sums of principal minors)."""
    n = len(A)
    out = []
    for j in range(jmax + 1):
        if j > n:
            out.append(0)
            continue
        out.append(sum(bareiss_det([[A[r][c] for c in S] for r in S]) for S in combinations(range(n), j)))
    return out


def lefschetz(A, g: int, d: int) -> int:
    """Alternating sum of traces of the induced map over degrees 0..2d."""
    _check_gd(g, d)
    A = _check_symplectic(A, g)
    tr = _principal_minor_sums(A, min(d, 2 * g))
    total = 0
    # the block of U^i gamma_S has trace tr_{|S|} and sign (-1)^{|S|}
    for j in range(min(d, 2 * g) + 1):
        total += (-1) ** j * tr[j] * (d - j + 1)
    return total


def lefschetz_by_blocks(A, g: int, d: int) -> int:
    """Same number from the full induced matrices (slow, used for cross-checks)."""
    maps = induced_map(A, g, d)
    return sum((-1) ** k * sum(m[i][i] for i in range(len(m))) for k, m in maps.items())


def charpoly_reversed(A) -> list[Fraction]:
    """Coefficients of det(I - tA) by Faddeev-LeVerrier in exact arithmetic."""
    A = [[Fraction(v) for v in row] for row in _as_int_matrix(A)]
    n = len(A)
    coeffs = [Fraction(1)]
    M = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        AM = [[sum(A[i][l] * M[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        c = -sum(AM[i][i] for i in range(n)) / k
        coeffs.append(c)
        M = [[AM[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def lefschetz_series(A, dmax: int) -> list[int]:
    """[t^d] det(I - tA)/(1 - t)^2 for d = 0..dmax."""
    p = charpoly_reversed(A)
    out = []
    for d in range(dmax + 1):
        s = sum(p[j] * (d - j + 1) for j in range(min(d, len(p) - 1) + 1))
        if s.denominator != 1:
            raise ArithmeticError("non-integral generating coefficient")
        out.append(int(s))
    return out


@dataclass(frozen=True)
class SeriesCheck:
    ok: bool
    direct: tuple
    series: tuple
    first_mismatch: int | None

    def __bool__(self) -> bool:
        return self.ok


def lefschetz_series_check(A, g: int, dmax: int) -> SeriesCheck:
    if dmax > 6:
        raise PreconditionError("dmax must be <= 6")
    direct = tuple(lefschetz(A, g, d) for d in range(dmax + 1))
    series = tuple(lefschetz_series(A, dmax))
    bad = next((d for d in range(dmax + 1) if direct[d] != series[d]), None)
    return SeriesCheck(bad is None, direct, series, bad)


def _transvection(g: int, v: list[int], sign: int) -> list[list[int]]:
    # x -> x + sign * omega(v, x) v with omega(v, x) = v^T J0 x
    n = 2 * g
    J = j0(g)
    vj = [sum(v[l] * J[l][c] for l in range(n)) for c in range(n)]
    return [[int(r == c) + sign * v[r] * vj[c] for c in range(n)] for r in range(n)]


def _generator_vectors(g: int) -> list[list[int]]:
    n = 2 * g
    vecs = []
    for i in range(n):
        e = [0] * n
        e[i] = 1
        vecs.append(e)
    for i in range(g - 1):
        for off in (0, 1):
            e = [0] * n
            e[2 * i + off] = 1
            e[2 * i + 2 + off] = -1
            vecs.append(e)
    return vecs


def random_symplectic(g: int, rng: random.Random, length: int | None = None) -> list[list[int]]:
    """Product of random transvections along standard vectors (exactly symplectic)."""
    if length is None:
        length = 4 * g
    gens = _generator_vectors(g)
    M = [[int(i == j) for j in range(2 * g)] for i in range(2 * g)]
    for _ in range(length):
        v = rng.choice(gens)
        M = matmul(_transvection(g, v, rng.choice((1, -1))), M)
    return M


def nielsen_triple(A, g: int) -> tuple[int, int, int, bool]:
    l1 = lefschetz(A, g, 1)
    l2 = lefschetz(A, g, 2)
    lk = lefschetz(A, g, 2 * g - 2)
    return l1, l2, lk, any(v != 0 for v in (l1, l2, lk))


def pi2_chern(g: int, d: int) -> int:
    return d - g + 1


def monotone_range(g: int, d: int) -> bool:
    """Degrees for which the coefficient argument applies: d >= g-1 or d < (g+1)/2."""
    return d >= g - 1 or 2 * d < g + 1


# --- the hyperbolic local model on S^2 C ----------------------------------

@dataclass(frozen=True)
class LocalModelParams:
    a: float

    def __post_init__(self):
        if not self.a > 1:
            raise PreconditionError("local model needs a > 1")


def s2_local_model(params: LocalModelParams, s1: complex, s2: complex) -> tuple[complex, complex]:
    a = params.a
    c = math.sqrt(a * a - 1)
    t1 = a * s1 + c * s1.conjugate()
    t2 = (a * a * s2 + (a * a - 1) * s2.conjugate()
          + (a / 2) * c * (abs(s1) ** 2 - abs(s1 * s1 - 4 * s2)))
    return t1, t2


def s2_root_oracle(params: LocalModelParams, s1: complex, s2: complex) -> tuple[complex, complex]:
    """Map the two roots of z^2 - s1 z + s2 and re-symmetrize."""
    a = params.a
    c = math.sqrt(a * a - 1)
    disc = cmath.sqrt(s1 * s1 - 4 * s2)
    z1, z2 = (s1 + disc) / 2, (s1 - disc) / 2
    w1 = a * z1 + c * z1.conjugate()
    w2 = a * z2 + c * z2.conjugate()
    return w1 + w2, w1 * w2


def _fixed_residual(params, x):
    s1 = complex(x[0], x[1])
    s2 = complex(x[2], x[3])
    t1, t2 = s2_local_model(params, s1, s2)
    return np.array([t1.real - x[0], t1.imag - x[1], t2.real - x[2], t2.imag - x[3]])


def _newton_polish(params, x):
    # the imaginary part of the second residual vanishes identically, so the
    # Jacobian is singular; damped Gauss-Newton (Levenberg-Marquardt) copes with that
    sol = least_squares(lambda v: _fixed_residual(params, v), np.asarray(x, dtype=float),
                        method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    return sol.x, float(np.abs(_fixed_residual(params, sol.x)).max())


def s2_fixed_points(params: LocalModelParams, grid: int = 400, radius: float = 1.0,
                    candidates: int = 20, tol: float = 1e-10) -> list[tuple[complex, complex]]:
    """Fixed points in the polydisc of the given radius.

    The first coordinate map is real linear, so its fixed points are found on a
    grid of the s1 plane; the second coordinate is then searched on a grid of
    the s2 plane over each s1 candidate.  The best grid points seed Newton.
    """
    ax = np.linspace(-radius, radius, grid)
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    Z = X + 1j * Y
    inside = np.abs(Z) <= radius
    a = params.a
    c = math.sqrt(a * a - 1)
    r1 = np.abs(a * Z + c * np.conj(Z) - Z)
    r1[~inside] = np.inf
    seeds1 = [Z.flat[k] for k in np.argsort(r1, axis=None)[:4]]
    found = []
    for s1 in seeds1:
        t2 = (a * a * Z + (a * a - 1) * np.conj(Z)
              + (a / 2) * c * (abs(s1) ** 2 - np.abs(s1 * s1 - 4 * Z)))
        r2 = np.abs(t2 - Z)
        r2[~inside] = np.inf
        for k in np.argsort(r2, axis=None)[:candidates]:
            s2 = Z.flat[k]
            x, res = _newton_polish(params, [s1.real, s1.imag, s2.real, s2.imag])
            if res < tol and np.hypot(x[0], x[1]) <= radius + 1e-9 and np.hypot(x[2], x[3]) <= radius + 1e-9:
                p = (complex(x[0], x[1]), complex(x[2], x[3]))
                if not any(abs(p[0] - q[0]) + abs(p[1] - q[1]) < 1e-8 for q in found):
                    found.append(p)
    return found
