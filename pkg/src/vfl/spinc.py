"""Integer lattice data of a spin-c structure: gradings and Novikov ring descriptors.

Classes in H_2(Y; Z)/torsion are integer vectors; a cohomology class is recorded
by its pairings with a basis.  c_1 = e + 2PD(h) pairs integrally, the class c
pairs to real numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath

from .errors import PreconditionError


@dataclass(frozen=True)
class SpincLattice:
    e_vector: tuple
    h_vector: tuple
    c_vector: tuple
    fiber_index: int | None = None

    def __post_init__(self):
        e = tuple(int(v) for v in self.e_vector)
        h = tuple(int(v) for v in self.h_vector)
        c = tuple(self.c_vector)
        if not (len(e) == len(h) == len(c)):
            raise PreconditionError("e, h and c must have the same rank")
        object.__setattr__(self, "e_vector", e)
        object.__setattr__(self, "h_vector", h)
        object.__setattr__(self, "c_vector", c)
        if self.fiber_index is not None:
            if not 0 <= self.fiber_index < len(e):
                raise PreconditionError("fiber index out of range")
            if not self.c_vector[self.fiber_index] > 0:
                raise PreconditionError("c must pair positively with the fiber")

    @property
    def rank(self) -> int:
        return len(self.e_vector)

    @property
    def c1_vector(self) -> tuple:
        return tuple(a + b for a, b in zip(self.e_vector, self.h_vector))

    @property
    def fiber_pairing(self) -> int | None:
        return None if self.fiber_index is None else self.c1_vector[self.fiber_index]


def grading_divisor(lattice: SpincLattice) -> int:
    """gcd of the pairings of c_1 with H_2 (0 when c_1 pairs trivially)."""
    g = 0
    for v in lattice.c1_vector:
        g = math.gcd(g, v)
    return g


def _ext_gcd(a: int, b: int):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _ext_gcd(b, a % b)
    return g, y, x - (a // b) * y


def integer_kernel(row) -> list[tuple[int, ...]]:
    """Basis of {k in Z^n : row . k = 0} by unimodular column operations."""
    n = len(row)
    r = [int(v) for v in row]
    U = [[int(i == j) for j in range(n)] for i in range(n)]  # columns are basis vectors
    # fold every entry into column 0 by 2x2 unimodular steps
    for j in range(1, n):
        a, b = r[0], r[j]
        if b == 0:
            continue
        g, x, y = _ext_gcd(a, b)
        # new col0 = x col0 + y colj, new colj = -(b/g) col0 + (a/g) colj
        for i in range(n):
            c0, cj = U[i][0], U[i][j]
            U[i][0] = x * c0 + y * cj
            U[i][j] = -(b // g) * c0 + (a // g) * cj
        r[0], r[j] = g, 0
    start = 1 if r[0] != 0 else 0
    basis = [tuple(U[i][j] for i in range(n)) for j in range(start, n)]
    return hermite_rows(basis)


def hermite_rows(rows) -> list[tuple[int, ...]]:
    """Row-style Hermite normal form of an integer basis (zero rows dropped)."""
    A = [list(r) for r in rows]
    m = len(A)
    if m == 0:
        return []
    n = len(A[0])
    pr = 0
    for col in range(n):
        if pr >= m:
            break
        # Euclid on the column below pr
        while True:
            nz = [i for i in range(pr, m) if A[i][col] != 0]
            if not nz:
                break
            i0 = min(nz, key=lambda i: abs(A[i][col]))
            A[pr], A[i0] = A[i0], A[pr]
            done = True
            for i in range(pr + 1, m):
                if A[i][col]:
                    q = A[i][col] // A[pr][col]
                    A[i] = [x - q * y for x, y in zip(A[i], A[pr])]
                    if A[i][col]:
                        done = False
            if done:
                break
        if A[pr][col] == 0:
            continue
        if A[pr][col] < 0:
            A[pr] = [-x for x in A[pr]]
        for i in range(pr):
            q = A[i][col] // A[pr][col]
            A[i] = [x - q * y for x, y in zip(A[i], A[pr])]
        pr += 1
    return [tuple(r) for r in A[:pr]]


def q_rank(values, tol: float = 1e-9, maxcoeff: int = 10 ** 4) -> int:
    """Rank over Q of a list of reals, using integer relation detection."""
    exact = all(isinstance(v, (int, Fraction)) for v in values)
    if exact:
        return int(any(v != 0 for v in values))
    independent: list = []
    with mpmath.workdps(30):
        for v in values:
            x = mpmath.mpf(float(v))
            if abs(x) <= tol:
                continue
            if not independent:
                independent.append(x)
                continue
            rel = mpmath.pslq(independent + [x], tol=tol, maxcoeff=maxcoeff, maxsteps=10 ** 4)
            if rel is None or rel[-1] == 0:
                independent.append(x)
    return len(independent)


@dataclass(frozen=True)
class RingDescriptors:
    kernel_basis: tuple
    n_values: tuple
    kernel_rank: int
    quotient_rank: int
    base_ring_only: bool
    lambda_tilde: str = field(default="")
    lambda_: str = field(default="")

    def as_dict(self) -> dict:
        return {
            "kernel_basis": [list(k) for k in self.kernel_basis],
            "n_values": [float(v) if not isinstance(v, int) else v for v in self.n_values],
            "kernel_rank": self.kernel_rank,
            "quotient_rank": self.quotient_rank,
            "base_ring_only": self.base_ring_only,
            "lambda_tilde": self.lambda_tilde,
            "lambda": self.lambda_,
        }


def ring_descriptors(lattice: SpincLattice) -> RingDescriptors:
    ker = integer_kernel(lattice.c1_vector)
    nvals = tuple(sum(c * k for c, k in zip(lattice.c_vector, kv)) for kv in ker)
    qr = q_rank(nvals)
    flag = qr == 0
    tilde = f"Nov(Z^{len(ker)}, N; R)"
    quotient = "R" if flag else f"Nov(Z^{qr}, N; R)"
    return RingDescriptors(tuple(ker), nvals, len(ker), qr, flag, tilde, quotient)


def is_proportional(lattice: SpincLattice, tol: float = 1e-9) -> bool:
    """Direct test that c is a real multiple of c_1 (used as an independent check)."""
    c1 = lattice.c1_vector
    c = [float(v) for v in lattice.c_vector]
    if not any(c1):
        return not any(abs(v) > tol for v in c)
    k = max(range(len(c1)), key=lambda i: abs(c1[i]))
    lam = c[k] / c1[k]
    return all(abs(c[i] - lam * c1[i]) <= tol * max(1.0, abs(c[i])) for i in range(len(c)))
