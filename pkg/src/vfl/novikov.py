"""Truncated Novikov series sum a_i T^{lambda_i} with rational coefficients.

Every scalar carries a cutoff E: only terms with exponent < E are known.  Sums
and products propagate the cutoff the way precision propagates for p-adic
numbers, so an equality "up to cutoff" is always an honest statement.
Exponents are Fractions when the inputs are rational and floats otherwise;
float exponents closer than EXP_TOL are merged.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import NotUnipotent, NonUnit

DEFAULT_CUTOFF = Fraction(32)
EXP_TOL = 1e-9
INF = math.inf


def _exp(x):
    if isinstance(x, (Fraction, int)) or isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, float):
        return x
    return Fraction(x)


def _normalize(pairs, cutoff):
    """Sort, merge equal exponents, drop zero coefficients and terms >= cutoff."""
    pairs = sorted(((e, Fraction(c)) for e, c in pairs if c), key=lambda t: t[0])
    out = []
    for e, c in pairs:
        if e >= cutoff or (type(e) is float and e >= cutoff - EXP_TOL):
            break
        if out and (out[-1][0] == e or (isinstance(e, float) or isinstance(out[-1][0], float))
                    and abs(out[-1][0] - e) <= EXP_TOL):
            out[-1] = (out[-1][0], out[-1][1] + c)
        else:
            out.append((e, c))
    return tuple((e, c) for e, c in out if c)


@dataclass(frozen=True)
class NovikovScalar:
    terms: tuple = ()
    cutoff: object = DEFAULT_CUTOFF

    def __post_init__(self):
        cut = _exp(self.cutoff)
        object.__setattr__(self, "cutoff", cut)
        object.__setattr__(self, "terms", _normalize(((_exp(e), c) for e, c in self.terms), cut))

    # constructors
    @classmethod
    def monomial(cls, exponent, coeff=1, cutoff=DEFAULT_CUTOFF) -> "NovikovScalar":
        return cls(((exponent, coeff),), cutoff)

    @classmethod
    def zero(cls, cutoff=DEFAULT_CUTOFF) -> "NovikovScalar":
        return cls((), cutoff)

    @classmethod
    def one(cls, cutoff=DEFAULT_CUTOFF) -> "NovikovScalar":
        return cls(((0, 1),), cutoff)

    # queries
    @property
    def valuation(self):
        return self.terms[0][0] if self.terms else INF

    def is_zero(self) -> bool:
        return not self.terms

    def leading(self):
        return self.terms[0] if self.terms else None

    def __bool__(self) -> bool:
        return bool(self.terms)

    # arithmetic
    def __add__(self, other):
        other = _coerce(other, self.cutoff)
        cut = min(self.cutoff, other.cutoff)
        if not other.terms and self.cutoff <= cut:
            return self
        if not self.terms and other.cutoff <= cut:
            return other
        if _exact(self.terms) and _exact(other.terms):
            acc = dict(t for t in self.terms if t[0] < cut)
            for e, c in other.terms:
                if e < cut:
                    acc[e] = acc.get(e, 0) + c
            return _raw(tuple(sorted((e, c) for e, c in acc.items() if c)), cut)
        return NovikovScalar(self.terms + other.terms, cut)

    __radd__ = __add__

    def __neg__(self):
        return _raw(tuple((e, -c) for e, c in self.terms), self.cutoff)

    def __sub__(self, other):
        return self + (-_coerce(other, self.cutoff))

    def __rsub__(self, other):
        return _coerce(other, self.cutoff) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return NovikovScalar(tuple((e, c * other) for e, c in self.terms), self.cutoff)
        return nov_mul(self, other)

    __rmul__ = __mul__

    def shift(self, lam) -> "NovikovScalar":
        """Multiply by T^lam."""
        lam = _exp(lam)
        return NovikovScalar(tuple((e + lam, c) for e, c in self.terms), self.cutoff + lam)

    def equals(self, other, cutoff=None) -> bool:
        """Equality of all terms below the common (or given) cutoff."""
        d = self - _coerce(other, self.cutoff)
        if cutoff is None:
            return d.is_zero()
        return all(e >= cutoff for e, _ in d.terms)

    def to_json(self) -> list:
        return [[_exp_json(e), c.numerator, c.denominator] for e, c in self.terms]

    def __repr__(self) -> str:
        if not self.terms:
            return f"0 (+O(T^{self.cutoff}))"
        parts = [f"{c}*T^{e}" for e, c in self.terms]
        return " + ".join(parts) + f" (+O(T^{self.cutoff}))"


def _raw(terms, cutoff) -> NovikovScalar:
    # terms already sorted, merged and below the cutoff
    out = object.__new__(NovikovScalar)
    object.__setattr__(out, "terms", terms)
    object.__setattr__(out, "cutoff", cutoff)
    return out


def _exact(terms) -> bool:
    return not any(type(e) is float for e, _ in terms)


def _exp_json(e):
    if isinstance(e, Fraction) and e.denominator != 1:
        return [e.numerator, e.denominator]
    return int(e) if isinstance(e, Fraction) else e


def _coerce(x, cutoff) -> NovikovScalar:
    if isinstance(x, NovikovScalar):
        return x
    return NovikovScalar(((0, Fraction(x)),), cutoff)


def nov_mul(x: NovikovScalar, y: NovikovScalar) -> NovikovScalar:
    """Convolution product, truncated at the smaller cutoff.

    With negative valuations the result is only known below
    min(E_x + v_y, E_y + v_x), which can be lower still.
    """
    vx, vy = x.valuation, y.valuation
    cut = min(x.cutoff, y.cutoff)
    if vx != INF and vy != INF:
        cut = min(cut, x.cutoff + vy, y.cutoff + vx)
    acc: dict = {}
    for e1, c1 in x.terms:
        if e1 + vy >= cut:
            break
        for e2, c2 in y.terms:
            e = e1 + e2
            if e >= cut:
                break
            acc[e] = acc.get(e, 0) + c1 * c2
    if _exact(x.terms) and _exact(y.terms):
        return _raw(tuple(sorted((e, c) for e, c in acc.items() if c)), cut)
    return NovikovScalar(tuple(acc.items()), cut)


def nov_invert_unipotent(x: NovikovScalar) -> NovikovScalar:
    """Inverse of 1 + y with val(y) > 0."""
    lead = x.leading()
    if lead is None or lead[0] != 0 or lead[1] != 1:
        raise NotUnipotent("leading term must be 1*T^0")
    ys = x.terms[1:]
    cut = x.cutoff
    if not ys:
        return NovikovScalar.one(cut)
    if not _exact(ys):
        return _invert_by_series(x)
    # z = 1/(1+y) term by term: z_e = -sum_f y_f z_{e-f}; the support of z lies
    # in the monoid generated by supp(y), visited in increasing order
    z = {Fraction(0): Fraction(1)}
    heap = []
    queued = set()

    def push(e):
        if e < cut and e not in queued:
            queued.add(e)
            heapq.heappush(heap, e)

    for f, _ in ys:
        push(f)
    while heap:
        e = heapq.heappop(heap)
        c = -sum(cf * z[e - f] for f, cf in ys if f <= e and (e - f) in z)
        if c:
            z[e] = c
            for f, _ in ys:
                push(e + f)
    return _raw(tuple(sorted(z.items())), cut)


def _invert_by_series(x: NovikovScalar) -> NovikovScalar:
    y = x - 1
    result = NovikovScalar.one(x.cutoff)
    power = NovikovScalar.one(x.cutoff)
    neg_y = -y
    while True:
        power = nov_mul(power, neg_y)
        if power.is_zero() or power.valuation >= x.cutoff:
            break
        result = result + power
    return NovikovScalar(result.terms, x.cutoff)


def nov_inverse(x: NovikovScalar) -> NovikovScalar:
    """Inverse of a nonzero element: c^-1 T^-lam (1 + y)^-1."""
    lead = x.leading()
    if lead is None:
        raise NonUnit("zero has no inverse")
    lam, c = lead
    u = NovikovScalar(tuple((e - lam, a / c) for e, a in x.terms), x.cutoff - lam)
    inv = nov_invert_unipotent(u)
    # relative precision E - lam carries over to the inverse
    return NovikovScalar(tuple((e - lam, a / c) for e, a in inv.terms), x.cutoff - 2 * lam)


# --- matrices over the Novikov field ---------------------------------------

def nzero_matrix(rows: int, cols: int, cutoff=DEFAULT_CUTOFF) -> list[list[NovikovScalar]]:
    z = NovikovScalar.zero(cutoff)
    return [[z] * cols for _ in range(rows)]


def nidentity(n: int, cutoff=DEFAULT_CUTOFF) -> list[list[NovikovScalar]]:
    m = nzero_matrix(n, n, cutoff)
    one = NovikovScalar.one(cutoff)
    for i in range(n):
        m[i][i] = one
    return m


def nmatmul(A, B) -> list[list[NovikovScalar]]:
    if not A or not B:
        return [[] for _ in A]
    n, k, m = len(A), len(B), len(B[0])
    out = []
    for i in range(n):
        row = []
        for j in range(m):
            acc = None
            for l in range(k):
                a, b = A[i][l], B[l][j]
                if a.terms and b.terms:
                    p = nov_mul(a, b)
                    acc = p if acc is None else acc + p
            if acc is None:
                acc = NovikovScalar.zero(min(A[i][0].cutoff if k else DEFAULT_CUTOFF, B[0][j].cutoff))
            row.append(acc)
        out.append(row)
    return out


def nadd(A, B) -> list[list[NovikovScalar]]:
    return [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def nsub(A, B) -> list[list[NovikovScalar]]:
    return [[a - b for a, b in zip(ra, rb)] for ra, rb in zip(A, B)]


def nscale(A, s) -> list[list[NovikovScalar]]:
    return [[s * a for a in row] for row in A]


def nis_zero(A, cutoff=None) -> bool:
    return nfirst_nonzero(A, cutoff) is None


def nfirst_nonzero(A, cutoff=None):
    for i, row in enumerate(A):
        for j, a in enumerate(row):
            if cutoff is None:
                if not a.is_zero():
                    return i, j
            elif any(e < cutoff for e, _ in a.terms):
                return i, j
    return None


def nequal(A, B, cutoff=None) -> bool:
    return nis_zero(nsub(A, B), cutoff)


def ninvert_unipotent(T) -> list[list[NovikovScalar]]:
    """Inverse of I + N where N has entries of positive valuation."""
    n = len(T)
    ident = nidentity(n, _matrix_cutoff(T))
    N = nsub(T, ident)
    for row in N:
        for a in row:
            if not a.is_zero() and not a.valuation > 0:
                raise NotUnipotent("off-identity part must have positive valuation")
    result = ident
    power = ident
    negN = nscale(N, -1)
    while True:
        power = nmatmul(power, negN)
        if nis_zero(power):
            break
        result = nadd(result, power)
    return result


def _matrix_cutoff(A):
    cuts = [a.cutoff for row in A for a in row]
    return min(cuts) if cuts else DEFAULT_CUTOFF


def nmin_valuation(A):
    vals = [a.valuation for row in A for a in row]
    return min(vals) if vals else INF
