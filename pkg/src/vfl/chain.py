"""Z/2-graded chain complexes over the Novikov field and bifurcation moves.

The differential acts on column vectors: d(x_j) = sum_i D[i][j] x_i.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (ConstraintViolated, CutoffTooSmall, GradingMismatch,
                     NonPositiveValuation, NonUnit, PreconditionError)
from .novikov import (DEFAULT_CUTOFF, INF, NovikovScalar, nadd, nequal, nfirst_nonzero,
                      nidentity, ninvert_unipotent, nmatmul, nov_inverse, nsub, nzero_matrix)


@dataclass(frozen=True)
class Generator:
    name: str
    z2: int
    rel_grading: int = 0


@dataclass
class NovikovChainComplex:
    generators: list
    differential: list
    cutoff: object = DEFAULT_CUTOFF

    def __post_init__(self):
        n = len(self.generators)
        if len(self.differential) != n or any(len(r) != n for r in self.differential):
            raise PreconditionError("differential must be square with one row per generator")

    @property
    def size(self) -> int:
        return len(self.generators)


@dataclass
class CheckReport:
    ok: bool
    problem: str = ""
    entry: tuple | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_complex(C: NovikovChainComplex, require_positive: bool = True) -> CheckReport:
    """d^2 = 0 up to cutoff, odd parity, positive valuation of every entry."""
    D = C.differential
    for i, row in enumerate(D):
        for j, a in enumerate(row):
            if a.is_zero():
                continue
            if C.generators[i].z2 == C.generators[j].z2:
                return CheckReport(False, "entry joins generators of equal parity", (i, j))
            if require_positive and not a.valuation > 0:
                return CheckReport(False, "entry without positive valuation", (i, j))
    bad = nfirst_nonzero(nmatmul(D, D))
    if bad is not None:
        return CheckReport(False, "d^2 is not zero", bad)
    return CheckReport(True)


# --- handleslides ------------------------------------------------------------

def handleslide_matrix(C: NovikovChainComplex, slides) -> list:
    """T = I + sum eps * B * E_{z,x}, i.e. T x = x + eps B z for every slide."""
    T = nidentity(C.size, C.cutoff)
    for x, z, B, eps in slides:
        gx, gz = C.generators[x], C.generators[z]
        if x == z or gx.z2 != gz.z2 or gx.rel_grading != gz.rel_grading:
            raise GradingMismatch(f"slide {gx.name} -> {gz.name} joins different gradings")
        if B.is_zero() or not B.valuation > 0:
            raise NonPositiveValuation(f"slide {gx.name} -> {gz.name} needs a weight of positive valuation")
        if eps not in (1, -1):
            raise PreconditionError("slide sign must be +1 or -1")
        T[z][x] = T[z][x] + eps * B
    return T


def handleslide_transform(C: NovikovChainComplex, slides) -> tuple[NovikovChainComplex, list]:
    T = handleslide_matrix(C, slides)
    Tinv = ninvert_unipotent(T)
    D1 = nmatmul(nmatmul(Tinv, C.differential), T)
    return NovikovChainComplex(list(C.generators), D1, C.cutoff), T


# --- death-birth -------------------------------------------------------------

@dataclass
class DeathBirth:
    dplus: NovikovChainComplex
    i: list
    p: list
    K: list


def death_birth_extend(dminus: NovikovChainComplex, v, mu, alpha: NovikovScalar,
                       new_names=("x+", "x-"), new_z2: int | None = None,
                       new_grading: int = 0) -> DeathBirth:
    """Add a canceling pair (a, b) with d a = v + alpha b and d(old) += mu b.

    v is a column over the old generators, mu a row.  The new differential is
    [[d + alpha^-1 v mu, v, 0], [0, 0, 0], [mu, alpha, 0]].
    """
    n = dminus.size
    E = dminus.cutoff
    if len(v) != n or len(mu) != n:
        raise PreconditionError("v and mu must have one entry per generator")
    if alpha.is_zero():
        raise NonUnit("alpha vanishes up to cutoff")
    D = dminus.differential
    vcol = [[x] for x in v]
    murow = [list(mu)]
    checks = (("mu v", nmatmul(murow, vcol)), ("mu d", nmatmul(murow, D)), ("d v", nmatmul(D, vcol)))
    for name, m in checks:
        if nfirst_nonzero(m) is not None:
            raise ConstraintViolated(f"{name} != 0")
    parity = {g.z2 for g, x in zip(dminus.generators, v) if not x.is_zero()}
    mu_parity = {g.z2 for g, m in zip(dminus.generators, mu) if not m.is_zero()}
    if new_z2 is None:
        new_z2 = 1 - min(parity) if parity else (min(mu_parity) if mu_parity else 0)
    if parity - {1 - new_z2}:
        raise GradingMismatch("v must land in the parity opposite to the new generator")
    ga = Generator(new_names[0], new_z2, new_grading)
    gb = Generator(new_names[1], 1 - new_z2, new_grading - 1)
    for g, m in zip(dminus.generators, mu):
        if not m.is_zero() and g.z2 == gb.z2:
            raise GradingMismatch("mu must start from the parity opposite to the second new generator")

    ainv = nov_inverse(alpha)
    zero = NovikovScalar.zero(E)
    vmu = nmatmul(vcol, murow)
    top = nadd(D, [[ainv * a for a in row] for row in vmu])
    Dp = [top[r] + [v[r], zero] for r in range(n)]
    Dp.append([zero] * (n + 2))
    Dp.append(list(mu) + [alpha, zero])
    dplus = NovikovChainComplex(list(dminus.generators) + [ga, gb], Dp, E)

    ident = nidentity(n, E)
    i_map = [row[:] for row in ident] + [[-(ainv * m) for m in mu], [zero] * n]
    p_map = [ident[r] + [zero, -(ainv * v[r])] for r in range(n)]
    K = nzero_matrix(n + 2, n + 2, E)
    K[n][n + 1] = ainv

    # verify every identity before returning
    if nfirst_nonzero(nmatmul(Dp, Dp)) is not None:
        raise ConstraintViolated("(d+)^2 != 0")
    if not nequal(nmatmul(Dp, i_map), nmatmul(i_map, D)):
        raise ConstraintViolated("i is not a chain map")
    if not nequal(nmatmul(p_map, Dp), nmatmul(D, p_map)):
        raise ConstraintViolated("p is not a chain map")
    if not nequal(nmatmul(p_map, i_map), ident):
        raise ConstraintViolated("p i != 1")
    lhs = nadd(nmatmul(Dp, K), nmatmul(K, Dp))
    rhs = nsub(nidentity(n + 2, E), nmatmul(i_map, p_map))
    if not nequal(lhs, rhs):
        raise ConstraintViolated("dK + Kd != 1 - i p")
    return DeathBirth(dplus, i_map, p_map, K)


# --- homology ----------------------------------------------------------------

def novikov_rank(M) -> int:
    """Rank over the Novikov field by elimination with minimal-valuation pivots."""
    A = [list(row) for row in M]
    rows = len(A)
    cols = len(A[0]) if rows else 0
    live_r = list(range(rows))
    live_c = list(range(cols))
    rank = 0
    while live_r and live_c:
        best = None
        for r in live_r:
            for c in live_c:
                a = A[r][c]
                if a.is_zero():
                    continue
                key = (a.valuation, r, c)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        lam, pr, pc = best
        piv = A[pr][pc]
        if piv.cutoff <= 0 or lam >= 0.9 * piv.cutoff:
            raise CutoffTooSmall(f"pivot valuation {lam} too close to cutoff {piv.cutoff}")
        inv = nov_inverse(piv)
        live_r.remove(pr)
        live_c.remove(pc)
        for r in live_r:
            a = A[r][pc]
            if a.is_zero():
                continue
            f = a * inv
            for c in live_c:
                if not A[pr][c].is_zero():
                    A[r][c] = A[r][c] - f * A[pr][c]
        rank += 1
    return rank


def _block(C: NovikovChainComplex, src: int):
    """Matrix of d restricted to generators of parity src."""
    rows = [i for i, g in enumerate(C.generators) if g.z2 != src]
    cols = [j for j, g in enumerate(C.generators) if g.z2 == src]
    return [[C.differential[i][j] for j in cols] for i in rows], len(cols)


def homology_ranks(C: NovikovChainComplex) -> list[int]:
    """[rank H_even, rank H_odd]."""
    out = []
    ranks = {}
    sizes = {}
    for s in (0, 1):
        M, sizes[s] = _block(C, s)
        ranks[s] = novikov_rank(M) if M and M[0] else 0
    for s in (0, 1):
        out.append(sizes[s] - ranks[s] - ranks[1 - s])
    return out


def dual_complex(C: NovikovChainComplex) -> NovikovChainComplex:
    gens = [Generator(g.name, g.z2, -g.rel_grading) for g in C.generators]
    Dt = [list(r) for r in zip(*C.differential)] if C.size else []
    return NovikovChainComplex(gens, Dt, C.cutoff)


def duality_check(C: NovikovChainComplex) -> bool:
    dual = dual_complex(C)
    n = C.size
    for a in range(n):
        for b in range(n):
            # <d e_a, e_b> against <e_a, d^T e_b>
            if not C.differential[b][a].equals(dual.differential[a][b]):
                return False
    return homology_ranks(C) == homology_ranks(dual)


# --- exact rank oracle by specialization ---------------------------------------

def _specialize(a: NovikovScalar, s: Fraction, den: int) -> Fraction:
    total = Fraction(0)
    for e, c in a.terms:
        k = Fraction(e) * den
        if k.denominator != 1:
            raise PreconditionError("exponent not on the specialization lattice")
        total += c * s ** int(k)
    return total


def rational_rank(M) -> int:
    A = [list(r) for r in M]
    rank = 0
    rows = len(A)
    cols = len(A[0]) if rows else 0
    r0 = 0
    for c in range(cols):
        piv = next((r for r in range(r0, rows) if A[r][c] != 0), None)
        if piv is None:
            continue
        A[r0], A[piv] = A[piv], A[r0]
        for r in range(r0 + 1, rows):
            if A[r][c]:
                f = A[r][c] / A[r0][c]
                A[r] = [x - f * y for x, y in zip(A[r], A[r0])]
        r0 += 1
        rank += 1
    return rank


def specialized_ranks(C: NovikovChainComplex, s: Fraction, den: int) -> list[int]:
    """Homology ranks after substituting T = s^den (exact when entries are polynomials)."""
    ranks = {}
    sizes = {}
    for src in (0, 1):
        M, sizes[src] = _block(C, src)
        Q = [[_specialize(a, s, den) for a in row] for row in M]
        ranks[src] = rational_rank(Q) if Q and Q[0] else 0
    return [sizes[t] - ranks[t] - ranks[1 - t] for t in (0, 1)]


# --- random instances ----------------------------------------------------------

def _rand_weight(rng: random.Random, cutoff, terms=2, vmin=1, vmax=4) -> NovikovScalar:
    # exponents on the half-integer lattice keep series short
    k = rng.randint(1, terms)
    pairs = [(Fraction(rng.randint(vmin, vmax), 2), rng.choice((-2, -1, 1, 2))) for _ in range(k)]
    s = NovikovScalar(tuple(pairs), cutoff)
    return s if not s.is_zero() else NovikovScalar.monomial(Fraction(vmin, 2), 1, cutoff)


def random_standard_complex(rng: random.Random, pairs: int, singles: int, cutoff=DEFAULT_CUTOFF):
    """Direct sum of acyclic pairs (a -> weight * b) and isolated generators."""
    gens = []
    n = 2 * pairs + singles
    D = nzero_matrix(n, n, cutoff)
    for k in range(pairs):
        z2 = rng.randint(0, 1)
        g = rng.randint(-2, 2)
        gens.append(Generator(f"a{k}", z2, g))
        gens.append(Generator(f"b{k}", 1 - z2, g - 1))
        D[2 * k + 1][2 * k] = _rand_weight(rng, cutoff)
    for k in range(singles):
        gens.append(Generator(f"c{k}", rng.randint(0, 1), rng.randint(-2, 2)))
    return NovikovChainComplex(gens, D, cutoff)


def random_slides(rng: random.Random, C: NovikovChainComplex, count: int, nilpotent: bool = True):
    out = []
    n = C.size
    for _ in range(count * 4):
        if len(out) >= count:
            break
        x, z = rng.randrange(n), rng.randrange(n)
        if x == z:
            continue
        if nilpotent and z < x:
            x, z = z, x
        gx, gz = C.generators[x], C.generators[z]
        if gx.z2 != gz.z2 or gx.rel_grading != gz.rel_grading:
            continue
        out.append((x, z, _rand_weight(rng, C.cutoff, vmin=1, vmax=3), rng.choice((1, -1))))
    return out


def random_constrained_instance(rng: random.Random, max_size: int = 12, cutoff=DEFAULT_CUTOFF):
    """A complex with (v, mu, alpha) satisfying the death-birth constraints.

    Built from a standard complex conjugated by a grading preserving unipotent
    change of basis; v is a cycle and mu a cocycle pairing trivially with it.
    """
    while True:
        pairs = rng.randint(0, (max_size - 2) // 2)
        singles = rng.randint(0, max_size - 2 - 2 * pairs)
        if 2 * pairs + singles >= 1:
            break
    # group everything in one grading so slides are plentiful
    C0 = random_standard_complex(rng, pairs, singles, cutoff)
    gens = [Generator(g.name, g.z2, g.z2) for g in C0.generators]
    C0 = NovikovChainComplex(gens, C0.differential, cutoff)
    C, T = handleslide_transform(C0, random_slides(rng, C0, rng.randint(0, 6)))
    n = C.size
    zero = NovikovScalar.zero(cutoff)
    z2 = rng.randint(0, 1)
    # cycles of C0: isolated generators and the b's; map through T^-1
    cyc = [j for j, g in enumerate(C0.generators) if g.z2 == 1 - z2 and g.name[0] in "bc"]
    coc = [j for j, g in enumerate(C0.generators) if g.z2 == z2 and g.name[0] in "ac"]
    v0 = [zero] * n
    mu0 = [zero] * n
    vsupp = set()
    for j in rng.sample(cyc, min(len(cyc), rng.randint(0, 2))):
        v0[j] = _rand_weight(rng, cutoff)
        vsupp.add(j)
    for j in rng.sample(coc, min(len(coc), rng.randint(0, 2))):
        if j not in vsupp:
            mu0[j] = _rand_weight(rng, cutoff)
    Tinv = ninvert_unipotent(T)
    v = [r[0] for r in nmatmul(Tinv, [[x] for x in v0])]
    mu = nmatmul([mu0], T)[0]
    # val(alpha) = 1/2 is the smallest weight valuation, so alpha^-1 v mu stays positive
    alpha = NovikovScalar.monomial(Fraction(1, 2), rng.choice((-1, 1, 2)), cutoff)
    if rng.random() < 0.5:
        alpha = alpha + _rand_weight(rng, cutoff, vmin=2, vmax=4)
    return C, v, mu, alpha, z2


# --- JSON ---------------------------------------------------------------------

def _parse_exponent(e):
    if isinstance(e, list):
        return Fraction(int(e[0]), int(e[1]))
    if isinstance(e, float):
        return Fraction(str(e))
    return Fraction(e)


def scalar_from_json(terms, cutoff) -> NovikovScalar:
    return NovikovScalar(tuple((_parse_exponent(t[0]), Fraction(int(t[1]), int(t[2]))) for t in terms), cutoff)


def complex_from_json(data: dict) -> NovikovChainComplex:
    cutoff = _parse_exponent(data.get("cutoff", 32))
    gens = [Generator(str(g["name"]), int(g["z2"]) % 2, int(g.get("rel_grading", 0))) for g in data["generators"]]
    n = len(gens)
    D = nzero_matrix(n, n, cutoff)
    for r, c, terms in data.get("differential", []):
        D[int(r)][int(c)] = D[int(r)][int(c)] + scalar_from_json(terms, cutoff)
    return NovikovChainComplex(gens, D, cutoff)


def complex_to_json(C: NovikovChainComplex) -> dict:
    diff = []
    for i, row in enumerate(C.differential):
        for j, a in enumerate(row):
            if not a.is_zero():
                diff.append([i, j, a.to_json()])
    cut = C.cutoff
    return {
        "generators": [{"name": g.name, "z2": g.z2, "rel_grading": g.rel_grading} for g in C.generators],
        "differential": diff,
        "cutoff": [cut.numerator, cut.denominator] if isinstance(cut, Fraction) and cut.denominator != 1 else
        (int(cut) if isinstance(cut, Fraction) else cut),
    }


def load_complex(path) -> NovikovChainComplex:
    with open(path) as fh:
        return complex_from_json(json.load(fh, parse_float=Fraction))
