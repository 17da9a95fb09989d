import math
import random

import pytest
import sympy
from sympy import ZZ
from sympy.matrices.normalforms import smith_normal_form
from hypothesis import given, settings
from hypothesis import strategies as st

from vfl.errors import PreconditionError
from vfl.spinc import (SpincLattice, grading_divisor, integer_kernel, is_proportional, q_rank,
                       ring_descriptors)


def lattice_for_c1(c1, c):
    return SpincLattice(tuple(c1), (0,) * len(c1), tuple(c))


def random_unimodular(rng, n, steps=12):
    U = sympy.eye(n)
    for _ in range(steps):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i == j:
            continue
        E = sympy.eye(n)
        E[i, j] = rng.choice((-2, -1, 1, 2))
        U = E * U
    return U


def test_grading_divisor_examples():
    assert grading_divisor(lattice_for_c1((2, 4, 6), (1, 1, 1))) == 2
    assert grading_divisor(lattice_for_c1((0, 0), (1, 1))) == 0
    torus_bundle = SpincLattice((2, 0), (0, 0), (1.0, 0.5), fiber_index=0)
    assert grading_divisor(torus_bundle) == 2
    assert torus_bundle.fiber_pairing == 2
    assert SpincLattice((1, -3), (2, 4), (0, 0)).c1_vector == (3, 1)


def test_fiber_positivity_enforced():
    with pytest.raises(PreconditionError):
        SpincLattice((2, 0), (0, 0), (0.0, 1.0), fiber_index=0)


def test_ring_descriptor_examples():
    full = ring_descriptors(lattice_for_c1((0, 0, 0), (1, 2, 3)))
    assert full.kernel_rank == 3
    prop = ring_descriptors(lattice_for_c1((2, -2, 0), (1, -1, 0)))
    assert prop.quotient_rank == 0 and prop.base_ring_only
    ex = ring_descriptors(lattice_for_c1((2, -2, 0), (1, 0, math.sqrt(2))))
    assert set(ex.kernel_basis) == {(1, 1, 0), (0, 0, 1)}
    assert sorted(ex.n_values) == pytest.approx([1.0, math.sqrt(2)])
    assert ex.quotient_rank == 2 and not ex.base_ring_only


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-30, 30), min_size=1, max_size=6))
def test_kernel_against_sympy(row):
    ker = integer_kernel(row)
    assert all(sum(a * b for a, b in zip(row, k)) == 0 for k in ker)
    expected = len(row) - (1 if any(row) else 0)
    assert len(ker) == expected
    if ker:
        K = sympy.Matrix(ker)
        assert K.rank() == expected
        # saturated: all invariant factors are units
        snf = smith_normal_form(K, domain=ZZ)
        assert all(abs(snf[i, i]) == 1 for i in range(expected))


def test_grading_divisor_invariant_under_basis_change():
    rng = random.Random(8)
    for _ in range(30):
        n = rng.randint(2, 5)
        c1 = [rng.randint(-12, 12) for _ in range(n)]
        U = random_unimodular(rng, n)
        moved = list(sympy.Matrix([c1]) * U)
        a = grading_divisor(lattice_for_c1(c1, [1] * n))
        b = grading_divisor(lattice_for_c1([int(v) for v in moved], [1] * n))
        assert a == b == math.gcd(*c1)


def test_q_rank():
    assert q_rank([1.0, math.sqrt(2), 1 + math.sqrt(2)]) == 2
    assert q_rank([0.5, 0.25, 1.0]) == 1
    assert q_rank([0.0, 0.0]) == 0
    assert q_rank([math.pi, math.e, 1.0]) == 3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(-6, 6), min_size=2, max_size=4).filter(any),
       st.sampled_from([0.5, 1.0, -2.0, math.sqrt(3)]), st.booleans())
def test_flag_fires_exactly_for_proportional_c(c1, lam, perturb):
    c = [lam * v for v in c1]
    if perturb:
        k = next(i for i, v in enumerate(c1) if v == 0) if 0 in c1 else 0
        c[k] += math.sqrt(5)
    lat = lattice_for_c1(c1, c)
    assert ring_descriptors(lat).base_ring_only == is_proportional(lat) == (not perturb)
