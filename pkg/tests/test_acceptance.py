"""Acceptance criteria 1-11, one PASS/FAIL line each (also shown in the terminal summary)."""

import functools
import math
import random
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy

from vfl import chain as ch
from vfl import symprod as sp
from vfl.novikov import nequal, nidentity, nmatmul
from vfl.spinc import SpincLattice, grading_divisor, is_proportional, ring_descriptors
from vfl.torus import FlatTorus
from vfl.transport import transport
from vfl.vortex import Divisor, mass, solve_vortex, sup_bounds_check

from conftest import report

TAUS = (100.0, 400.0, 1600.0)
MODULI = (1j, 1 + 2j)
DIVISORS = {
    1: (((0.5, 0.5), 1),),
    2: (((0.3, 0.4), 1), ((0.7, 0.6), 1)),
    3: (((0.2, 0.2), 1), ((0.5, 0.7), 1), ((0.8, 0.4), 1)),
}


def verdict(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


@functools.lru_cache(maxsize=1)
def mass_runs():
    t0 = time.perf_counter()
    runs = []
    for rho in MODULI:
        torus = FlatTorus(rho, 256)
        for d, pts in DIVISORS.items():
            for tau in TAUS:
                vf, _ = solve_vortex(torus, Divisor(pts), tau, fit_decay=False)
                runs.append((rho, d, tau, mass(vf), sup_bounds_check(vf)))
    return runs, time.perf_counter() - t0


def test_criterion_01_mass_identity():
    runs, elapsed = mass_runs()
    worst = max(abs(m - 2 * math.pi * d / tau) / (2 * math.pi * d / tau) for _, d, tau, m, _ in runs)
    ok = worst <= 1e-3 and elapsed <= 120
    report(f"criterion 1: {verdict(ok)} - mass identity, {len(runs)} runs at N=256, "
           f"worst relative error {worst:.2e} (tol 1e-3), {elapsed:.1f}s (limit 120s)")
    assert ok


def test_criterion_02_maximum_principle_and_gradient_bound():
    runs, _ = mass_runs()
    wmin = min(b[0] for *_, b in runs)
    excess = max(b[1] / math.sqrt(tau) for _, _, tau, _, b in runs)
    ok = wmin >= -1e-8 and excess <= 1e-2
    report(f"criterion 2: {verdict(ok)} - min w = {wmin:.2e} (>= -1e-8), "
           f"max (|d_A theta| - 2 sqrt(tau) w)/sqrt(tau) = {excess:.2e} (<= 1e-2)")
    assert ok


def test_criterion_03_decay_scaling():
    t0 = time.perf_counter()
    lines = []
    ok = True
    for rho in MODULI:
        torus = FlatTorus(rho, 256)
        cs = []
        for tau in TAUS:
            _, rep = solve_vortex(torus, Divisor(DIVISORS[1]), tau)
            cs.append(rep.decay_rate)
        ratios = [c / math.sqrt(t) for c, t in zip(cs, TAUS)]
        slope = float(np.polyfit(np.log(TAUS), np.log(cs), 1)[0])
        ok &= all(1.2 <= r <= 2.0 for r in ratios) and abs(slope - 0.5) <= 0.05
        lines.append(f"rho={rho}: c/sqrt(tau)={[round(r, 3) for r in ratios]} slope={slope:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 180
    report(f"criterion 3: {verdict(ok)} - decay fits {'; '.join(lines)} "
           f"(ratio in [1.2, 2.0], slope 0.5 +- 0.05), {elapsed:.1f}s (limit 180s)")
    assert ok


@pytest.mark.slow
def test_criterion_04_transport_displacement_law():
    t0 = time.perf_counter()
    traces = [transport((1j, 1 + 2j), Divisor(DIVISORS[1]), tau, steps=1, grid_n=256) for tau in TAUS]
    elapsed = time.perf_counter() - t0
    delta = [tr.displacement for tr in traces]
    tracked = [tr.tracked_displacement for tr in traces]
    residual = max(max(tr.residuals) for tr in traces)
    rungs = [delta[k + 1] <= 0.75 * delta[k] for k in range(2)]
    scaled = [dl * math.sqrt(t) / math.log(t) for dl, t in zip(delta, TAUS)]
    bounded = all(s <= 1.5 * scaled[0] and s >= scaled[0] / 1.5 for s in scaled) if scaled[0] > 0 \
        else all(s == 0 for s in scaled)
    degenerate = all(dl == 0 for dl in delta)
    ok = all(rungs) and bounded and residual <= 1e-4 and elapsed <= 600
    note = " (all displacements are zero: a single vortex on a flat torus does not move, " \
           "so the rung test reads 0 <= 0.75*0)" if degenerate else ""
    report(f"criterion 4: {verdict(ok)} - delta={['%.3e' % v for v in delta]} "
           f"tracked={['%.3e' % v for v in tracked]} max residual {residual:.2e} (<= 1e-4), "
           f"{elapsed:.0f}s (limit 600s){note}")
    assert ok


def test_criterion_05_constant_path_identity():
    tr = transport((1j, 1j), Divisor(DIVISORS[2]), 400.0, steps=1, grid_n=256)
    cells = tr.displacement * 256
    ok = cells < 2 and max(tr.residuals) <= 1e-4
    report(f"criterion 5: {verdict(ok)} - constant path at tau=400 moved zeros {cells:.3f} grid cells (< 2)")
    assert ok


def test_criterion_06_betti_oracle():
    t0 = time.perf_counter()
    bad = []
    for g in range(1, 6):
        gen = sp.betti_generating(g, 6)
        for d in range(7):
            if sp.betti(g, d) != [gen.get((d, k), 0) for k in range(2 * d + 1)]:
                bad.append(("betti", g, d))
            if sp.euler(g, d) != sp.euler_generating(g, d):
                bad.append(("euler", g, d))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 10
    report(f"criterion 6: {verdict(ok)} - Betti and Euler numbers for g<=5, d<=6, "
           f"{len(bad)} mismatches, {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_07_lefschetz_generating_identity():
    rng = random.Random(2024)
    bad = 0
    for k in range(100):
        g = 1 + k % 3
        A = sp.random_symplectic(g, rng)
        if not sp.lefschetz_series_check(A, g, 5):
            bad += 1
    ok = bad == 0
    report(f"criterion 7: {verdict(ok)} - alternating traces vs det(I-tA)/(1-t)^2 on 100 random "
           f"symplectic matrices (g<=3, d<=5): {bad} mismatches")
    assert ok


def test_criterion_08_nielsen_nonvanishing():
    rng = random.Random(7)
    counts = {}
    for g in (3, 4, 5):
        counts[g] = sum(not sp.nielsen_triple(sp.random_symplectic(g, rng), g)[3] for _ in range(500))
    ok = all(v == 0 for v in counts.values())
    report(f"criterion 8: {verdict(ok)} - 500 random symplectic matrices per g in (3,4,5), "
           f"violations {counts}")
    assert ok


def test_criterion_09_local_model_oracle():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(1000):
        a = 1 + 4 * (1 - rng.uniform())
        z1, z2 = (rng.uniform(0, 1, 2) ** 0.5 * np.exp(2j * np.pi * rng.uniform(0, 1, 2)))
        p = sp.LocalModelParams(float(a))
        s1, s2 = complex(z1 + z2), complex(z1 * z2)
        t = sp.s2_local_model(p, s1, s2)
        o = sp.s2_root_oracle(p, s1, s2)
        worst = max(worst, abs(t[0] - o[0]), abs(t[1] - o[1]))
    fixed = {}
    for a in (1.01, 1.5, 2.0, 5.0):
        fixed[a] = sp.s2_fixed_points(sp.LocalModelParams(a), grid=400)
    sole = all(len(v) == 1 and abs(v[0][0]) < 1e-9 and abs(v[0][1]) < 1e-9 for v in fixed.values())
    ok = worst <= 1e-12 and sole
    report(f"criterion 9: {verdict(ok)} - local model vs root oracle on 1000 inputs, max deviation "
           f"{worst:.2e} (<= 1e-12); fixed points on the 400^2 grid: "
           f"{ {a: len(v) for a, v in fixed.items()} } (only the origin expected)")
    assert ok


def test_criterion_10_bifurcation_algebra():
    t0 = time.perf_counter()
    rng = random.Random(31)
    failures = []
    for k in range(200):
        C, v, mu, alpha, z2 = ch.random_constrained_instance(rng, max_size=12)
        out = ch.death_birth_extend(C, v, mu, alpha, new_z2=z2)
        Dm, Dp, i, p, K = C.differential, out.dplus.differential, out.i, out.p, out.K
        n = C.size
        ip = nmatmul(i, p)
        lhs = [[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(nmatmul(Dp, K), nmatmul(K, Dp))]
        rhs = [[(1 if r == c else 0) - ip[r][c] for c in range(n + 2)] for r in range(n + 2)]
        checks = (ch.check_complex(out.dplus).ok,
                  nequal(nmatmul(Dp, i), nmatmul(i, Dm)),
                  nequal(nmatmul(p, Dp), nmatmul(Dm, p)),
                  nequal(nmatmul(p, i), nidentity(n)),
                  nequal(lhs, rhs),
                  ch.homology_ranks(out.dplus) == ch.homology_ranks(C))
        if not all(checks):
            failures.append(("death-birth", k, checks))
    for k in range(200):
        C = ch.random_standard_complex(rng, rng.randint(0, 5), rng.randint(0, 2))
        if C.size == 0:
            continue
        C = ch.NovikovChainComplex([ch.Generator(g.name, g.z2, g.z2) for g in C.generators], C.differential)
        C2, _ = ch.handleslide_transform(C, ch.random_slides(rng, C, rng.randint(1, 6), nilpotent=False))
        if not ch.check_complex(C2) or ch.homology_ranks(C2) != ch.homology_ranks(C):
            failures.append(("handleslide", k))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    report(f"criterion 10: {verdict(ok)} - 200 death-birth instances (identities and ranks) and 200 "
           f"handleslide instances: {len(failures)} failures, {elapsed:.1f}s (< 60s)")
    assert ok


def test_criterion_11_spinc_lattice():
    rng = random.Random(11)
    invariant = True
    for _ in range(50):
        n = rng.randint(2, 5)
        c1 = [rng.randint(-20, 20) for _ in range(n)]
        U = sympy.eye(n)
        for _ in range(10):
            i, j = rng.sample(range(n), 2)
            E = sympy.eye(n)
            E[i, j] = rng.choice((-3, -1, 1, 2))
            U = U * E
        moved = [int(v) for v in sympy.Matrix([c1]) * U]
        a = grading_divisor(SpincLattice(tuple(c1), (0,) * n, (1,) * n))
        b = grading_divisor(SpincLattice(tuple(moved), (0,) * n, (1,) * n))
        invariant &= a == b
    annihilate = True
    flags = True
    for _ in range(50):
        n = rng.randint(2, 5)
        e = [rng.randint(-6, 6) for _ in range(n)]
        h = [2 * rng.randint(-3, 3) for _ in range(n)]
        c1 = [x + y for x, y in zip(e, h)]
        proportional = rng.random() < 0.5 and any(c1)
        if proportional:
            lam = rng.choice((0.5, -1.0, math.sqrt(2), Fraction(3, 7)))
            c = [float(lam * v) for v in c1]
        else:
            c = [rng.uniform(-2, 2) for _ in range(n)]
        lat = SpincLattice(tuple(e), tuple(h), tuple(c))
        desc = ring_descriptors(lat)
        annihilate &= all(sum(k * x for k, x in zip(kv, lat.c1_vector)) == 0 for kv in desc.kernel_basis)
        flags &= desc.base_ring_only == proportional == is_proportional(lat)
    ok = invariant and annihilate and flags
    report(f"criterion 11: {verdict(ok)} - gcd invariant under 50 unimodular changes: {invariant}; "
           f"kernel bases annihilate c1: {annihilate}; flag fires exactly for proportional c: {flags}")
    assert ok
