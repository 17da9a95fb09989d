import math
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from vfl import torus as tg
from vfl.errors import DegreeMismatch, PreconditionError
from vfl.transport import (CovariantOps, eta_operator, eta_rhs, initial_state,
                           locate_zeros, match_displacement, solve_eta, solve_eta_detailed,
                           stencil_weights, transport, transport_step, velocity)
from vfl.vortex import Divisor, gauge_transform

PATH = (1j, 1 + 2j)
PAIR = Divisor((((0.3, 0.4), 1), ((0.7, 0.6), 1)))
CENTER = Divisor((((0.5, 0.5), 1),))
_states: dict = {}


def state_for(div, tau, n=128, path=PATH):
    key = (div, tau, n, path)
    if key not in _states:
        _states[key] = initial_state(path, div, tau, grid_n=n)
    return _states[key]


def oracle_neg_laplacian(torus, links, f):
    """Covariant second differences built direction by direction from link products."""
    a, b, area = torus.a, torus.b, torus.area
    h = 1.0 / torus.grid_n
    ux, uy = links
    shift = lambda g, sx, sy: np.roll(g, (-sx, -sy), axis=(0, 1))  # noqa: E731
    # weights of the x, y and the diagonal direction whose sign matches -sign(a)
    sgn = -1 if a >= 0 else 1
    wx = (abs(torus.modulus) ** 2 - abs(a)) / (b * area)
    wy = (1 - abs(a)) / (b * area)
    wd = abs(a) / (b * area)
    if sgn < 0:
        up = ux * np.conj(shift(uy, 1, -1))
        alt = np.conj(shift(uy, 0, -1)) * shift(ux, 0, -1)
    else:
        up = ux * shift(uy, 1, 0)
        alt = uy * shift(ux, 0, 1)
    ud = up * np.sqrt(alt / up)
    out = np.zeros_like(f)
    for w, u, sx, sy in ((wx, ux, 1, 0), (wy, uy, 0, 1), (wd, ud, 1, sgn)):
        if w == 0:
            continue
        fwd = u * shift(f, sx, sy)
        bwd = np.conj(shift(u, -sx, -sy)) * shift(f, -sx, -sy)
        out += w * (2 * f - fwd - bwd) / h ** 2
    return out


def test_no_motion_gives_zero_eta():
    st = state_for(CENTER, 100.0)
    assert not np.any(solve_eta(st, 0.0).values)


def test_constant_path_step_is_identity():
    st = state_for(PAIR, 100.0, path=(1j, 1j))
    nxt = transport_step(st, 0.05)
    assert np.array_equal(nxt.positions, st.positions)
    assert nxt.t == pytest.approx(0.05)


def test_eta_residual_against_independent_stencil():
    st = state_for(PAIR, 100.0)
    f, iters, res = solve_eta_detailed(st, st.rho_dot, tol=1e-9)
    ops = CovariantOps(st.torus_t, st.field.link_phases)
    theta = st.field.theta
    lhs = 0.5 * (oracle_neg_laplacian(st.torus_t, st.field.link_phases, f)
                 + st.tau * (1 + np.abs(theta) ** 2) * f)
    rhs = eta_rhs(ops, theta, st.rho_dot)
    assert np.abs(lhs - rhs).max() < 1e-8
    assert res < 1e-9 and iters > 0


def test_stencil_reproduces_flat_laplacian():
    t = tg.FlatTorus(0.4 + 0.9j, 32)
    one = np.ones((32, 32), dtype=complex)
    ops = CovariantOps(t, (one, one))
    x, y = t.coords()
    f = np.exp(2j * math.pi * (x + 2 * y))
    exact = -tg.laplacian(t, f)
    assert np.abs(ops.neg_laplacian(f) - exact).max() / np.abs(exact).max() < 0.05
    assert all(w >= 0 for w in stencil_weights(t)[:3])


def test_stencil_rejects_sheared_modulus():
    with pytest.raises(PreconditionError):
        stencil_weights(tg.FlatTorus(1.5 + 0.5j, 8))


def test_cg_iterations_do_not_grow_with_tau():
    counts = []
    for tau in (100.0, 400.0):
        st = state_for(CENTER, tau)
        counts.append(solve_eta_detailed(st, st.rho_dot)[1])
    assert counts[1] <= counts[0]


@pytest.mark.parametrize("tau", [100.0, 400.0])
def test_eta_operator_is_hermitian_and_coercive(tau):
    st = state_for(CENTER, tau, n=16)
    ops = CovariantOps(st.torus_t, st.field.link_phases)
    ap = eta_operator(ops, st.field.theta, tau)
    n = 16 * 16
    M = np.empty((n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1
        M[:, k] = ap(e.reshape(16, 16)).ravel()
    assert np.abs(M - M.conj().T).max() < 1e-10
    assert np.linalg.eigvalsh(M).min() >= tau / 4


def test_rk4_step_defect_is_fifth_order():
    st = state_for(PAIR, 100.0)

    def defect(dt):
        coarse = transport_step(st, dt)
        fine = st
        for _ in range(8):
            fine = transport_step(fine, dt / 8)
        return np.abs(coarse.positions - fine.positions).max()

    ratio = defect(0.05) / defect(0.025)
    assert 16 <= ratio <= 64


def test_step_then_reverse_returns():
    st = state_for(PAIR, 100.0)
    back = transport_step(transport_step(st, 0.05), -0.05)
    assert np.abs(back.positions - st.positions).max() < 1e-10


def test_step_size_limit():
    st = state_for(CENTER, 100.0)
    with pytest.raises(PreconditionError):
        transport_step(st, 0.2)


def test_velocity_is_gauge_invariant():
    st = state_for(PAIR, 100.0)
    x, y = st.torus_t.coords()
    g = np.exp(1j * (np.sin(2 * math.pi * x) + 0.5 * np.cos(2 * math.pi * (x + y))))
    moved = replace(st, field=gauge_transform(st.field, g))
    assert np.abs(velocity(moved) - velocity(st)).max() < 1e-10
    a = locate_zeros(st.field.theta, st.field.link_phases)
    b = locate_zeros(moved.field.theta, moved.field.link_phases)
    assert a == b


def test_single_centred_vortex_does_not_move():
    st = state_for(CENTER, 100.0)
    assert np.abs(velocity(st)).max() < 1e-12


@pytest.mark.slow
def test_symmetric_pair_displacement_within_bound():
    tau = 100.0
    trace = transport(PATH, PAIR, tau, steps=20, grid_n=128)
    start, end = trace.tracked[0], trace.tracked[-1]
    moves = [tg.geodesic_distance(tg.FlatTorus(PATH[1]), tuple(p), tuple(q)) for p, q in zip(start, end)]
    assert moves[0] == pytest.approx(moves[1], rel=1e-6, abs=1e-12)
    assert max(moves) <= math.log(tau) / math.sqrt(tau)
    assert max(trace.residuals) <= 1e-4
    assert trace.displacement <= 2 / 128


def test_zero_free_field_gives_empty_divisor():
    one = np.ones((16, 16), dtype=complex)
    assert locate_zeros(one, (one, one)).points == ()
    with pytest.raises(DegreeMismatch):
        locate_zeros(one, (one, one), expected_degree=1)


def test_matching_uses_optimal_assignment():
    t = tg.FlatTorus(1j)
    a = Divisor((((0.1, 0.1), 1), ((0.5, 0.5), 1)))
    b = Divisor((((0.52, 0.5), 1), ((0.11, 0.1), 1)))
    assert match_displacement(t, a, b) == pytest.approx(0.02)


def theta_section(n, zeros):
    """Degree-len(zeros) section on the square torus from Jacobi theta products.

    Sampled on the fundamental square, with seam links equal to the
    quasi-periodicity factors and trivial links elsewhere."""
    tq = mpmath.exp(-mpmath.pi)
    d = len(zeros)
    sy = sum(z[1] for z in zeros)

    def section(x, y):
        w = x + 1j * y
        val = mpmath.mpf(1)
        for zx, zy in zeros:
            val *= mpmath.jtheta(1, mpmath.pi * (w - (zx + 1j * zy)), tq)
        return complex(val * mpmath.exp(-mpmath.pi * d * y * y + 2 * mpmath.pi * sy * y
                                        + 1j * mpmath.pi * (d * x * y)))

    c = (np.arange(n) + 0.5) / n
    theta = np.array([[section(x, y) for y in c] for x in c])
    ux = np.ones((n, n), dtype=complex)
    uy = np.ones((n, n), dtype=complex)
    for j, y in enumerate(c):
        f = section(c[0] + 1, y) / theta[0, j]
        ux[-1, j] = f / abs(f)
    for i, x in enumerate(c):
        f = section(x, c[0] + 1) / theta[i, 0]
        uy[i, -1] = f / abs(f)
    return theta, (ux, uy)


def test_locator_on_independent_theta_section():
    zeros = [(0.31, 0.22), (0.68, 0.71)]
    theta, links = theta_section(48, zeros)
    found = locate_zeros(theta, links)
    assert found.degree == 2 and len(found.points) == 2
    t = tg.FlatTorus(1j, 48)
    got = sorted(p for p, _ in found.points)
    for z, p in zip(sorted(zeros), got):
        assert tg.geodesic_distance(t, z, p) <= 1.0 / 48
