"""Adiabatic transport of vortices along a straight path of flat moduli.

For a modulus path rho(t) the horizontal velocity of a vortex (A, theta) is
theta_dot = -i dbar_A^* eta where eta = f dzeta_bar solves

    1/2 (-Lap_A + tau (1 + |theta|^2)) f = -(rho_dot / (2 Im rho)) D_zeta theta.

Here zeta is the unit-speed holomorphic coordinate and the left side is the
Weitzenbock form of dbar_A dbar_A^* + tau |theta|^2 on (0,1)-forms.  Since
gauge classes of vortices are determined by their zeros, the flow is
integrated on the zero positions: theta(t, p(t)) = 0 gives
zeta_dot(p) = -theta_dot(p) / D_zeta theta(p), and the field is re-solved at
every RK4 stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import torus as tg
from .errors import (CGStall, DegreeMismatch, DriftExceeded, MatchingDegenerate,
                     PreconditionError)
from .torus import FlatTorus, GridField
from .vortex import Divisor, VortexField, solve_vortex, vortex_residual


@dataclass(frozen=True)
class TransportState:
    t: float
    torus_t: FlatTorus
    field: VortexField
    tau: float
    positions: np.ndarray
    path: tuple
    residual: float = 0.0

    @property
    def rho_dot(self) -> complex:
        return complex(self.path[1]) - complex(self.path[0])


@dataclass
class TransportTrace:
    times: list = field(default_factory=list)
    divisors: list = field(default_factory=list)
    tracked: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    cg_iterations: list = field(default_factory=list)
    displacement: float = math.nan
    tracked_displacement: float = math.nan
    grid_n: int = 0
    tau: float = math.nan


# --- zero detection --------------------------------------------------------

def plaquette_winding(theta: np.ndarray, links) -> np.ndarray:
    """Integer winding of theta around each plaquette, gauge invariantly."""
    ux, uy = links

    def diff(axis, link):
        nxt = np.roll(theta, -1, axis=axis)
        return np.angle(np.conj(theta) * link * nxt)

    dx = diff(0, ux)
    dy = diff(1, uy)
    circ = dx + np.roll(dy, -1, axis=0) - np.roll(dx, -1, axis=1) - dy
    hol = ux * np.roll(uy, -1, axis=0) * np.conj(np.roll(ux, -1, axis=1)) * np.conj(uy)
    return np.rint((circ - np.angle(hol)) / (2 * math.pi)).astype(int)


def _clusters(mask: np.ndarray) -> list[list[tuple[int, int]]]:
    n = mask.shape[0]
    seen = np.zeros_like(mask)
    out = []
    for i, j in zip(*np.nonzero(mask)):
        if seen[i, j]:
            continue
        stack = [(i, j)]
        seen[i, j] = True
        comp = []
        while stack:
            a, b = stack.pop()
            comp.append((a, b))
            for da in (-1, 0, 1):
                for db in (-1, 0, 1):
                    c, d = (a + da) % n, (b + db) % n
                    if mask[c, d] and not seen[c, d]:
                        seen[c, d] = True
                        stack.append((c, d))
        out.append(sorted(comp))
    return out


def locate_zeros(theta: np.ndarray, links, expected_degree: int | None = None) -> Divisor:
    """Zeros of theta as winding-weighted centroids of plaquette clusters."""
    n = theta.shape[0]
    wind = plaquette_winding(theta, links)
    hol = links[0] * np.roll(links[1], -1, axis=0) * np.conj(np.roll(links[0], -1, axis=1)) * np.conj(links[1])
    flux_degree = int(round(float(-np.angle(hol).sum()) / (2 * math.pi)))
    degree = flux_degree if expected_degree is None else expected_degree
    if int(wind.sum()) != degree:
        raise DegreeMismatch(f"windings sum to {int(wind.sum())}, expected {degree}")
    pts = []
    for comp in _clusters(wind != 0):
        i0, j0 = comp[0]
        weights = np.array([wind[c] for c in comp], dtype=float)
        total = int(weights.sum())
        if total <= 0:
            raise DegreeMismatch("cluster with nonpositive net winding")
        # unwrap around the first plaquette; plaquette (i, j) is centred at ((i+1)/n, (j+1)/n)
        di = np.array([((c[0] - i0 + n // 2) % n) - n // 2 for c in comp], dtype=float)
        dj = np.array([((c[1] - j0 + n // 2) % n) - n // 2 for c in comp], dtype=float)
        cx = (i0 + 1 + np.dot(weights, di) / weights.sum()) / n
        cy = (j0 + 1 + np.dot(weights, dj) / weights.sum()) / n
        pts.append(((cx % 1.0, cy % 1.0), total))
    return Divisor(tuple(pts))


def match_displacement(torus: FlatTorus, d0: Divisor, d1: Divisor) -> float:
    """Largest matched distance under an optimal bipartite matching."""
    a = d0.expanded()
    b = d1.expanded()
    if len(a) != len(b):
        raise MatchingDegenerate(f"degree changed from {len(a)} to {len(b)}")
    if not a:
        return 0.0
    cost = np.array([[tg.geodesic_distance(torus, p, q) for q in b] for p in a])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


# --- lattice operators ------------------------------------------------------

def _roll(f, sx, sy):
    return np.roll(np.roll(f, -sx, axis=0), -sy, axis=1)


def diagonal_link(links, sign: int) -> np.ndarray:
    """Link from n to n + x + sign*y as the mean of the two lattice paths."""
    ux, uy = links
    if sign > 0:
        p1 = ux * _roll(uy, 1, 0)
        p2 = uy * _roll(ux, 0, 1)
    else:
        p1 = ux * np.conj(_roll(uy, 1, -1))
        p2 = np.conj(_roll(uy, 0, -1)) * _roll(ux, 0, -1)
    return p1 * np.sqrt(p2 / p1)


def stencil_weights(torus: FlatTorus):
    """Positive weights (alpha, beta, gamma, diag sign) with
    -Lap = alpha S_x + beta S_y + gamma S_diag."""
    a, b, area = torus.a, torus.b, torus.area
    r2 = abs(torus.modulus) ** 2
    if a >= 0:
        al, be, ga, sg = (r2 - a) / (b * area), (1 - a) / (b * area), a / (b * area), -1
    else:
        al, be, ga, sg = (r2 + a) / (b * area), (1 + a) / (b * area), -a / (b * area), 1
    if al < -1e-12 or be < -1e-12:
        raise PreconditionError("modulus outside the range of the positive stencil (|Re rho| <= 1 required)")
    al, be = max(al, 0.0), max(be, 0.0)
    return al, be, ga, sg


class CovariantOps:
    """Gauge covariant difference operators for one field."""

    def __init__(self, torus: FlatTorus, links):
        self.torus = torus
        self.ux, self.uy = links
        self.al, self.be, self.ga, self.sg = stencil_weights(torus)
        self.ud = diagonal_link(links, self.sg)
        n = torus.grid_n
        k1, k2 = torus.wavenumbers
        h = torus.h

        def s(k):
            return (2 - 2 * np.cos(2 * math.pi * k / n)) / h ** 2

        self.free_symbol = self.al * s(k1) + self.be * s(k2) + self.ga * s(k1 + self.sg * k2)

    def _second(self, f, link, sx, sy):
        fwd = link * _roll(f, sx, sy)
        bwd = np.conj(_roll(link, -sx, -sy)) * _roll(f, -sx, -sy)
        return (2 * f - fwd - bwd) / self.torus.h ** 2

    def neg_laplacian(self, f):
        return (self.al * self._second(f, self.ux, 1, 0)
                + self.be * self._second(f, self.uy, 0, 1)
                + self.ga * self._second(f, self.ud, 1, self.sg))

    def d_zeta(self, f):
        h = self.torus.h
        dx = (self.ux * _roll(f, 1, 0) - np.conj(_roll(self.ux, -1, 0)) * _roll(f, -1, 0)) / (2 * h)
        dy = (self.uy * _roll(f, 0, 1) - np.conj(_roll(self.uy, 0, -1)) * _roll(f, 0, -1)) / (2 * h)
        t = self.torus
        dw = (dy - np.conj(t.modulus) * dx) / (2j * t.b)
        return math.sqrt(t.b / t.area) * dw


def eta_operator(ops: CovariantOps, theta: np.ndarray, tau: float):
    pot = tau * (1 + np.abs(theta) ** 2)

    def apply(f):
        return 0.5 * (ops.neg_laplacian(f) + pot * f)

    return apply


def eta_rhs(ops: CovariantOps, theta: np.ndarray, rho_dot: complex) -> np.ndarray:
    return -(rho_dot / (2 * ops.torus.b)) * ops.d_zeta(theta)


def _cg(apply, precond, rhs, tol, maxiter=20000):
    """Preconditioned CG stopping on the sup norm of the true residual."""
    x = np.zeros_like(rhs)
    if not np.any(rhs):
        return x, 0, 0.0
    r = rhs.copy()
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z).real
    checkpoint = np.linalg.norm(r)
    for it in range(1, maxiter + 1):
        ap = apply(p)
        alpha = rz / np.vdot(p, ap).real
        x += alpha * p
        r -= alpha * ap
        if np.abs(r).max() < 0.5 * tol:
            true = np.abs(rhs - apply(x)).max()
            if true < tol:
                return x, it, float(true)
            r = rhs - apply(x)
        if it % 100 == 0:
            now = np.linalg.norm(r)
            if now > checkpoint / 10:
                raise CGStall(f"residual fell only {checkpoint / now:.2f}x over 100 iterations")
            checkpoint = now
        z = precond(r)
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise CGStall(f"no convergence in {maxiter} iterations")


def solve_eta_detailed(state: TransportState, jdot: complex, tol: float = 1e-8):
    """Return (f, iterations, residual) for the eta equation."""
    vf = state.field
    ops = CovariantOps(state.torus_t, vf.link_phases)
    rhs = eta_rhs(ops, vf.theta, complex(jdot))
    apply = eta_operator(ops, vf.theta, state.tau)
    shift = state.tau * (1 + np.mean(np.abs(vf.theta) ** 2))
    sym = 0.5 * (ops.free_symbol + shift)

    def precond(r):
        return tg.ifft2(tg.fft2(r) / sym)

    return _cg(apply, precond, rhs, tol)


def solve_eta(state: TransportState, jdot: complex, tol: float = 1e-8) -> GridField:
    f, _, _ = solve_eta_detailed(state, jdot, tol)
    return GridField(state.torus_t, f)


def theta_dot(state: TransportState, f: np.ndarray) -> np.ndarray:
    """-i dbar_A^* eta for eta = f dzeta_bar (|dzeta_bar|^2 = 2)."""
    ops = CovariantOps(state.torus_t, state.field.link_phases)
    return 2j * ops.d_zeta(f)


def _poly_design(X, Y, degree=4):
    cols = [X ** i * Y ** (k - i) for k in range(degree + 1) for i in range(k + 1)]
    return np.stack(cols, axis=1)


def zero_velocity(state: TransportState, tdot: np.ndarray) -> np.ndarray:
    """Parameter-space velocity of each (simple) zero."""
    torus = state.torus_t
    theta = state.field.theta
    x, y = torus.coords()
    scale = math.sqrt(torus.area / torus.b)
    hg = math.sqrt(torus.area) / torus.grid_n
    sigma = max(0.25 / math.sqrt(state.tau), 2 * hg)
    out = []
    for p in state.positions:
        dx, dy = tg.relative_offsets(torus, p % 1.0, x, y)
        zeta = scale * (dx + torus.modulus * dy)
        r = np.abs(zeta)
        sel = (r < 6 * sigma) & (r > 0.3 * hg)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = tdot[sel] * zeta[sel] / theta[sel]
        wts = np.exp(-(r[sel] / sigma) ** 2 / 2)
        X, Y = zeta[sel].real / sigma, zeta[sel].imag / sigma
        design = _poly_design(X, Y) * wts[:, None]
        coef, *_ = np.linalg.lstsq(design, s * wts, rcond=None)
        zdot = -coef[0]
        wdot = zdot / scale
        ydot = wdot.imag / torus.b
        xdot = wdot.real - torus.a * ydot
        out.append((xdot, ydot))
    return np.array(out).reshape(-1, 2)


# --- integration ------------------------------------------------------------

def _solve_at(torus: FlatTorus, positions, tau: float, v0=None) -> VortexField:
    div = Divisor(tuple(((float(px), float(py)), 1) for px, py in positions))
    vf, _ = solve_vortex(torus, div, tau, v0=v0, fit_decay=False)
    return vf


def initial_state(path, divisor: Divisor, tau: float, grid_n: int = 256) -> TransportState:
    if any(m != 1 for _, m in divisor.points):
        raise PreconditionError("transport needs simple zeros (multiplicity one)")
    torus = tg.complex_structure_path(path[0], path[1], 0.0, grid_n)
    vf, _ = solve_vortex(torus, divisor, tau, fit_decay=False)
    res = max(vortex_residual(vf))
    return TransportState(0.0, torus, vf, float(tau), divisor.positions().copy(),
                          (complex(path[0]), complex(path[1])), res)


def velocity(state: TransportState, stats: list | None = None) -> np.ndarray:
    rho_dot = state.rho_dot
    if rho_dot == 0:
        return np.zeros_like(state.positions)
    f, iters, _ = solve_eta_detailed(state, rho_dot)
    if stats is not None:
        stats.append(iters)
    return zero_velocity(state, theta_dot(state, f))


def _stage(state: TransportState, t: float, positions) -> TransportState:
    torus = tg.complex_structure_path(state.path[0], state.path[1], t, state.torus_t.grid_n, state.torus_t.area)
    vf = _solve_at(torus, positions, state.tau, v0=state.field.v)
    return replace(state, t=t, torus_t=torus, field=vf, positions=np.array(positions, dtype=float))


def dt_max(tau: float) -> float:
    return 0.5 / math.sqrt(tau)


def transport_step(state: TransportState, dt: float, *, drift_const: float = 1.0,
                   drift_floor: float = 1e-4, stats: list | None = None) -> TransportState:
    """One RK4 step of the zero flow, re-solving the field at each stage."""
    if abs(dt) > dt_max(state.tau) * (1 + 1e-12):
        raise PreconditionError(f"|dt| = {abs(dt)} exceeds dt_max = {dt_max(state.tau)}")
    if state.rho_dot == 0:
        return replace(state, t=state.t + dt)
    p0 = state.positions
    k1 = velocity(state, stats)
    s2 = _stage(state, state.t + dt / 2, p0 + dt / 2 * k1)
    k2 = velocity(s2, stats)
    s3 = _stage(s2, state.t + dt / 2, p0 + dt / 2 * k2)
    k3 = velocity(s3, stats)
    s4 = _stage(s3, state.t + dt, p0 + dt * k3)
    k4 = velocity(s4, stats)
    p1 = p0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    new = _stage(s4, state.t + dt, p1)
    res = max(vortex_residual(new.field))
    if res > state.residual + drift_const * abs(dt) ** 5 and res > drift_floor:
        raise DriftExceeded(f"residual {res:.3e} after step from {state.residual:.3e}")
    return replace(new, residual=res)


def transport(path, divisor: Divisor, tau: float, steps: int, grid_n: int = 256) -> TransportTrace:
    """Transport a vortex configuration from rho0 to rho1."""
    state = initial_state(path, divisor, tau, grid_n)
    nsteps = max(int(steps), int(math.ceil(1.0 / dt_max(tau) - 1e-9)))
    dt = 1.0 / nsteps
    trace = TransportTrace(grid_n=grid_n, tau=float(tau))
    d0 = locate_zeros(state.field.theta, state.field.link_phases, divisor.degree)
    trace.times.append(0.0)
    trace.divisors.append(d0)
    trace.tracked.append(state.positions % 1.0)
    trace.residuals.append(state.residual)
    for k in range(nsteps):
        stats = []
        state = transport_step(state, dt, stats=stats)
        trace.cg_iterations.append(int(sum(stats)))
        dk = locate_zeros(state.field.theta, state.field.link_phases, divisor.degree)
        if dk.degree != divisor.degree:
            raise MatchingDegenerate("zero detection lost degree")
        trace.times.append((k + 1) * dt)
        trace.divisors.append(dk)
        trace.tracked.append(state.positions % 1.0)
        trace.residuals.append(state.residual)
    trace.displacement = match_displacement(state.torus_t, trace.divisors[0], trace.divisors[-1])
    start = Divisor(tuple(((float(a), float(b)), 1) for a, b in trace.tracked[0]))
    end = Divisor(tuple(((float(a), float(b)), 1) for a, b in trace.tracked[-1]))
    trace.tracked_displacement = match_displacement(state.torus_t, start, end)
    return trace
