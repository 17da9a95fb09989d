"""U(1) vortices on a flat torus via a scalar elliptic reduction.

With u = log|theta|^2 the vortex equations reduce to

    Lap u = 2 tau (e^u - 1) + 4 pi sum_j m_j delta_{p_j},

and u = s + v where s = sum_j 4 pi m_j G_{p_j} uses the exact Green function.
The smooth periodic part v is found by damped Newton iteration on a strictly
convex energy.  theta is returned in the gauge where it is real and
nonnegative; the connection is stored as unit link variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import torus as tg
from .errors import (InsufficientAnnulus, NewtonDivergence, NonAdmissibleTau,
                     PreconditionError)
from .torus import FlatTorus


@dataclass(frozen=True)
class Divisor:
    points: tuple = ()

    def __post_init__(self):
        pts = []
        for entry in self.points:
            (x, y), m = entry
            if int(m) != m or m < 1:
                raise PreconditionError("multiplicities must be positive integers")
            pts.append(((float(x) % 1.0, float(y) % 1.0), int(m)))
        for i in range(len(pts)):
            for j in range(i):
                if pts[i][0] == pts[j][0]:
                    raise PreconditionError("coincident divisor points must be merged")
        object.__setattr__(self, "points", tuple(pts))

    @classmethod
    def from_list(cls, rows) -> "Divisor":
        return cls(tuple(((r[0], r[1]), r[2] if len(r) > 2 else 1) for r in rows))

    @property
    def degree(self) -> int:
        return sum(m for _, m in self.points)

    def positions(self) -> np.ndarray:
        return np.array([p for p, _ in self.points], dtype=float).reshape(-1, 2)

    def expanded(self) -> list[tuple[float, float]]:
        """Points repeated according to multiplicity, sorted lexicographically."""
        return sorted(p for p, m in self.points for _ in range(m))


@dataclass(frozen=True)
class SolveReport:
    newton_iters: int
    final_residual: float
    mass: float
    decay_rate: float
    history: tuple = ()

    def as_dict(self) -> dict:
        return {"newton_iters": self.newton_iters, "final_residual": self.final_residual,
                "mass": self.mass, "decay_rate": self.decay_rate}


@dataclass(frozen=True)
class VortexField:
    torus: FlatTorus
    tau: float
    divisor: Divisor
    u: np.ndarray
    theta: np.ndarray
    link_phases: tuple
    v: np.ndarray = field(repr=False)

    @property
    def w(self) -> np.ndarray:
        return -np.expm1(self.u)


# --- singular part and links ---------------------------------------------

def singular_part(torus: FlatTorus, divisor: Divisor, x=None, y=None) -> np.ndarray:
    s = 0.0
    for p, m in divisor.points:
        s = s + 4 * math.pi * m * tg.green_exact(torus, p, x, y)
    if np.isscalar(s):
        shape = torus.coords()[0].shape if x is None else np.shape(x)
        s = np.full(shape, float(s))
    return s


def _step_symbol(torus: FlatTorus, ex: int, ey: int) -> np.ndarray:
    """Symbol of the exact line integral of *d(.) along the step (ex, ey) h."""
    k1, k2 = torus.wavenumbers
    a, b, h = torus.a, torus.b, torus.h
    rho2 = abs(torus.modulus) ** 2
    comp = ((a * k1 - k2) * ex + (rho2 * k1 - a * k2) * ey) / b
    t = h * (k1 * ex + k2 * ey)
    with np.errstate(divide="ignore", invalid="ignore"):
        avg = np.where(t == 0, 1.0, (np.exp(2j * math.pi * t) - 1) / (2j * math.pi * np.where(t == 0, 1, t)))
    sym = 2j * math.pi * comp * h * avg
    return np.where(torus.nyquist, 0.0, sym)


def _singular_link(torus: FlatTorus, p, m: int, ex: int, ey: int):
    """Phase factor and complex log increment of the singular part on links."""
    x, y = torus.coords()
    dx, dy = tg.relative_offsets(torus, p, x, y)
    h, a, b, rho = torus.h, torus.a, torus.b, torus.modulus
    w0 = dx + rho * dy
    w1 = w0 + h * (ex + rho * ey)
    t0, _ = tg.theta1(math.pi * w0, rho)
    t1, _ = tg.theta1(math.pi * w1, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = t1 / t0
    bad = ~np.isfinite(ratio) | (ratio == 0)
    ratio = np.where(bad, 1.0, ratio)
    iq = h * (ex + a * ey) * (dy + ey * h / 2)
    dq = -b / 2 * ((dy + ey * h) ** 2 - dy ** 2)
    phase = (ratio / np.abs(ratio)) ** m * np.exp(2j * math.pi * m * iq)
    logincr = m * np.log(ratio) + 2 * math.pi * m * (dq + 1j * iq)
    return phase, logincr


def build_links(torus: FlatTorus, divisor: Divisor, v: np.ndarray, step=(1, 0)) -> np.ndarray:
    """Unit link variables exp(i int *d(u/2)) for the real gauge."""
    ex, ey = step
    vint = tg.ifft2(tg.fft2(v / 2) * _step_symbol(torus, ex, ey)).real
    link = np.exp(1j * vint)
    for p, m in divisor.points:
        phase, _ = _singular_link(torus, p, m, ex, ey)
        link = link * phase
    return link


# --- Newton solve ----------------------------------------------------------

def _pcg(apply, precond, rhs, rtol, maxiter=500):
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = precond(r)
    pvec = z.copy()
    rz = np.vdot(r, z).real
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0:
        return x, 0
    for it in range(1, maxiter + 1):
        ap = apply(pvec)
        alpha = rz / np.vdot(pvec, ap).real
        x += alpha * pvec
        r -= alpha * ap
        if np.linalg.norm(r) <= rtol * bnorm:
            return x, it
        z = precond(r)
        rz_new = np.vdot(r, z).real
        pvec = z + (rz_new / rz) * pvec
        rz = rz_new
    return x, maxiter


def check_separation(torus: FlatTorus, divisor: Divisor, cells: float = 2.0) -> None:
    pts = divisor.positions()
    n = torus.grid_n
    for i in range(len(pts)):
        for j in range(i):
            dx, dy = tg.wrap_delta(pts[i] - pts[j])
            if max(abs(dx), abs(dy)) * n < cells:
                raise PreconditionError("divisor points closer than two grid cells")


def solve_vortex(torus: FlatTorus, divisor: Divisor, tau: float, *, tol: float = 1e-10,
                 max_iter: int = 50, v0: np.ndarray | None = None,
                 separation: bool = True, fit_decay: bool = True):
    """Solve the vortex equations with zero divisor `divisor` at coupling tau."""
    d = divisor.degree
    area = torus.area
    if tau * area <= 2 * math.pi * d:
        raise NonAdmissibleTau(f"tau*area = {tau * area} <= 2 pi d = {2 * math.pi * d}")
    if separation:
        check_separation(torus, divisor)
    n = torus.grid_n
    s = singular_part(torus, divisor)
    es = np.exp(s)
    c0 = 4 * math.pi * d / area
    lam = tg.rfft_symbol(torus, torus.laplacian_symbol)

    def lap(f):
        return tg.irfft2(tg.rfft2(f) * lam, n)

    if v0 is None:
        # constant start matching the mass identity
        v = np.full((n, n), math.log((1 - 2 * math.pi * d / (tau * area)) / es.mean()))
    else:
        v = np.array(v0, dtype=float)

    def energy(vv, e):
        return np.mean(0.5 * vv * -lap(vv) + 2 * tau * (e - vv) + c0 * vv)

    history = []
    floor = 1e-8 * (1 + 2 * tau)
    e = es * np.exp(v)
    for it in range(max_iter + 1):
        F = lap(v) - 2 * tau * (e - 1) - c0
        r = float(np.abs(F).max())
        history.append(r)
        if r < tol:
            break
        if len(history) > 3 and r < floor and r > 0.5 * min(history[-4:-1]):
            break  # stagnated at the rounding floor
        if it == max_iter:
            break
        ebar = e.mean()

        def apply(x):
            return -lap(x) + 2 * tau * e * x

        def precond(x):
            return tg.irfft2(tg.rfft2(x) / (-lam + 2 * tau * ebar), n)

        step, _ = _pcg(apply, precond, F, 1e-12)
        e0 = energy(v, e)
        slope = -np.mean(F * step)
        t = 1.0
        for _ in range(40):
            vt = v + t * step
            et = es * np.exp(vt)
            if energy(vt, et) <= e0 + 1e-4 * t * slope + 1e-14 * abs(e0):
                break
            t *= 0.5
        v, e = vt, et
    final = history[-1]
    if final > 1e-6 * (1 + 2 * tau):
        raise NewtonDivergence(f"residual {final:.3e} after {len(history) - 1} iterations", history)
    u = s + v
    theta = np.exp(u / 2).astype(complex)
    links = (build_links(torus, divisor, v, (1, 0)), build_links(torus, divisor, v, (0, 1)))
    vf = VortexField(torus, float(tau), divisor, u, theta, links, v)
    rate = math.nan
    if fit_decay and len(divisor.points) == 1:
        try:
            rate = decay_fit(vf)[0]
        except InsufficientAnnulus:
            pass
    report = SolveReport(len(history) - 1, final, mass(vf), rate, tuple(history))
    return vf, report


def trivial_field(torus: FlatTorus, tau: float) -> VortexField:
    """theta = 1 on the trivial bundle (degree zero)."""
    n = torus.grid_n
    z = np.zeros((n, n))
    one = np.ones((n, n), dtype=complex)
    return VortexField(torus, float(tau), Divisor(()), z, one.copy(), (one.copy(), one.copy()), z.copy())


# --- diagnostics -----------------------------------------------------------

def mass(vf: VortexField) -> float:
    """Integral of w = 1 - |theta|^2 against the area form (periodic trapezoid)."""
    return float(np.mean(vf.w) * vf.torus.area)


def gauge_transform(vf: VortexField, g: np.ndarray) -> VortexField:
    """Act by a unit-modulus gauge map g sampled at sites."""
    ux, uy = vf.link_phases
    gx = np.roll(g, -1, axis=0)
    gy = np.roll(g, -1, axis=1)
    return VortexField(vf.torus, vf.tau, vf.divisor, vf.u, vf.theta * g,
                       (g * ux * np.conj(gx), g * uy * np.conj(gy)), vf.v)


def plaquette_flux(links) -> np.ndarray:
    """Flux of iF_A through each plaquette (principal branch)."""
    ux, uy = links
    hol = ux * np.roll(uy, -1, axis=0) * np.conj(np.roll(ux, -1, axis=1)) * np.conj(uy)
    return -np.angle(hol)


def _cell_average(torus: FlatTorus, f: np.ndarray) -> np.ndarray:
    """Exact plaquette average of the trigonometric interpolant of f."""
    k1, k2 = torus.wavenumbers
    h = torus.h

    def avg(k):
        t = h * k
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(t == 0, 1.0, (np.exp(2j * math.pi * t) - 1) / (2j * math.pi * np.where(t == 0, 1, t)))

    sym = np.where(torus.nyquist, 0.0, avg(k1) * avg(k2))
    sym[0, 0] = 1.0
    return tg.ifft2(tg.fft2(f) * sym).real


def covariant_log_increments(theta: np.ndarray, links) -> tuple[np.ndarray, np.ndarray]:
    """log(U theta_{n+e} / theta_n) on x and y links (gauge invariant)."""
    out = []
    for axis, link in enumerate(links):
        nxt = np.roll(theta, -1, axis=axis)
        with np.errstate(divide="ignore", invalid="ignore"):
            mod = np.log(np.abs(nxt)) - np.log(np.abs(theta))
        ang = np.angle(np.conj(theta) * link * nxt)
        out.append(mod + 1j * ang)
    return out[0], out[1]


def connection_form(torus: FlatTorus, divisor: Divisor, theta: np.ndarray, links):
    """Coefficients (c_w, c_wbar) of d_A theta / theta in the basis dw, dwbar.

    The analytic singular contribution of each divisor point is removed from
    the link data, the smooth remainder is recovered spectrally from its exact
    link integrals, and the singular part is added back in closed form.
    """
    n = torus.grid_n
    h, rho, b = torus.h, torus.modulus, torus.b
    rem = []
    for axis, incr in enumerate(covariant_log_increments(theta, links)):
        ex, ey = (1, 0) if axis == 0 else (0, 1)
        r = incr
        for p, m in divisor.points:
            _, sing = _singular_link(torus, p, m, ex, ey)
            r = r - sing
        r = np.where(np.isfinite(r), r, 0.0)
        r = r.real + 1j * (np.angle(np.exp(1j * r.imag)))
        rem.append(r)
    k1, k2 = torus.wavenumbers
    comps = []
    for r, k in zip(rem, (k1, k2)):
        t = h * k
        with np.errstate(divide="ignore", invalid="ignore"):
            avg = np.where(t == 0, 1.0, (np.exp(2j * math.pi * t) - 1) / (2j * math.pi * np.where(t == 0, 1, t)))
        sym = np.where(torus.nyquist, 0.0, 1.0 / (h * avg))
        comps.append(tg.ifft2(tg.fft2(r) * sym))
    bx, by = comps
    cw = (by - np.conj(rho) * bx) / (2j * b)
    cwb = (rho * bx - by) / (2j * b)
    x, y = torus.coords()
    for p, m in divisor.points:
        dx, dy = tg.relative_offsets(torus, p, x, y)
        w = dx + rho * dy
        th, dth = tg.theta1(math.pi * w, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            cw = cw + m * math.pi * dth / th + 2j * math.pi * m * dy
    return cw, cwb


def form_norm(torus: FlatTorus, cw, cwb):
    """Pointwise norm of cw dw + cwb dwbar in the flat metric."""
    return np.sqrt(2 * torus.b / torus.area * (np.abs(cw) ** 2 + np.abs(cwb) ** 2))


def _near_divisor(torus: FlatTorus, divisor: Divisor, cells: float) -> np.ndarray:
    x, y = torus.coords()
    mask = np.zeros(x.shape, dtype=bool)
    for p, _ in divisor.points:
        dx, dy = tg.relative_offsets(torus, p, x, y)
        mask |= np.maximum(np.abs(dx), np.abs(dy)) * torus.grid_n <= cells
    return mask


def vortex_residual(vf: VortexField, divisor: Divisor | None = None) -> tuple[float, float]:
    """Sup norms of dbar_A theta (away from zeros) and of *iF_A - tau(1-|theta|^2)."""
    torus = vf.torus
    div = vf.divisor if divisor is None else divisor
    cw, cwb = connection_form(torus, div, vf.theta, vf.link_phases)
    dbar = np.abs(vf.theta) * form_norm(torus, 0.0, cwb)
    dbar = np.where(_near_divisor(torus, div, 2.0) | ~np.isfinite(dbar), 0.0, dbar)
    r_holo = float(dbar.max())
    cell = torus.area / torus.grid_n ** 2
    flux = plaquette_flux(vf.link_phases) / cell
    target = vf.tau * _cell_average(torus, 1 - np.abs(vf.theta) ** 2)
    r_curv = float(np.abs(flux - target).max())
    return r_holo, r_curv


def covariant_gradient_norm(vf: VortexField) -> np.ndarray:
    cw, cwb = connection_form(vf.torus, vf.divisor, vf.theta, vf.link_phases)
    with np.errstate(invalid="ignore"):
        g = np.abs(vf.theta) * form_norm(vf.torus, cw, cwb)
    return g


def sup_bounds_check(vf: VortexField) -> tuple[float, float]:
    """(min w, max(|d_A theta| - 2 sqrt(tau) w)) over grid sites."""
    w = vf.w
    grad = covariant_gradient_norm(vf)
    excess = grad - 2 * math.sqrt(vf.tau) * w
    excess = excess[np.isfinite(excess)]
    return float(w.min()), float(excess.max())


W_FLOOR = 1e-11


def w_at(vf: VortexField, point) -> float:
    """w at an arbitrary point; exactly 1 on the divisor."""
    for p, _ in vf.divisor.points:
        if tg.geodesic_distance(vf.torus, p, point) == 0.0:
            return 1.0
    s = singular_part(vf.torus, vf.divisor, np.array(point[0]), np.array(point[1]))
    return float(-np.expm1(s + tg.trig_interpolate(vf.torus, vf.v, point)))


def decay_fit(vf: VortexField, index: int = 0) -> tuple[float, float]:
    """Fit log w = alpha - c d over the annulus around one divisor point."""
    torus = vf.torus
    tau = vf.tau
    p = vf.divisor.points[index][0]
    x, y = torus.coords()
    pts = np.stack([x, y], axis=-1)
    dist = tg.geodesic_distance(torus, pts, np.array(p))
    nearest = np.ones(x.shape, dtype=bool)
    for j, (q, _) in enumerate(vf.divisor.points):
        if j != index:
            nearest &= dist < tg.geodesic_distance(torus, pts, np.array(q))
    lo = 3 / math.sqrt(tau)
    hi = min(0.4, 10 / math.sqrt(tau))
    w = vf.w
    sel = nearest & (dist >= lo) & (dist <= hi) & (dist > 0) & (w > W_FLOOR)
    if sel.sum() < 50:
        raise InsufficientAnnulus(f"only {int(sel.sum())} usable sites in the annulus")
    dd = dist[sel]
    lw = np.log(w[sel])
    design = np.stack([np.ones_like(dd), -dd], axis=1)
    coef, *_ = np.linalg.lstsq(design, lw, rcond=None)
    pred = design @ coef
    ss_res = float(np.sum((lw - pred) ** 2))
    ss_tot = float(np.sum((lw - lw.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[1]), r2
