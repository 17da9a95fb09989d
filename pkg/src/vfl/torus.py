"""Flat tori, their spectral Laplacian, distances and periodic Green functions.

Grid convention: site (i, j) sits at ((i + 1/2)/N, (j + 1/2)/N) in fundamental
domain coordinates, arrays are indexed [i, j] with i along x.  The metric is
g = (area / Im rho) |dx + rho dy|^2 and w = x + rho*y is a holomorphic coordinate.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import PreconditionError


def fft_workers() -> int:
    try:
        return max(1, int(os.environ.get("VFL_THREADS", "1")))
    except ValueError:
        return 1


def fft2(a):
    return sfft.fft2(a, workers=fft_workers())


def ifft2(a):
    return sfft.ifft2(a, workers=fft_workers())


@dataclass(frozen=True)
class FlatTorus:
    modulus: complex
    grid_n: int = 64
    area: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "modulus", complex(self.modulus))
        if not self.modulus.imag > 0:
            raise PreconditionError("modulus must have positive imaginary part")
        if int(self.grid_n) != self.grid_n or self.grid_n < 4:
            raise PreconditionError("grid_n must be an integer >= 4")
        if not self.area > 0:
            raise PreconditionError("area must be positive")

    @property
    def a(self) -> float:
        return self.modulus.real

    @property
    def b(self) -> float:
        return self.modulus.imag

    @property
    def h(self) -> float:
        return 1.0 / self.grid_n

    @property
    def kappa(self) -> float:
        # flat metric: no negative curvature to compensate
        return 0.0

    def metric(self) -> np.ndarray:
        a, b = self.a, self.b
        return (self.area / b) * np.array([[1.0, a], [a, a * a + b * b]])

    def with_modulus(self, modulus: complex) -> "FlatTorus":
        return FlatTorus(modulus, self.grid_n, self.area)

    def with_grid(self, grid_n: int) -> "FlatTorus":
        return FlatTorus(self.modulus, grid_n, self.area)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        s = (np.arange(self.grid_n) + 0.5) / self.grid_n
        return np.meshgrid(s, s, indexing="ij")

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        k = np.fft.fftfreq(self.grid_n, 1.0 / self.grid_n)
        return np.meshgrid(k, k, indexing="ij")

    @cached_property
    def nyquist(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        ny = -self.grid_n // 2
        return (k1 == ny) | (k2 == ny)

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Fourier symbol of the Laplace-Beltrami operator (nonpositive).

        On Nyquist rows the cross term is dropped so that the operator stays
        real and self-adjoint on the grid.
        """
        k1, k2 = self.wavenumbers
        a, b = self.a, self.b
        cross = np.where(self.nyquist, 0.0, -2.0 * a * k1 * k2)
        q = k1 * k1 * abs(self.modulus) ** 2 + cross + k2 * k2
        return -(2 * math.pi) ** 2 * q / (b * self.area)

    @cached_property
    def derivative_symbols(self) -> tuple[np.ndarray, np.ndarray]:
        k1, k2 = self.wavenumbers
        dx = np.where(self.nyquist, 0.0, 2j * math.pi * k1)
        dy = np.where(self.nyquist, 0.0, 2j * math.pi * k2)
        return dx, dy


@dataclass(frozen=True)
class GridField:
    torus: FlatTorus
    values: np.ndarray

    def __post_init__(self):
        n = self.torus.grid_n
        if self.values.shape != (n, n):
            raise PreconditionError(f"expected a {n}x{n} array, got {self.values.shape}")


def wrap_delta(d):
    """Map coordinate differences into [-1/2, 1/2)."""
    return (np.asarray(d) + 0.5) % 1.0 - 0.5


def geodesic_distance(torus: FlatTorus, z, w):
    """Flat distance between z and w, minimised over the 9 nearest translates."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    dx = wrap_delta(w[..., 0] - z[..., 0])
    dy = wrap_delta(w[..., 1] - z[..., 1])
    scale = math.sqrt(torus.area / torus.b)
    best = None
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            d = np.abs((dx + sx) + torus.modulus * (dy + sy)) * scale
            best = d if best is None else np.minimum(best, d)
    return float(best) if best.ndim == 0 else best


def laplacian(torus: FlatTorus, f: np.ndarray) -> np.ndarray:
    out = ifft2(fft2(f) * torus.laplacian_symbol)
    return out.real if np.isrealobj(f) else out


def poisson_solve(torus: FlatTorus, rhs: np.ndarray) -> np.ndarray:
    """Mean-zero solution of Lap f = rhs - mean(rhs)."""
    lam = torus.laplacian_symbol.copy()
    lam[0, 0] = 1.0
    fh = fft2(rhs) / lam
    fh[0, 0] = 0.0
    out = ifft2(fh)
    return out.real if np.isrealobj(rhs) else out


def _delta_coefficients(torus: FlatTorus, p) -> np.ndarray:
    k1, k2 = torus.wavenumbers
    n = torus.grid_n
    # phases relative to site (0, 0) at (h/2, h/2)
    px = p[0] - 0.5 / n
    py = p[1] - 0.5 / n
    c = np.exp(-2j * math.pi * (k1 * px + k2 * py))
    # average the two aliases of every Nyquist mode so the delta is real
    ny = -n // 2
    cx = np.cos(2 * math.pi * k1 * px) * np.exp(-2j * math.pi * k2 * py)
    cy = np.exp(-2j * math.pi * k1 * px) * np.cos(2 * math.pi * k2 * py)
    cxy = np.cos(2 * math.pi * k1 * px) * np.cos(2 * math.pi * k2 * py)
    c = np.where(k1 == ny, cx, c)
    c = np.where(k2 == ny, cy, c)
    c = np.where((k1 == ny) & (k2 == ny), cxy, c)
    return c


def spectral_delta(torus: FlatTorus, p) -> GridField:
    """Band-limited Dirac mass at p with unit integral."""
    c = _delta_coefficients(torus, p)
    vals = ifft2(c).real * torus.grid_n ** 2 / torus.area
    return GridField(torus, vals)


def periodic_green(torus: FlatTorus, p) -> GridField:
    """Spectral Green function: Lap G = delta_p - 1/area, grid mean zero."""
    # extended precision keeps the residual at the float64 rounding floor
    c = _delta_coefficients(torus, p).astype(np.clongdouble)
    lam = torus.laplacian_symbol.astype(np.longdouble)
    lam[0, 0] = 1.0
    gh = c / lam * (torus.grid_n ** 2 / torus.area)
    gh[0, 0] = 0.0
    return GridField(torus, sfft.ifft2(gh).real.astype(float))


def trig_interpolate(torus: FlatTorus, values: np.ndarray, point) -> complex | float:
    """Evaluate the trigonometric interpolant of grid samples at a point."""
    n = torus.grid_n
    fh = fft2(values) / n ** 2
    c = np.conj(_delta_coefficients(torus, point))
    out = np.sum(fh * c)
    return float(out.real) if np.isrealobj(values) else complex(out)


def complex_structure_path(rho0: complex, rho1: complex, t: float, grid_n: int = 64,
                           area: float = 1.0) -> FlatTorus:
    rho0, rho1 = complex(rho0), complex(rho1)
    if rho0.imag <= 0 or rho1.imag <= 0:
        raise PreconditionError("path endpoints must lie in the upper half-plane")
    return FlatTorus((1 - t) * rho0 + t * rho1, grid_n, area)


def complex_structure_velocity(rho0: complex, rho1: complex) -> complex:
    return complex(rho1) - complex(rho0)


# --- exact Green function through the Jacobi theta function ---------------

def _theta_terms(rho: complex) -> int:
    return int(math.ceil(math.sqrt(40.0 / (math.pi * rho.imag)))) + 4


def theta1(z, rho: complex):
    """Jacobi theta_1(z | rho) and its z-derivative."""
    z = np.asarray(z, dtype=complex)
    val = np.zeros_like(z)
    der = np.zeros_like(z)
    # powers of exp(iz) by repeated multiplication instead of sin/cos per term
    q = np.exp(1j * z)
    qi = 1.0 / q
    q2, qi2 = q * q, qi * qi
    pos, neg = q, qi
    for n in range(_theta_terms(rho)):
        c = 2.0 * (-1) ** n * np.exp(1j * math.pi * rho * (n + 0.5) ** 2)
        m = 2 * n + 1
        val += c * (pos - neg) / 2j
        der += c * m * (pos + neg) / 2
        pos = pos * q2
        neg = neg * qi2
    return val, der


def relative_offsets(torus: FlatTorus, p, x=None, y=None):
    """Wrapped parameter offsets of sample points from p."""
    if x is None:
        x, y = torus.coords()
    return wrap_delta(x - p[0]), wrap_delta(y - p[1])


def green_exact(torus: FlatTorus, p, x=None, y=None) -> np.ndarray:
    """Continuum Green function (Lap G = delta_p - 1/area) sampled at points.

    G = log|theta_1(pi w)| / (2 pi) - (Im w)^2 / (2 Im rho) + const with
    w the wrapped offset.  The constant makes the grid mean zero when sampling
    the full grid; elsewhere it is the same constant for the same torus.
    """
    full = x is None
    dx, dy = relative_offsets(torus, p, x, y)
    w = dx + torus.modulus * dy
    th, _ = theta1(math.pi * w, torus.modulus)
    with np.errstate(divide="ignore"):
        g = np.log(np.abs(th)) / (2 * math.pi) - torus.b * dy * dy / 2.0
    if full:
        finite = np.isfinite(g)
        g = g - g[finite].mean()
    else:
        g = g - _green_grid_mean(torus, p)
    return g


def _green_grid_mean(torus, p):
    dx, dy = relative_offsets(torus, p)
    w = dx + torus.modulus * dy
    th, _ = theta1(math.pi * w, torus.modulus)
    with np.errstate(divide="ignore"):
        g = np.log(np.abs(th)) / (2 * math.pi) - torus.b * dy * dy / 2.0
    return g[np.isfinite(g)].mean()


def rfft_symbol(torus: FlatTorus, symbol: np.ndarray) -> np.ndarray:
    """Restrict a full-grid symbol to the half spectrum used by rfft2."""
    return symbol[:, : torus.grid_n // 2 + 1]


def rfft2(a):
    return sfft.rfft2(a, workers=fft_workers())


def irfft2(a, n):
    return sfft.irfft2(a, s=(n, n), workers=fft_workers())
