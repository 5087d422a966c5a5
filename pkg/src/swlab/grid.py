"""Uniform grids, finite differences, cutoffs, the polynomial weight and the
Clifford algebra used by every other module.

Arrays are indexed ``[ix, iy]`` (or ``[ix, iy, iz]``); node ``i`` along an
axis sits at ``center + (i - n // 2) * h`` so even node counts still carry a
node at the center.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import constants as C


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid2:
    nx: int
    ny: int
    h: float
    center: complex = 0j

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise GridError(f"grid spacing must be finite and positive, got {self.h!r}")
        if self.nx < 16 or self.ny < 16:
            raise GridError(f"undersized grid {self.nx}x{self.ny}: need at least 16 nodes per axis")
        if self.radius < 4:
            raise GridError(f"covered radius {self.radius} < 4")

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def radius(self) -> float:
        return self.h * min(self.nx, self.ny) / 2

    @property
    def x(self) -> np.ndarray:
        return self.center.real + (np.arange(self.nx) - self.nx // 2) * self.h

    @property
    def y(self) -> np.ndarray:
        return self.center.imag + (np.arange(self.ny) - self.ny // 2) * self.h

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def z(self) -> np.ndarray:
        X, Y = self.mesh()
        return X + 1j * Y

    def interior(self) -> tuple:
        return (slice(1, -1), slice(1, -1))

    def trapezoid_weights(self) -> np.ndarray:
        return _trap(self.nx)[:, None] * _trap(self.ny)[None, :] * self.h**2


@dataclass(frozen=True)
class Grid3:
    nx: int
    ny: int
    nz: int
    h: float
    center: complex = 0j

    def __post_init__(self):
        if not np.isfinite(self.h) or self.h <= 0:
            raise GridError(f"grid spacing must be finite and positive, got {self.h!r}")
        if self.nx < 16 or self.ny < 16:
            raise GridError(f"undersized grid {self.nx}x{self.ny}: need at least 16 nodes per planar axis")
        if self.nz < 8:
            raise GridError(f"undersized grid: nz={self.nz} < 8")

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def L3(self) -> float:
        return self.h * self.nz / 2

    @property
    def radius(self) -> float:
        return self.h * min(self.nx, self.ny) / 2

    @property
    def x(self):
        return self.center.real + (np.arange(self.nx) - self.nx // 2) * self.h

    @property
    def y(self):
        return self.center.imag + (np.arange(self.ny) - self.ny // 2) * self.h

    @property
    def x3(self):
        return (np.arange(self.nz) - self.nz // 2) * self.h

    def planar(self) -> Grid2:
        return Grid2(self.nx, self.ny, self.h, self.center)

    def mesh(self):
        return np.meshgrid(self.x, self.y, self.x3, indexing="ij")

    def interior(self) -> tuple:
        return (slice(1, -1),) * 3

    def trapezoid_weights(self) -> np.ndarray:
        return (_trap(self.nx)[:, None, None] * _trap(self.ny)[None, :, None]
                * _trap(self.nz)[None, None, :] * self.h**3)


def _trap(n):
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def build_grid(dims: Sequence[int], h: float, center: complex = 0j):
    """Grid2 for two node counts, Grid3 for three."""
    dims = tuple(int(d) for d in dims)
    try:
        h = float(h)
    except (TypeError, ValueError):
        raise GridError(f"grid spacing must be a real number, got {h!r}")
    if len(dims) == 2:
        return Grid2(dims[0], dims[1], h, complex(center))
    if len(dims) == 3:
        return Grid3(dims[0], dims[1], dims[2], h, complex(center))
    raise GridError(f"expected 2 or 3 axis node counts, got {len(dims)}")


# ---------------------------------------------------------------- differences

def deriv(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Second-order central difference; one-sided second order on the ends."""
    f = np.asarray(f)
    out = np.empty_like(f)
    n = f.shape[axis]
    if n < 3:
        raise GridError("need at least 3 nodes to differentiate")

    def sl(*args):
        s = [slice(None)] * f.ndim
        s[axis] = args[0] if len(args) == 1 else slice(*args)
        return tuple(s)

    out[sl(1, -1)] = (f[sl(2, None)] - f[sl(0, -2)]) / (2 * h)
    out[sl(0)] = (-3 * f[sl(0)] + 4 * f[sl(1)] - f[sl(2)]) / (2 * h)
    out[sl(-1)] = (3 * f[sl(-1)] - 4 * f[sl(-2)] + f[sl(-3)]) / (2 * h)
    return out


def gradient(f: np.ndarray, h: float) -> list:
    return [deriv(f, ax, h) for ax in range(f.ndim)]


def laplacian5(f: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian on interior nodes (zero on the boundary ring)."""
    out = np.zeros_like(f)
    out[1:-1, 1:-1] = (f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2]
                       - 4 * f[1:-1, 1:-1]) / h**2
    return out


# ------------------------------------------------------------------- cutoffs

def smoothstep(x):
    """Quintic smoothstep: 0 for x <= 0, 1 for x >= 1, C^2 in between."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x**3 * (x * (6 * x - 15) + 10)


SMOOTHSTEP_SLOPE = 15.0 / 8.0  # max derivative of the quintic smoothstep


@dataclass(frozen=True)
class CutoffProfile:
    """``kind`` is 'radial' (chi_R), 'one_sided' (lambda_d) or 'even' (lambda'_R)."""
    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in ("radial", "one_sided", "even"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("cutoff scale must be positive")


def cutoff_eval(profile: CutoffProfile, point) -> np.ndarray:
    """Evaluate a cutoff. ``point`` is a radius/norm for 'radial', a real
    coordinate otherwise; arrays are evaluated elementwise."""
    s = np.asarray(point, dtype=float)
    if profile.kind == "radial":
        return 1.0 - smoothstep(np.abs(s) / profile.scale - 1.0)
    if profile.kind == "even":
        return 1.0 - smoothstep(np.abs(s) / profile.scale - 1.0)
    return smoothstep((s / profile.scale + 1.0) / 2.0)


def chi(r, R):
    return cutoff_eval(CutoffProfile("radial", R), r)


# -------------------------------------------------------------------- weight

@dataclass(frozen=True)
class WeightSpec:
    """Polynomial weight: 1 on |f| <= R, |f|/R for |f| >= 2R.

    ``coordinate`` selects f: 'x3' on three-dimensional grids, 'radial'
    (f = |z|) on planar grids, 'x' for one-dimensional samples.
    """
    epsilon: float
    R: float
    coordinate: str = "x3"

    def __post_init__(self):
        if not (0 <= self.epsilon < 1.5):
            raise ValueError(f"epsilon must lie in [0, 3/2), got {self.epsilon}")
        if not self.R > 0:
            raise ValueError("weight scale R must be positive")

    def varsigma(self, f) -> np.ndarray:
        f = np.abs(np.asarray(f, dtype=float))
        lam = cutoff_eval(CutoffProfile("even", self.R), f)
        return lam + (1.0 - lam) * f / self.R

    def on_grid(self, grid) -> np.ndarray:
        if isinstance(grid, Grid3):
            X, Y, Z = grid.mesh()
            if self.coordinate == "x3":
                return self.varsigma(Z)
            if self.coordinate == "radial":
                return self.varsigma(np.hypot(X, Y))
        elif isinstance(grid, Grid2):
            X, Y = grid.mesh()
            if self.coordinate == "radial":
                return self.varsigma(np.hypot(X, Y))
            if self.coordinate == "x":
                return self.varsigma(X)
        raise GridError(f"weight coordinate {self.coordinate!r} not available on {type(grid).__name__}")


def _components(field) -> list:
    if isinstance(field, (list, tuple)):
        return [np.asarray(c) for c in field]
    return [np.asarray(field)]


def weighted_norm(field, grid, spec: WeightSpec, p=2, k: int = 0) -> float:
    """sum_{i<=k} || varsigma^eps grad^i xi ||_p, trapezoid quadrature.

    ``field`` is an array on ``grid`` or a tuple of component arrays.
    """
    comps = _components(field)
    for c in comps:
        if c.shape != grid.shape:
            raise GridError(f"field shape {c.shape} does not match grid {grid.shape}")
    if k > 2 or k < 0:
        raise ValueError("derivative count k must be 0, 1 or 2")
    if p not in (2, np.inf, "inf"):
        raise ValueError("p must be 2 or inf")
    w = spec.on_grid(grid) ** spec.epsilon if spec.epsilon else 1.0
    total = 0.0
    level = comps
    for i in range(k + 1):
        mag2 = sum(np.abs(c) ** 2 for c in level)
        if p == 2:
            total += float(np.sqrt(np.sum(grid.trapezoid_weights() * w**2 * mag2)))
        else:
            total += float(np.max(w * np.sqrt(mag2)))
        if i < k:
            level = [d for c in level for d in gradient(c, grid.h)]
    return total


# ---------------------------------------------------------- Clifford algebra

def clifford_rho(one_form=None, two_form=None) -> np.ndarray:
    """rho of a 1-form (c1, c2, c3) or a 2-form given as (f23, f31, f12).

    Two-forms act through the Hodge star, so rho(dx1^dx2) = rho(dx3).
    Components may be arrays; the matrix axes come first.
    """
    comps = one_form if one_form is not None else two_form
    if comps is None or (one_form is not None and two_form is not None):
        raise ValueError("give exactly one of one_form, two_form")
    comps = [np.asarray(c) for c in comps]
    return sum(g.reshape((2, 2) + (1,) * comps[0].ndim) * c for g, c in zip(C.GAMMAS, comps))


def sigma_map(psi, phi) -> np.ndarray:
    """i times the traceless hermitian symmetrization of psi phi^dagger.

    Spinors have shape (2, ...); the result has shape (2, 2, ...).
    """
    psi = np.asarray(psi, dtype=complex)
    phi = np.asarray(phi, dtype=complex)
    outer = 0.5 * (np.einsum("i...,j...->ij...", psi, phi.conj())
                   + np.einsum("i...,j...->ij...", phi, psi.conj()))
    tr = 0.5 * (outer[0, 0] + outer[1, 1])
    outer[0, 0] -= tr
    outer[1, 1] -= tr
    return C.SIGMA_SIGN * 1j * outer
