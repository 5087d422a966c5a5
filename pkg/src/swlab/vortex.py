"""Planar vortices with prescribed zeros.

The t = 1 vortex equations are reduced to a scalar problem for
``u = log|alpha|^2``::

    Lap u = (e^u - 1) / 2 + 4 pi sum_j m_j delta_{z_j}

The logarithmic singularities are removed with
``u0 = sum m_j log(r_j^2 / (1 + r_j^2))`` and the smooth remainder
``v = u - u0`` is found by damped Newton iteration.  The Dirichlet data
``u = 0`` is imposed on the boundary ring.
"""

from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator

from . import constants as C
from .grid import Grid2, deriv, laplacian5


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class CenterSet:
    """Multiset of vortex centers as (point, multiplicity) pairs."""
    points: tuple = ()

    @classmethod
    def of(cls, centers: Iterable) -> "CenterSet":
        """Build from complex points (repeats add multiplicity) or (point, m) pairs."""
        acc = {}
        for c in centers:
            if isinstance(c, tuple):
                p, m = complex(c[0]), int(c[1])
            else:
                p, m = complex(c), 1
            if not np.isfinite(p):
                raise ValueError(f"non-finite center {p}")
            if m < 1:
                raise ValueError("multiplicities must be positive")
            acc[p] = acc.get(p, 0) + m
        return cls(tuple(sorted(acc.items(), key=lambda pm: (pm[0].real, pm[0].imag))))

    @property
    def n(self) -> int:
        return sum(m for _, m in self.points)

    def __len__(self):
        return self.n

    def flat(self) -> list:
        return [p for p, m in self.points for _ in range(m)]

    def max_modulus(self) -> float:
        return max((abs(p) for p, _ in self.points), default=0.0)

    def shifted(self, w: complex) -> "CenterSet":
        return CenterSet.of([(p + w, m) for p, m in self.points])


@dataclass(frozen=True)
class VortexSolution:
    grid: Grid2
    t: float
    centers: CenterSet
    u: np.ndarray
    alpha: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    curvature: np.ndarray
    residual_report: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def a(self):
        return (self.a1, self.a2)


# ------------------------------------------------------------------ equations

def vortex_residual(a1, a2, alpha, h: float, t: float = 1.0):
    """Node-wise residuals (dbar_A alpha, curl a - (t - |alpha|^2)/4).

    The first is complex, the second real; both are meaningful on interior
    nodes only (central differences)."""
    d1, d2 = deriv(alpha, 0, h), deriv(alpha, 1, h)
    e1 = 0.5 * (d1 + 1j * d2) - 0.5j * (a1 + 1j * a2) * alpha
    curl = deriv(a2, 0, h) - deriv(a1, 1, h)
    e2 = curl - (t - np.abs(alpha) ** 2) / C.VORTEX_DENOM
    return e1, e2


def residual_norms(a1, a2, alpha, grid: Grid2, t: float = 1.0) -> dict:
    e1, e2 = vortex_residual(a1, a2, alpha, grid.h, t)
    s = grid.interior()
    w = grid.h**2
    return {
        "dbar_sup": float(np.max(np.abs(e1[s]))),
        "dbar_l2": float(np.sqrt(w * np.sum(np.abs(e1[s]) ** 2))),
        "curv_sup": float(np.max(np.abs(e2[s]))),
        "curv_l2": float(np.sqrt(w * np.sum(e2[s] ** 2))),
    }


def _singular_parts(centers: CenterSet, grid: Grid2):
    X, Y = grid.mesh()
    u0 = np.zeros(grid.shape)
    src = np.zeros(grid.shape)
    a1 = np.zeros(grid.shape)
    a2 = np.zeros(grid.shape)
    amp = np.ones(grid.shape, dtype=complex)
    for p, m in centers.points:
        dx, dy = X - p.real, Y - p.imag
        r2 = dx**2 + dy**2
        with np.errstate(divide="ignore"):
            u0 += m * (np.log(r2) - np.log1p(r2))
        src += 4 * m / (1 + r2) ** 2
        a1 += -m * dy / (1 + r2)
        a2 += m * dx / (1 + r2)
        amp *= ((dx + 1j * dy) / np.sqrt(1 + r2)) ** m
    return u0, src, a1, a2, amp


def _laplacian_matrix(n1: int, n2: int, h: float):
    def d2(n):
        return sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1]) / h**2
    return (sp.kron(d2(n1), sp.identity(n2)) + sp.kron(sp.identity(n1), d2(n2))).tocsc()


def _cg_solve(A, b):
    M = sp.diags(1.0 / A.diagonal())
    x, info = spla.cg(A, b, rtol=1e-12, atol=0.0, M=M, maxiter=20000)
    if info != 0:
        raise SolverError(f"conjugate gradient did not converge (info={info})")
    return x


def solve_vortex(centers, grid: Grid2, tol: float = 1e-10, max_iter: int = 50,
                 linear_solver: str = "direct", polish: bool = False) -> VortexSolution:
    """t = 1 vortex with the given centers, in the (vor) gauge.

    ``linear_solver`` is 'direct' (sparse LU) or 'cg' (Jacobi-preconditioned
    conjugate gradient on the negated, positive-definite Jacobian).
    ``polish`` follows the scalar solve with gauge-fixed Newton steps on the
    discrete first-order system (see :func:`swlab.gluing.newton_correct`).
    """
    if not isinstance(centers, CenterSet):
        centers = CenterSet.of(centers)
    if not (0 < tol <= 1e-6):
        raise ValueError("tol must lie in (0, 1e-6]")
    limit = grid.radius - 6
    for p, _ in centers.points:
        if abs(p - grid.center) > limit:
            raise SolverError(f"center {p} outside the safe radius {limit:.3g} of the grid")

    u0, src, sa1, sa2, amp = _singular_parts(centers, grid)
    h = grid.h
    nx, ny = grid.shape
    inner = grid.interior()
    v = np.zeros(grid.shape)
    # boundary ring carries u = 0
    ring = np.ones(grid.shape, bool)
    ring[inner] = False
    v[ring] = -u0[ring]
    lap = _laplacian_matrix(nx - 2, ny - 2, h)

    def F(v):
        u = u0 + v
        return (laplacian5(v, h) - (np.exp(u) - 1) / C.REDUCTION_DENOM - src)[inner]

    r = F(v)
    norm = np.max(np.abs(r))
    it = 0
    while norm > tol:
        if it >= max_iter:
            raise SolverError(f"scalar Newton stalled at residual {norm:.3e} after {it} iterations")
        eu = np.exp(u0 + v)[inner].ravel()
        J = (lap - sp.diags(eu / C.REDUCTION_DENOM)).tocsc()
        if linear_solver == "cg":
            dv = _cg_solve(-J, r.ravel())
        else:
            dv = spla.spsolve(J, -r.ravel())
        dv = dv.reshape(nx - 2, ny - 2)
        step = 1.0
        while True:
            trial = v.copy()
            trial[inner] += step * dv
            rt = F(trial)
            nt = np.max(np.abs(rt))
            if nt < norm or step < 1e-4:
                break
            step *= 0.5
        v, r, norm = trial, rt, nt
        it += 1

    alpha = amp * np.exp(v / 2)
    a1 = sa1 + 0.5 * deriv(v, 1, h)
    a2 = sa2 - 0.5 * deriv(v, 0, h)
    with np.errstate(divide="ignore"):
        u = np.log(np.abs(alpha) ** 2)
    curv = deriv(a2, 0, h) - deriv(a1, 1, h)
    report = residual_norms(a1, a2, alpha, grid)
    report["reduced_sup"] = float(norm)
    sol = VortexSolution(grid, 1.0, centers, u, alpha, a1, a2, curv, report, it)
    if polish:
        from .gluing import newton_correct
        sol, _ = newton_correct(sol, tol=max(tol, 1e-12), check_contraction=False)
    return sol


def from_fields(grid: Grid2, t: float, centers: CenterSet, a1, a2, alpha,
                iterations: int = 0) -> VortexSolution:
    """Wrap planar fields as a VortexSolution, recomputing derived data."""
    with np.errstate(divide="ignore"):
        u = np.log(np.abs(alpha) ** 2)
    curv = deriv(a2, 0, grid.h) - deriv(a1, 1, grid.h)
    return VortexSolution(grid, t, centers, u, alpha, a1, a2, curv,
                          residual_norms(a1, a2, alpha, grid, t), iterations)


def rescale(sol: VortexSolution, t: float) -> VortexSolution:
    """t-rescaled solution: fields times sqrt(t), lengths divided by sqrt(t).

    Node values are reused on a grid of spacing h / sqrt(t), so no
    interpolation enters."""
    if not t > 0:
        raise ValueError("t must be positive")
    s = np.sqrt(t / sol.t)
    g = sol.grid
    grid = Grid2.__new__(Grid2)
    object.__setattr__(grid, "nx", g.nx)
    object.__setattr__(grid, "ny", g.ny)
    object.__setattr__(grid, "h", g.h / s)
    object.__setattr__(grid, "center", g.center / s)
    centers = CenterSet.of([(p / s, m) for p, m in sol.centers.points])
    return from_fields(grid, t, centers, s * sol.a1, s * sol.a2, s * sol.alpha, sol.iterations)


# ---------------------------------------------------------------- diagnostics

def vortex_number(sol: VortexSolution) -> float:
    """(1 / 2 pi) times the integral of the curvature."""
    return float(np.sum(sol.grid.trapezoid_weights() * sol.curvature) / (2 * np.pi))


def _interp(sol: VortexSolution, values):
    g = sol.grid
    re = RegularGridInterpolator((g.x, g.y), np.real(values))
    im = RegularGridInterpolator((g.x, g.y), np.imag(values))
    return lambda pts: re(pts) + 1j * im(pts)


def winding(sol: VortexSolution, center: complex, radius: float, samples: int = 128) -> float:
    """Accumulated phase of alpha around a circle, divided by 2 pi."""
    th = np.linspace(0, 2 * np.pi, samples + 1)
    z = center + radius * np.exp(1j * th)
    vals = _interp(sol, sol.alpha)(np.column_stack([z.real, z.imag]))
    dphi = np.angle(vals[1:] / vals[:-1])
    return float(np.sum(dphi) / (2 * np.pi))


def centers_of(sol: VortexSolution, threshold: float = 0.5) -> CenterSet:
    """Zeros of alpha: local minima of |alpha|, quadratic sub-grid refinement,
    multiplicity by winding on a circle of radius 3h."""
    g = sol.grid
    h = g.h
    mag = np.abs(sol.alpha)
    scale = np.sqrt(sol.t)
    core = mag[1:-1, 1:-1]
    is_min = core < threshold * scale
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx or dy:
                is_min &= core <= mag[1 + dx:mag.shape[0] - 1 + dx, 1 + dy:mag.shape[1] - 1 + dy]
    idx = np.argwhere(is_min) + 1
    found = []
    for i, j in idx:
        if min(i, j, g.nx - 1 - i, g.ny - 1 - j) < 4:
            raise SolverError("zero of alpha too close to the grid boundary")
        q = mag[i - 1:i + 2, j - 1:j + 2] ** 2
        gx = (q[2, 1] - q[0, 1]) / 2
        gy = (q[1, 2] - q[1, 0]) / 2
        hxx = q[2, 1] - 2 * q[1, 1] + q[0, 1]
        hyy = q[1, 2] - 2 * q[1, 1] + q[1, 0]
        hxy = (q[2, 2] - q[2, 0] - q[0, 2] + q[0, 0]) / 4
        H = np.array([[hxx, hxy], [hxy, hyy]])
        off = np.zeros(2)
        if np.linalg.det(H) > 0 and hxx > 0:
            off = -np.linalg.solve(H, [gx, gy])
            off = np.clip(off, -1.0, 1.0)
        found.append(complex(g.x[i] + off[0] * h, g.y[j] + off[1] * h))
    # merge clusters closer than 3h
    merged = []
    for z in found:
        for k, w in enumerate(merged):
            if abs(z - w[0]) < 3 * h:
                w[1].append(z)
                break
        else:
            merged.append((z, [z]))
    out = []
    for _, pts in merged:
        z = complex(np.mean(pts))
        m = int(round(winding(sol, z, 3 * h)))
        if m > 0:
            out.append((z, m))
    return CenterSet.of(out)


def covariant_gradient_norm(sol: VortexSolution) -> np.ndarray:
    h = sol.grid.h
    d1 = deriv(sol.alpha, 0, h) - 1j * sol.a1 * sol.alpha
    d2 = deriv(sol.alpha, 1, h) - 1j * sol.a2 * sol.alpha
    return np.sqrt(np.abs(d1) ** 2 + np.abs(d2) ** 2)


def tail_decay_fit(sol: VortexSolution, r0: float = 4.0, r1: float = 8.0,
                   quantity: str = "deficit", floor: float = 1e-13):
    """Least-squares exponential rate of a tail quantity over an annulus.

    ``quantity`` is 'deficit' (t - |alpha|^2) or 'covariant' (|grad_A alpha|).
    Returns (rate, r_squared)."""
    g = sol.grid
    if r0 < sol.centers.max_modulus() + 3:
        raise ValueError("annulus too close to the vortex centers")
    if r1 > g.radius - g.h:
        raise ValueError("annulus does not fit in the grid")
    r = np.abs(g.z - g.center)
    mask = (r >= r0) & (r <= r1)
    if quantity == "deficit":
        q = sol.t - np.abs(sol.alpha) ** 2
    elif quantity == "covariant":
        q = covariant_gradient_norm(sol)
    else:
        raise ValueError(f"unknown tail quantity {quantity!r}")
    vals = q[mask]
    if np.any(np.abs(vals) <= floor):
        raise ValueError("tail values below the noise floor; rate undefined")
    y = np.log(np.abs(vals))
    x = r[mask]
    slope, icept = np.polyfit(x, y, 1)
    pred = slope * x + icept
    r2 = 1 - np.sum((y - pred) ** 2) / np.sum((y - y.mean()) ** 2)
    return float(-slope), float(r2)


def vor_gauge_check(sol: VortexSolution, radius: float = 8.0, samples: int = 256) -> float:
    """sup over a circle of |arg alpha - n arg z| (wrapped to (-pi, pi])."""
    n = sol.centers.n
    if n == 0:
        return 0.0
    th = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    z = sol.grid.center + radius * np.exp(1j * th)
    vals = _interp(sol, sol.alpha)(np.column_stack([z.real, z.imag]))
    diff = np.angle(vals * np.exp(-1j * n * np.angle(z - sol.grid.center)))
    return float(np.max(np.abs(diff)))


def energy2d(sol: VortexSolution, alpha: Optional[np.ndarray] = None) -> float:
    """Quadrature of |dbar_A alpha|^2 + (1/2)|curvature deficit|^2 over interior nodes."""
    alpha = sol.alpha if alpha is None else alpha
    e1, e2 = vortex_residual(sol.a1, sol.a2, alpha, sol.grid.h, sol.t)
    s = sol.grid.interior()
    return float(sol.grid.h**2 * np.sum(np.abs(e1[s]) ** 2 + 0.5 * e2[s] ** 2))


def with_alpha(sol: VortexSolution, alpha) -> VortexSolution:
    return replace(sol, alpha=alpha)
