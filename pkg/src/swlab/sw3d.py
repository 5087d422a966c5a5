"""Three-dimensional configurations on a box in R^3.

A configuration is a real connection ``A`` on the determinant line (spinors
see ``d - (i/2) A``) and a spinor ``psi = (alpha, beta)``.  With
``omega = -(t/2) dx1 ^ dx2`` the equations read

    D_A psi = 0,    M = sum_k m_k sigma_k = 0,
    m_k = (curl A)_k + psi^dag sigma_k psi / 2 - (t/2) delta_k3,

where ``M`` is the curvature residual ``rho(F_A) - i sigma(psi, psi) - i rho(omega)``
in the Pauli basis.  Residuals are evaluated at interior nodes with central
differences; the energy is ``||D_A psi||^2 + (1/2)||M||^2`` over the same
nodes.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import kernels
from .grid import Grid3, GridError, WeightSpec
from .vortex import rescale

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SWField3:
    grid: Grid3
    t: float
    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gauge: str = "temporal"

    def __post_init__(self):
        for name in ("A1", "A2", "A3"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        for name in ("alpha", "beta"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=complex)
            object.__setattr__(self, name, arr)
        for name in ("A1", "A2", "A3", "alpha", "beta"):
            arr = getattr(self, name)
            if arr.shape != self.grid.shape:
                raise GridError(f"{name} has shape {arr.shape}, grid is {self.grid.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if self.t < 0:
            raise ValueError("t must be non-negative")
        if self.gauge == "temporal" and np.any(self.A3 != 0):
            raise ValueError("temporal gauge requires A3 == 0")

    def arrays(self):
        return self.A1, self.A2, self.A3, self.alpha, self.beta

    def with_arrays(self, A1, A2, A3, alpha, beta, gauge=None):
        return replace(self, A1=A1, A2=A2, A3=A3, alpha=alpha, beta=beta,
                       gauge=self.gauge if gauge is None else gauge)


@dataclass(frozen=True)
class ResidualReport:
    curv_sup: float
    curv_l2: float
    curv_l2w: float
    dirac_sup: float
    dirac_l2: float
    dirac_l2w: float
    beta_l2: float

    @property
    def sup(self) -> float:
        return max(self.curv_sup, self.dirac_sup)

    def to_json(self) -> dict:
        return {k: float(getattr(self, k)) for k in sorted(self.__dataclass_fields__)}


def flat(grid: Grid3, t: float = 1.0) -> SWField3:
    z = np.zeros(grid.shape)
    return SWField3(grid, t, z, z.copy(), z.copy(), np.full(grid.shape, np.sqrt(t), complex),
                    np.zeros(grid.shape, complex))


def _aligned(vgrid, grid3: Grid3):
    """Planar node offsets if grid3's footprint sits on vortex nodes, else None."""
    if abs(vgrid.h - grid3.h) > 1e-12 * grid3.h:
        return None
    ox = (grid3.x[0] - vgrid.x[0]) / vgrid.h
    oy = (grid3.y[0] - vgrid.y[0]) / vgrid.h
    if abs(ox - round(ox)) > 1e-9 or abs(oy - round(oy)) > 1e-9:
        return None
    return int(round(ox)), int(round(oy))


def pullback(vortex, t: float, grid3: Grid3) -> SWField3:
    """x3-invariant configuration (2 a_t, (alpha_t, 0)) from a t = 1 vortex.

    Planar values are copied when the footprint lies on (rescaled) vortex
    nodes and bicubic-spline interpolated otherwise."""
    if not t > 0:
        raise ValueError("t must be positive")
    if abs(vortex.t - 1.0) > 1e-14:
        raise ValueError("pullback expects a t = 1 vortex")
    v = rescale(vortex, t) if t != 1.0 else vortex
    vg = v.grid
    eps = 1e-9 * vg.h
    if (grid3.x[0] < vg.x[0] - eps or grid3.x[-1] > vg.x[-1] + eps
            or grid3.y[0] < vg.y[0] - eps or grid3.y[-1] > vg.y[-1] + eps):
        raise GridError("three-dimensional footprint is not inside the vortex grid")
    off = _aligned(vg, grid3)
    if off is not None:
        i0, j0 = off
        sl = (slice(i0, i0 + grid3.nx), slice(j0, j0 + grid3.ny))
        a1, a2, al = v.a1[sl], v.a2[sl], v.alpha[sl]
    else:
        def ip(f):
            return RectBivariateSpline(vg.x, vg.y, f, kx=3, ky=3)(grid3.x, grid3.y)
        a1, a2 = ip(v.a1), ip(v.a2)
        al = ip(v.alpha.real) + 1j * ip(v.alpha.imag)
    nz = grid3.nz
    lift = lambda f: np.ascontiguousarray(np.repeat(f[:, :, None], nz, axis=2))
    return SWField3(grid3, t, lift(2 * a1), lift(2 * a2), np.zeros(grid3.shape),
                    lift(al), np.zeros(grid3.shape, complex))


def _norms(mag, grid: Grid3, spec: WeightSpec):
    w = grid.h**3
    sig = spec.on_grid(grid)[1:-1, 1:-1, 1:-1] ** spec.epsilon
    return (float(mag.max()), float(np.sqrt(w * np.sum(mag**2))),
            float(np.sqrt(w * np.sum((sig * mag) ** 2))))


def residual_fields(c: SWField3):
    """(rt, rb, m1, m2, m3) at interior nodes."""
    return kernels.residual(*c.arrays(), c.grid.h, c.t)


def sw_residual(c: SWField3, weight: Optional[WeightSpec] = None) -> ResidualReport:
    weight = weight or WeightSpec(1.25, 4.0, "x3")
    rt, rb, m1, m2, m3 = residual_fields(c)
    curv = np.sqrt(2 * (m1**2 + m2**2 + m3**2))
    dirac = np.sqrt(np.abs(rt) ** 2 + np.abs(rb) ** 2)
    cs, cl, cw = _norms(curv, c.grid, weight)
    ds, dl, dw = _norms(dirac, c.grid, weight)
    beta = float(np.sqrt(c.grid.h**3 * np.sum(np.abs(c.beta[1:-1, 1:-1, 1:-1]) ** 2)))
    return ResidualReport(cs, cl, cw, ds, dl, dw, beta)


def energy(c: SWField3) -> float:
    return kernels.energy(*c.arrays(), c.grid.h, c.t)


def energy_gradient(c: SWField3):
    """Energy and gradient (gA1, gA2, gA3, g_alpha, g_beta); complex entries
    hold d/dRe + i d/dIm."""
    return kernels.energy_grad(*c.arrays(), c.grid.h, c.t)


def linf_bound_check(c: SWField3):
    m = float(np.max(np.abs(c.alpha) ** 2 + np.abs(c.beta) ** 2))
    return m, bool(m <= c.t * (1 + 5 * c.grid.h**2))


def gauge_transform(c: SWField3, xi) -> SWField3:
    """Apply e^{i xi}: psi -> e^{i xi} psi, A -> A + 2 d xi (exact derivatives of
    xi must be supplied as a tuple (xi, dxi1, dxi2, dxi3))."""
    xi, d1, d2, d3 = xi
    ph = np.exp(1j * xi)
    return c.with_arrays(c.A1 + 2 * d1, c.A2 + 2 * d2, c.A3 + 2 * d3, ph * c.alpha, ph * c.beta,
                         gauge="temporal" if np.all(d3 == 0) and c.gauge == "temporal" else "general")


def bump(grid: Grid3, center=(0.0, 0.0, 0.0), radius: float = 2.0) -> np.ndarray:
    """Smooth compactly supported bump, 1 at the center."""
    X, Y, Z = grid.mesh()
    r2 = ((X - center[0]) ** 2 + (Y - center[1]) ** 2 + (Z - center[2]) ** 2) / radius**2
    out = np.zeros(grid.shape)
    inside = r2 < 1
    out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
    return out


# ----------------------------------------------------------------- descent

@dataclass
class DescentResult:
    field: SWField3
    energies: list = field(default_factory=list)
    beta_norms: list = field(default_factory=list)
    iterations: int = 0
    stalled: bool = False


def _pack(c: SWField3):
    s = (slice(1, -1),) * 3
    return np.concatenate([c.A1[s].ravel(), c.A2[s].ravel(), c.alpha[s].real.ravel(),
                           c.alpha[s].imag.ravel(), c.beta[s].real.ravel(), c.beta[s].imag.ravel()])


def _unpack(c: SWField3, x):
    s = (slice(1, -1),) * 3
    m = np.prod([n - 2 for n in c.grid.shape])
    sh = tuple(n - 2 for n in c.grid.shape)
    parts = [x[k * m:(k + 1) * m].reshape(sh) for k in range(6)]
    A1, A2 = c.A1.copy(), c.A2.copy()
    al, be = c.alpha.copy(), c.beta.copy()
    A1[s], A2[s] = parts[0], parts[1]
    al[s] = parts[2] + 1j * parts[3]
    be[s] = parts[4] + 1j * parts[5]
    return c.with_arrays(A1, A2, c.A3, al, be)


def _grad_vec(c: SWField3):
    E, g1, g2, _, ga, gb = energy_gradient(c)
    s = (slice(1, -1),) * 3
    return E, np.concatenate([g1[s].ravel(), g2[s].ravel(), ga[s].real.ravel(), ga[s].imag.ravel(),
                              gb[s].real.ravel(), gb[s].imag.ravel()])


def minimize_energy(c0: SWField3, max_iter: int = 5000, gtol: float = 1e-14,
                    direction: str = "lbfgs", memory: int = 10, c_armijo: float = 1e-4,
                    beta_target: Optional[float] = None) -> DescentResult:
    """Backtracking (Armijo, factor 1/2) descent on interior node values.

    A3 stays zero (temporal gauge) and boundary values are frozen.
    ``direction`` is 'steepest' or 'lbfgs' (limited-memory quasi-Newton
    direction; every step still passes the Armijo test).  Stops when the
    gradient norm drops below ``gtol``, when ``||beta||_2`` falls under
    ``beta_target``, at ``max_iter``, or when the step underflows (then the
    best iterate is returned with ``stalled`` set).
    """
    if c0.gauge != "temporal":
        raise ValueError("descent runs in temporal gauge")
    x = _pack(c0)
    E, g = _grad_vec(c0)
    cur = c0
    res = DescentResult(c0, [E], [sw_residual(c0).beta_l2])
    S, Yl = [], []
    step0 = 1.0
    for it in range(max_iter):
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            break
        if beta_target is not None and res.beta_norms[-1] <= beta_target:
            break
        if direction == "lbfgs" and S:
            q = g.copy()
            al = []
            for s_, y_ in zip(reversed(S), reversed(Yl)):
                rho = 1.0 / np.dot(y_, s_)
                a = rho * np.dot(s_, q)
                q -= a * y_
                al.append((rho, a))
            q *= np.dot(S[-1], Yl[-1]) / np.dot(Yl[-1], Yl[-1])
            for (s_, y_), (rho, a) in zip(zip(S, Yl), reversed(al)):
                q += s_ * (a - rho * np.dot(y_, q))
            d = -q
            step = 1.0
        else:
            d = -g
            step = step0
        slope = float(np.dot(g, d))
        if slope >= 0:
            d, slope, S, Yl = -g, -gn**2, [], []
            step = step0
        while True:
            xt = x + step * d
            ct = _unpack(cur, xt)
            Et, gt = _grad_vec(ct)
            if Et <= E + c_armijo * step * slope:
                break
            step *= 0.5
            if step < 1e-20:
                res.stalled = True
                log.warning("descent step underflow at iteration %d", it)
                res.field, res.iterations = cur, it
                return res
        if direction == "steepest":
            step0 = step * 2
        else:
            step0 = max(step, 1e-12) * 2
            sv, yv = xt - x, gt - g
            if np.dot(sv, yv) > 1e-300:
                S.append(sv)
                Yl.append(yv)
                if len(S) > memory:
                    S.pop(0)
                    Yl.pop(0)
        x, g, E, cur = xt, gt, Et, ct
        res.energies.append(E)
        res.beta_norms.append(float(np.sqrt(cur.grid.h**3 * np.sum(np.abs(cur.beta[1:-1, 1:-1, 1:-1]) ** 2))))
        res.iterations = it + 1
    res.field = cur
    return res
