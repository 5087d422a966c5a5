"""Gluing far vortices onto a base solution and correcting to an exact one.

The planar residual map is ``F(c) = (2 E2, 2 E1)`` with ``E1 = dbar_A alpha``
and ``E2 = curl a - (t - |alpha|^2)/4``; its linearization with the gauge
condition delta1 in the imaginary part of the first slot is the operator
Theta of :mod:`swlab.linear_ops`.  Corrections use the regularized right
inverse ``G = L* (L L* + mu)^-1`` of ``L = Theta(c)``; each iterate is then
projected onto ker delta1 along the gauge directions, so accepted updates
satisfy delta1 = 0 to round-off.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import CutoffProfile, WeightSpec, cutoff_eval, deriv
from .linear_ops import assemble_theta, form_from_b, interior_derivatives, pack, unpack
from .vortex import (CenterSet, SolverError, VortexSolution, centers_of, from_fields,
                     solve_vortex, vortex_number, vortex_residual)

log = logging.getLogger(__name__)


class ContractionError(RuntimeError):
    def __init__(self, k, eta):
        self.k, self.eta = k, eta
        super().__init__(f"contraction precondition fails: |eta| = {eta:.3e} > 1/(10 k) with k = {k:.3e}")


class BandError(ValueError):
    pass


# ------------------------------------------------------------ residual map

def residual_vector(c) -> np.ndarray:
    """F(c) = (2 E2, 2 E1) on interior nodes, packed like Theta's range."""
    e1, e2 = vortex_residual(c.a1, c.a2, c.alpha, c.grid.h, c.t)
    return pack(c.grid, 2 * e2, 2 * e1)


def _apply_update(c, q):
    b, lam = unpack(c.grid, q, 2)
    da1, da2 = form_from_b(b)
    return from_fields(c.grid, c.t, c.centers, c.a1 + da1, c.a2 + da2, c.alpha + lam, c.iterations)


class _RightInverse:
    """G = W_d^-1 L^H W_r (L W_d^-1 L^H W_r + mu)^-1, factorized once."""

    def __init__(self, c, cutoff: float = 1e-2):
        op = assemble_theta(c)
        self.op = op
        self.Mn = op.normalized()
        NN = (self.Mn @ self.Mn.conj().T).tocsc()
        # Tikhonov shift: singular directions far below `cutoff` (the lattice
        # remnants of the translation kernel and the doubler pairs) are
        # treated as kernel, the rest of the spectrum sits near 0.5 and above
        mu = cutoff**2
        self.lu = spla.splu((NN + mu * sp.identity(NN.shape[0], format="csc")).tocsc(),
                            permc_spec="MMD_AT_PLUS_A")
        self.sd = np.sqrt(op.domain_weights)
        self.sr = np.sqrt(op.range_weights)
        # gauge directions xi -> (d xi, i xi alpha) and delta1 on them, an
        # elliptic operator -2 Lap + |alpha|^2
        g = c.grid
        D1, D2 = interior_derivatives(g.nx, g.ny, g.h)
        al = np.asarray(c.alpha)[1:-1, 1:-1].ravel()
        self.Gd = sp.vstack([1j * D1 - D2, sp.diags(1j * al)]).tocsr()
        m = al.size
        S = (op.matrix[:m] @ self.Gd).imag.tocsc()
        self.S_lu = spla.splu(S, permc_spec="MMD_AT_PLUS_A")

    def L(self, q):
        return self.op.matrix @ q

    def gauge_part(self, q):
        """i delta1_c(q) in the first slot: the gauge rows of L applied to q."""
        out = np.zeros_like(q)
        m = q.size // 2
        out[:m] = 1j * np.imag(self.L(q)[:m])
        return out

    def project_gauge(self, q):
        """Remove the gauge component: q - gd(xi) with delta1(q - gd(xi)) = 0."""
        m = q.size // 2
        xi = self.S_lu.solve(np.imag(self.L(q)[:m]))
        return q - self.Gd @ xi

    def f(self, c, q):
        """Gauge-fixed map q -> F(c + q) + i delta1_c(q), whose derivative at 0 is L."""
        return residual_vector(_apply_update(c, q)) + self.gauge_part(q)

    def G(self, r):
        y = self.lu.solve(self.sr * r)
        return (self.Mn.conj().T @ y) / self.sd


def _norm_range(c, r, op):
    return float(np.sqrt(c.grid.h**2 * np.real(np.vdot(r, op.range_weights * r))))


def _norm_domain(c, q, op):
    return float(np.sqrt(c.grid.h**2 * np.real(np.vdot(q, op.domain_weights * q))))


@dataclass
class CorrectionRecord:
    initial_residual_l2: float
    initial_residual_sup: float
    residuals: list = field(default_factory=list)
    updates: list = field(default_factory=list)
    final_residual: float = float("nan")
    q_ratio: float = 0.0
    k_estimate: float = 0.0
    converged: bool = False
    iterations: int = 0
    delta1_ratio: float = 0.0
    mode: str = "fixed"

    def to_json(self) -> dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
                for k, v in sorted(self.__dict__.items())}


def _probe_field(c, eta, seed, sweeps: int = 16):
    """Smooth random field on the range with the weighted norm of eta."""
    rng = np.random.default_rng(seed)
    g = c.grid
    shape = (2, g.nx - 2, g.ny - 2)
    noise = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    for _ in range(sweeps):
        noise[:, 1:-1, 1:-1] = 0.2 * (noise[:, 1:-1, 1:-1] + noise[:, 2:, 1:-1] + noise[:, :-2, 1:-1]
                                      + noise[:, 1:-1, 2:] + noise[:, 1:-1, :-2])
    p = noise.reshape(-1)
    return p * (np.linalg.norm(eta) / max(np.linalg.norm(p), 1e-300))


def estimate_k(c, ri: _RightInverse, eta, probes: int = 3, seed: int = 0, safety: float = 4.0):
    """Empirical constant of |B(Gh1) - B(Gh2)| <= k (|h1| + |h2|) |h1 - h2|.

    Probes are -eta, -eta/2 and smooth random fields of the same size.
    """
    F0 = residual_vector(c)
    hs = [-eta, -0.5 * eta] + [_probe_field(c, eta, seed + i) for i in range(probes - 2)]
    Bs = []
    for hvec in hs:
        q = ri.G(hvec)
        Bs.append(ri.f(c, q) - F0 - ri.L(q))
    nr = lambda r: _norm_range(c, r, ri.op)
    best = 0.0
    for i in range(len(hs)):
        for j in range(i + 1, len(hs)):
            den = (nr(hs[i]) + nr(hs[j])) * nr(hs[i] - hs[j])
            if den > 0:
                best = max(best, nr(Bs[i] - Bs[j]) / den)
    return safety * best


def newton_correct(c, tol: float = 1e-10, max_iter: int = 40, mode: str = "fixed",
                   check_contraction: bool = True, seed: int = 0, rtol: float = 0.0):
    """Correct an approximate vortex configuration to an exact discrete solution.

    ``mode='fixed'`` runs h_{m+1} = -eta - B(G h_m) with G frozen at c;
    ``mode='newton'`` re-linearizes at every iterate.  Convergence is
    declared when the sup norm of F falls to ``max(tol, rtol * initial)``.
    Iteration stops early once the residual stagnates: the remaining part
    lies along the near-null left singular vectors that G leaves out.
    """
    r0 = residual_vector(c)
    sup0 = float(np.max(np.abs(r0))) if r0.size else 0.0
    tol = max(tol, rtol * sup0)
    if sup0 <= tol:
        rec = CorrectionRecord(0.0, sup0, [sup0], [], sup0, 0.0, 0.0, True, 0, 0.0, mode)
        return c, rec
    ri = _RightInverse(c)
    eta = r0
    eta_n = _norm_range(c, eta, ri.op)
    rec = CorrectionRecord(eta_n, sup0, [sup0], mode=mode)
    if check_contraction:
        k = estimate_k(c, ri, eta, seed=seed)
        rec.k_estimate = k
        if eta_n > 1.0 / (10.0 * k) if k > 0 else False:
            raise ContractionError(k, eta_n)
    cur = c
    q = np.zeros_like(eta)
    F = eta
    for it in range(max_iter):
        # chord step q <- q - G F(c + q); with L G = I this is the fixed-point
        # map h_{m+1} = -eta - B(G h_m) on h = L q
        step = -ri.G(F)
        if mode == "fixed":
            q_new = ri.project_gauge(q + step)
            step = q_new - q
        else:
            step = ri.project_gauge(step)
            q_new = q + step
        if mode == "fixed":
            trial = _apply_update(c, q_new)
            Fq = residual_vector(trial) + ri.gauge_part(q_new)
        else:
            trial = _apply_update(cur, step)
            Fq = residual_vector(trial)
        sup = float(np.max(np.abs(Fq)))
        if it > 0 and sup > 2 * rec.residuals[-1]:
            log.warning("correction diverging at iteration %d (residual %.3e)", it, sup)
            break
        rec.updates.append(_norm_domain(c, step, ri.op))
        rec.residuals.append(sup)
        q, cur, F = q_new, trial, Fq
        rec.iterations = it + 1
        if sup <= tol:
            rec.converged = True
            break
        if sup > 0.99 * rec.residuals[-2]:
            log.info("correction stagnated at %.3e after %d iterations", sup, it + 1)
            break
        if mode == "newton":
            ri = _RightInverse(cur)
    rec.final_residual = rec.residuals[-1]
    qn = _norm_domain(c, q, ri.op)
    rec.q_ratio = qn / eta_n if eta_n > 0 else 0.0
    b, lam = unpack(c.grid, q, 2)
    from .linear_ops import gauge_delta1
    d1 = gauge_delta1(c, b, lam)
    rec.delta1_ratio = float(np.sqrt(np.sum(d1**2)) / max(np.sqrt(np.sum(np.abs(q) ** 2)), 1e-300))
    cur = replace(cur, residual_report={**cur.residual_report, "correction_iterations": rec.iterations})
    return cur, rec


# ------------------------------------------------------------------ preglue

@dataclass(frozen=True)
class GluingJob:
    v: VortexSolution
    y: CenterSet
    R: float
    constants: tuple = (1.0, 0.75, 0.5, 0.25)

    def __post_init__(self):
        C1, C2, C3, C4 = self.constants
        if not (C1 > C2 > C3 > C4 > 0):
            raise BandError("constants must satisfy C1 > C2 > C3 > C4 > 0")
        if not self.R > 0:
            raise BandError("R must be positive")
        for p, _ in self.v.centers.points:
            if abs(p) > C4 * self.R:
                raise BandError(f"base center {p} outside |z| <= C4 R = {C4 * self.R}")
        for p, _ in self.y.points:
            if abs(p) <= C1 * self.R:
                raise BandError(f"far center {p} inside |z| <= C1 R = {C1 * self.R}")
        if self.v.grid.radius < C1 * self.R + 6:
            raise BandError("grid does not cover radius C1 R + 6")
        g = self.v.grid
        for p, _ in self.y.points:
            if max(abs(p.real - g.center.real), abs(p.imag - g.center.imag)) > g.radius - 6:
                raise BandError(f"far center {p} closer than 6 to the grid boundary")

    def gamma(self, z):
        """Cutoff: 1 on |z| <= C3 R, 0 on |z| >= C2 R."""
        C1, C2, C3, C4 = self.constants
        s = (np.abs(z) - C3 * self.R) / ((C2 - C3) * self.R)
        return 1.0 - _step(s)


def _step(s):
    from .grid import smoothstep
    return smoothstep(s)


def _far_phase(y: CenterSet, z, alpha_y):
    """Smooth branch of arg(alpha_y) on discs around the origin missing the far centers.

    Returned as (theta0, xi) with arg(alpha_y) = theta0 + xi and xi small near
    the origin, so that cutting xi off costs little gradient.
    """
    xi = np.zeros(z.shape)
    theta0 = 0.0
    unit = np.ones(z.shape, dtype=complex)
    for p, m in y.points:
        xi += m * np.angle((z - p) / (-p))
        theta0 += m * np.angle(-p)
        with np.errstate(invalid="ignore", divide="ignore"):
            unit *= ((z - p) / np.abs(z - p)) ** m
    with np.errstate(invalid="ignore", divide="ignore"):
        rem = np.angle(alpha_y / unit)
    return theta0, xi + np.nan_to_num(rem)


def solve_far(job: GluingJob, polish: bool = True, tol: float = 1e-11) -> VortexSolution:
    y = solve_vortex(job.y, job.v.grid)
    if polish:
        y, _ = newton_correct(y, tol=tol, check_contraction=False)
    return y


def preglue(job: GluingJob, y_solution: Optional[VortexSolution] = None,
            polish: bool = True) -> VortexSolution:
    """c = v + (1 - gamma_R)(y+ - v) with y+ gauge-aligned to v on the overlap."""
    v = job.v
    if job.y.n == 0:
        return v
    if job.y == v.centers:
        return v
    g = v.grid
    y = y_solution if y_solution is not None else solve_far(job, polish=polish)
    C1, C2, C3, C4 = job.constants
    z = g.z - 0j
    r = np.abs(z)
    gam = job.gamma(z)
    # gauge for y: g = unit(alpha_v) exp(-i rho xi_y), rho = 1 on |z| <= C2 R
    rho = 1.0 - _step((r - C2 * job.R) / ((C1 - C2) * job.R))
    theta0, xi = _far_phase(job.y, z, y.alpha)
    near = r < 0.9 * C3 * job.R
    with np.errstate(invalid="ignore", divide="ignore"):
        uv = v.alpha / np.abs(v.alpha)
    uv = np.where(near | ~np.isfinite(uv), 1.0, uv)
    gauge = uv * np.exp(-1j * (theta0 + rho * xi))
    h = g.h
    dphi1 = np.imag(np.conj(gauge) * deriv(gauge, 0, h))
    dphi2 = np.imag(np.conj(gauge) * deriv(gauge, 1, h))
    ya = gauge * y.alpha
    ya1 = y.a1 + dphi1
    ya2 = y.a2 + dphi2

    def blend(fv, fy):
        mix = fv + (1 - gam) * (fy - fv)
        return np.where(gam == 1.0, fv, np.where(gam == 0.0, fy, mix))

    centers = CenterSet.of(list(v.centers.points) + list(job.y.points))
    return from_fields(g, v.t, centers, blend(v.a1, ya1), blend(v.a2, ya2), blend(v.alpha, ya))


def glue_residual(c, weight: WeightSpec, band=None):
    """Weighted L2 and sup of the pointwise residual; ``band=(r0, r1)`` also
    returns the sup over that annulus."""
    e1, e2 = vortex_residual(c.a1, c.a2, c.alpha, c.grid.h, c.t)
    s = c.grid.interior()
    mag = np.sqrt(np.abs(e1[s]) ** 2 + e2[s] ** 2)
    sig = weight.on_grid(c.grid)[s] ** weight.epsilon
    l2w = float(np.sqrt(c.grid.h**2 * np.sum((sig * mag) ** 2)))
    if band is None:
        return l2w, float(mag.max())
    r = np.abs(c.grid.z[s])
    inside = (r >= band[0]) & (r <= band[1])
    return l2w, float(mag.max()), float(mag[inside].max()) if inside.any() else 0.0


def far_center(R: float, angle: float = 0.8) -> complex:
    return 1.5 * R * np.exp(1j * angle)


def residual_sweep(R_list, h: float = 0.4, epsilon: float = 1.25, angle: float = 0.8,
                   margin: float = 8.0, weight_scale: float = 4.0, jobs: int = 1):
    """Pre-glue an n = 0 base with one far vortex at 1.5 R for each R.

    Returns rows (R, weighted residual, sup residual, sup over the gamma
    transition annulus, bound) and the fitted slopes of log(weighted
    residual) and log(annulus residual) against R.  Each R gets its own
    grid of spacing ``h`` covering radius 1.5 R + ``margin``.
    """
    R_list = [float(R) for R in R_list]
    if any(b <= a for a, b in zip(R_list, R_list[1:])):
        raise ValueError("R list must be increasing")
    weight = WeightSpec(epsilon, weight_scale, "radial")
    from .grid import Grid2

    def one(R):
        n = 2 * int(np.ceil((1.5 * R + margin) / h)) + 1
        g = Grid2(n, n, h)
        v = solve_vortex([], g)
        job = GluingJob(v, CenterSet.of([far_center(R, angle)]), R)
        c = preglue(job)
        C1, C2, C3, C4 = job.constants
        return glue_residual(c, weight, band=(C3 * R, C2 * R))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            res = list(ex.map(one, R_list))
    else:
        res = [one(R) for R in R_list]
    C = res[0][0] * R_list[0] ** (1.5 - epsilon)
    rows = [{"R": R, "residual_w": rw, "residual_sup": rs, "residual_overlap": ro,
             "bound": C * R ** (-1.5 + epsilon)}
            for R, (rw, rs, ro) in zip(R_list, res)]
    slope = float(np.polyfit(R_list, np.log([r["residual_w"] for r in rows]), 1)[0])
    overlap_slope = float(np.polyfit(R_list, np.log([r["residual_overlap"] for r in rows]), 1)[0])
    return rows, slope, overlap_slope


# ---------------------------------------------------------------- end chart

@dataclass
class ProbeResult:
    probe: complex
    converged: bool
    centers: list
    residual: float
    vortex_number: float
    error: str = ""
    field: Optional[VortexSolution] = None


def glue_and_correct(base: VortexSolution, far: CenterSet, R: float, tol: float = 1e-10,
                     constants=(1.0, 0.75, 0.5, 0.25), rtol: float = 1e-6, polish: bool = True):
    job = GluingJob(base, far, R, constants)
    c = preglue(job, polish=polish)
    return newton_correct(c, tol=tol, rtol=rtol)


def end_chart(base: VortexSolution, probes, R: float, tol: float = 1e-10, jobs: int = 1,
              constants=(1.0, 0.75, 0.5, 0.25), rtol: float = 1e-4, polish: bool = False):
    """Glue and correct one far vortex at each probe; failures are recorded per probe.

    The far vortex is taken straight from the scalar solve (``polish=False``)
    since the correction removes its discretization residual along with the
    gluing error; a probe converges when its residual drops by ``rtol``.
    """
    C1 = constants[0]

    def run(p):
        p = complex(p)
        if abs(p) <= C1 * R:
            return ProbeResult(p, False, [], float("nan"), float("nan"),
                               f"probe inside |z| <= C1 R = {C1 * R}")
        try:
            sol, rec = glue_and_correct(base, CenterSet.of([p]), R, tol, constants, rtol, polish)
        except (SolverError, ContractionError, BandError) as exc:
            return ProbeResult(p, False, [], float("nan"), float("nan"), str(exc))
        cs = centers_of(sol)
        return ProbeResult(p, rec.converged, [(complex(z), m) for z, m in cs.points],
                           rec.final_residual, vortex_number(sol), "", sol)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            return list(ex.map(run, probes))
    return [run(p) for p in probes]
