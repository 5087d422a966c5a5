"""Linearized operators at vortices and at three-dimensional configurations.

Planar sections (b, lam) are complex fields.  ``b`` encodes a real 1-form
perturbation ``(a1', a2')`` as ``b = i (a1' + i a2')``; with this choice

    Theta(b, lam) = (-4 d b + conj(alpha) lam,  2 dbar_A lam - b alpha)

has first component ``2 dE2 + i delta1`` and second component ``2 dE1``,
where (E1, E2) are the vortex residuals and
``delta1 = -2 div a' + Im(conj(alpha) lam)`` is the exact discrete adjoint of
the infinitesimal gauge action ``xi -> (d xi, i xi alpha)``.

Perturbations vanish on the boundary ring, so operators act on interior
nodes only.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constants as C
from .grid import Grid2, deriv


# ------------------------------------------------------------------ handles

@dataclass
class OperatorHandle:
    """Sparse operator between weighted coordinate spaces.

    ``domain_weights``/``range_weights`` are the diagonal of the inner
    product (real part of the hermitian product for complex vectors).
    """
    name: str
    grid: object
    matrix: sp.spmatrix
    domain_weights: np.ndarray
    range_weights: np.ndarray
    domain_layout: tuple = ()
    range_layout: tuple = ()
    is_adjoint: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return self.matrix @ x

    def adjoint(self) -> "OperatorHandle":
        Wd = sp.diags(1.0 / self.domain_weights)
        Wr = sp.diags(self.range_weights)
        M = (Wd @ self.matrix.conj().T @ Wr).tocsr()
        return OperatorHandle(self.name + "*", self.grid, M, self.range_weights,
                              self.domain_weights, self.range_layout, self.domain_layout,
                              not self.is_adjoint, dict(self.meta))

    def inner_domain(self, x, y) -> float:
        return float(np.real(np.vdot(x, self.domain_weights * y)))

    def inner_range(self, x, y) -> float:
        return float(np.real(np.vdot(x, self.range_weights * y)))

    def normalized(self):
        """Matrix of the operator between orthonormal coordinates."""
        return (sp.diags(np.sqrt(self.range_weights)) @ self.matrix
                @ sp.diags(1.0 / np.sqrt(self.domain_weights))).tocsc()


# ---------------------------------------------------------- difference pieces

def _d1(n, h):
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [-1, 1]) / (2 * h)


def interior_derivatives(nx: int, ny: int, h: float):
    """Central differences acting on interior nodes with zero boundary data."""
    mx, my = nx - 2, ny - 2
    D1 = sp.kron(_d1(mx, h), sp.identity(my), format="csr")
    D2 = sp.kron(sp.identity(mx), _d1(my, h), format="csr")
    return D1, D2


def _inner(arr):
    return np.asarray(arr)[1:-1, 1:-1].ravel()


def pack(grid: Grid2, *fields) -> np.ndarray:
    """Interior values of complex node fields, concatenated."""
    return np.concatenate([_inner(np.asarray(f, dtype=complex)) for f in fields])


def unpack(grid: Grid2, vec, count: int):
    m = (grid.nx - 2) * (grid.ny - 2)
    out = []
    for k in range(count):
        f = np.zeros(grid.shape, dtype=complex)
        f[1:-1, 1:-1] = np.asarray(vec[k * m:(k + 1) * m]).reshape(grid.nx - 2, grid.ny - 2)
        out.append(f)
    return out


# -------------------------------------------------------------------- Theta

THETA_DOMAIN_WEIGHTS = (C.FORM_WEIGHT / 1.0, C.SPINOR_WEIGHT)   # (b, lam)
THETA_RANGE_WEIGHTS = (1.0 / C.FORM_WEIGHT, C.SPINOR_WEIGHT)   # (first, second)


def assemble_theta(vortex) -> OperatorHandle:
    """Discrete Theta at a planar vortex (fields: grid, alpha, a1, a2)."""
    g = vortex.grid
    D1, D2 = interior_derivatives(g.nx, g.ny, g.h)
    al = _inner(vortex.alpha)
    A = _inner(vortex.a1 + 1j * vortex.a2)
    d = 0.5 * (D1 - 1j * D2)
    dbar = 0.5 * (D1 + 1j * D2)
    top = sp.hstack([-4 * d, sp.diags(np.conj(al))])
    bot = sp.hstack([-sp.diags(al), 2 * dbar - 1j * sp.diags(A)])
    M = sp.vstack([top, bot]).tocsr()
    m = al.size
    dw = np.concatenate([np.full(m, THETA_DOMAIN_WEIGHTS[0]), np.full(m, THETA_DOMAIN_WEIGHTS[1])])
    rw = np.concatenate([np.full(m, THETA_RANGE_WEIGHTS[0]), np.full(m, THETA_RANGE_WEIGHTS[1])])
    return OperatorHandle("Theta", g, M, dw, rw, ("b", "lam"), ("curv+gauge", "dbar"),
                          meta={"n": getattr(getattr(vortex, "centers", None), "n", None)})


def form_from_b(b):
    """Real 1-form (a1', a2') encoded by b = i (a1' + i a2')."""
    w = -1j * np.asarray(b)
    return w.real, w.imag


def b_from_form(a1, a2):
    return 1j * (np.asarray(a1) + 1j * np.asarray(a2))


def gauge_delta1(vortex, b, lam) -> np.ndarray:
    """-2 div a' + Im(conj(alpha) lam), zero on the boundary ring."""
    g = vortex.grid
    a1, a2 = form_from_b(b)
    div = deriv(a1, 0, g.h) + deriv(a2, 1, g.h)
    out = -C.FORM_WEIGHT * div + np.imag(np.conj(vortex.alpha) * lam)
    out[0, :] = out[-1, :] = out[:, 0] = out[:, -1] = 0
    return out


def gauge_direction(vortex, xi):
    """Infinitesimal gauge action xi -> (d xi, i xi alpha) as a section (b, lam)."""
    h = vortex.grid.h
    b = b_from_form(deriv(xi, 0, h), deriv(xi, 1, h))
    return b, 1j * xi * vortex.alpha


# ---------------------------------------------------------- kernel analysis

@dataclass
class KernelReport:
    singular_values: list
    dim_ker: Optional[int]
    dim_coker: Optional[int]
    gap_ratio: float
    status: str
    kernel_basis: list = field(default_factory=list)
    cokernel_basis: list = field(default_factory=list)
    decay_rates: list = field(default_factory=list)
    decay_quality: list = field(default_factory=list)
    discarded_doublers: int = 0

    def to_json(self) -> dict:
        return dict(sorted({
            "dim_coker": self.dim_coker,
            "dim_ker": self.dim_ker,
            "decay_quality": [float(q) for q in self.decay_quality],
            "decay_rates": [float(r) for r in self.decay_rates],
            "discarded_doublers": self.discarded_doublers,
            "gap_ratio": float(self.gap_ratio),
            "singular_values": [float(s) for s in self.singular_values],
            "status": self.status,
        }.items()))


def roughness(grid: Grid2, vec, count: int) -> float:
    """Share of spectral energy beyond half the Nyquist frequency on either axis.

    Central differences vanish on the modes (-1)^i, (-1)^j, (-1)^(i+j), so
    the discrete operators carry lattice doubler copies of their smooth
    kernels; those copies live in the outer half of the frequency square.
    """
    m1, m2 = grid.nx - 2, grid.ny - 2
    tot = hi = 0.0
    k1 = np.abs(np.fft.fftfreq(m1))[:, None]
    k2 = np.abs(np.fft.fftfreq(m2))[None, :]
    mask = (k1 > 0.25) | (k2 > 0.25)
    for c in range(count):
        F = np.fft.fft2(np.asarray(vec[c * m1 * m2:(c + 1) * m1 * m2]).reshape(m1, m2))
        e = np.abs(F) ** 2
        tot += e.sum()
        hi += e[mask].sum()
    return float(hi / tot) if tot > 0 else 0.0


def _smooth_subspace(grid, basis, count):
    """Split the span of orthonormal columns into smooth and rough parts."""
    if basis.shape[1] == 0:
        return basis
    m1, m2 = grid.nx - 2, grid.ny - 2
    k1 = np.abs(np.fft.fftfreq(m1))[:, None]
    k2 = np.abs(np.fft.fftfreq(m2))[None, :]
    mask = ((k1 > 0.25) | (k2 > 0.25)).ravel()
    hp = []
    for j in range(basis.shape[1]):
        parts = []
        for c in range(count):
            F = np.fft.fft2(basis[c * m1 * m2:(c + 1) * m1 * m2, j].reshape(m1, m2)).ravel()
            parts.append(np.where(mask, F, 0) / np.sqrt(m1 * m2))
        hp.append(np.concatenate(parts))
    H = np.array(hp).T
    Q = H.conj().T @ H
    w, R = np.linalg.eigh(Q)
    return basis @ R[:, w < 0.5]


def _smallest_singular(M, k: int, dense_limit: int):
    """Smallest k singular values of a square sparse matrix with left and
    right singular subspaces (columns ordered by singular value)."""
    n = M.shape[1]
    if n <= dense_limit // 8:
        U, s, Vh = sla.svd(M.toarray(), lapack_driver="gesdd")
        order = np.argsort(s)[:k]
        return s[order], U[:, order], Vh[order].conj().T
    MhM = (M.conj().T @ M).tocsc()
    MMh = (M @ M.conj().T).tocsc()
    shift = -1e-9
    # fixed start vector: ARPACK's own random start makes repeated runs differ
    v0 = np.random.default_rng(0).standard_normal(n).astype(M.dtype)
    ev, V = spla.eigsh(MhM, k=k, sigma=shift, which="LM", v0=v0)
    ew, U = spla.eigsh(MMh, k=k, sigma=shift, which="LM", v0=v0)
    order = np.argsort(ev)
    oU = np.argsort(ew)
    s = np.sqrt(np.clip(ev[order], 0, None))
    # Ritz vectors inside a round-off cluster are not mutually orthogonal
    Qu, _ = np.linalg.qr(U[:, oU])
    Qv, _ = np.linalg.qr(V[:, order])
    return s, Qu, Qv


def operator_norm(M) -> float:
    v = spla.svds(M, k=1, which="LM", return_singular_vectors=False, random_state=0)
    return float(v[0])


def radial_decay(grid: Grid2, field_mag, r0: float, r1: float):
    """Exponential rate of the radial maximum envelope of a magnitude field."""
    r = np.abs(grid.z - grid.center)
    edges = np.arange(r0, r1 + grid.h, 2 * grid.h)
    rs, env = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        if sel.any():
            rs.append(0.5 * (lo + hi))
            env.append(field_mag[sel].max())
    rs, env = np.array(rs), np.array(env)
    if len(rs) < 3 or np.any(env <= 0):
        return float("nan"), float("nan")
    y = np.log(env)
    slope, icept = np.polyfit(rs, y, 1)
    pred = slope * rs + icept
    q = 1 - np.sum((y - pred) ** 2) / max(np.sum((y - y.mean()) ** 2), 1e-300)
    return float(-slope), float(q)


def _smooth_sequence(grid, s, vecs, count, floor):
    """Singular values whose vectors are smooth, with those vectors.

    Values within 10% of each other (after clamping at ``floor``) form a
    cluster whose span is split by :func:`_smooth_subspace`, since nearly
    degenerate smooth and doubler directions mix arbitrarily."""
    eff = np.maximum(s, floor)
    vals, cols = [], []
    i = 0
    while i < len(s):
        j = i + 1
        while j < len(s) and eff[j] <= 1.1 * eff[j - 1]:
            j += 1
        sub = _smooth_subspace(grid, vecs[:, i:j], count)
        for c in range(sub.shape[1]):
            vals.append(float(np.mean(s[i:j])) if j - i > 1 else float(s[i]))
            cols.append(sub[:, c])
        i = j
    return np.array(vals), (np.array(cols).T if cols else vecs[:, :0])


def _cut(vals, floor, gap_policy):
    """Number of near-null values and the gap ratio, or None if no gap.

    The cut sits at the highest ratio between consecutive values of
    (floor, v0, v1, ...) that reaches the policy, each value clamped at the
    floor.  Discretely broken symmetries leave kernel values well above
    round-off, so the step at the floor can rival the genuine gap."""
    if len(vals) == 0:
        return None, 1.0
    eff = np.concatenate([[floor], np.maximum(vals, floor)])
    ratios = eff[1:] / eff[:-1]
    ok = np.flatnonzero(ratios >= gap_policy)
    if len(ok) == 0:
        return None, float(ratios.max())
    i = int(ok[-1])
    return i, float(ratios[i])


def kernel_analysis(op: OperatorHandle, gap_policy: float = 100.0, extra: int = 8,
                    dense_limit: int = 20000, decay_annulus=None,
                    kernel_dim: Optional[int] = None) -> KernelReport:
    """Kernel and cokernel dimensions of a square planar operator.

    Singular values are computed in orthonormal coordinates of the declared
    inner products, values under the round-off floor sqrt(eps) * |op|
    counting as zero.  Lattice doubler directions (see :func:`roughness`)
    are split off first; the smooth right (left) singular directions below
    the largest consecutive ratio span the kernel (cokernel), provided that
    ratio reaches ``gap_policy``.  ``kernel_dim`` (complex) overrides the
    gap rule for the kernel when the dimension is known in advance; the
    report status is then "prescribed".
    """
    if gap_policy < 100:
        raise ValueError("gap policy ratio must be at least 100")
    g = op.grid
    n_hint = op.meta.get("n") or 0
    ncomp = len(op.domain_layout) or 2
    k = min(4 * n_hint + extra, op.shape[1] - 2)
    Mn = op.normalized()
    s, U, V = _smallest_singular(Mn, k, dense_limit)
    floor = np.sqrt(np.finfo(float).eps) * operator_norm(Mn)
    real_sv = [float(x) for x in np.repeat(s, 2)]
    kv, Ks = _smooth_sequence(g, s, V, ncomp, floor)
    cv, Cs = _smooth_sequence(g, s, U, ncomp, floor)
    nk, gk = _cut(kv, floor, gap_policy)
    nc, gc = _cut(cv, floor, gap_policy)
    status = "ok"
    if kernel_dim is not None:
        if nk != kernel_dim:
            status = "prescribed"
            nk = kernel_dim
            lo = max(kv[nk - 1], floor) if nk > 0 else floor
            gk = float(max(kv[nk], floor) / lo) if nk < len(kv) else 1.0
        if nc is None:
            nc = 0
    if nk is None or nc is None or nk >= len(kv) or nc >= len(cv):
        return KernelReport(real_sv, None, None, min(gk, gc), "inconclusive")
    dw = np.sqrt(op.domain_weights)
    rw = np.sqrt(op.range_weights)
    kb = [unpack(g, Ks[:, i] / dw, ncomp) for i in range(nk)]
    cb = [unpack(g, Cs[:, i] / rw, ncomp) for i in range(nc)]
    rates, qual = [], []
    if decay_annulus is not None:
        r0, r1 = decay_annulus
        for fields in kb:
            mag = np.sqrt(sum(np.abs(f) ** 2 for f in fields))
            rt, q = radial_decay(g, mag, r0, r1)
            rates.append(rt)
            qual.append(q)
    return KernelReport([float(x) for x in np.repeat(kv, 2)], 2 * nk, 2 * nc, min(gk, gc), status,
                        kb, cb, rates, qual, len(s) - len(kv))


# --------------------------------------------------------------- 3-D operators
#
# A 3-D section is a tuple (gamma, a1, a2, a3, eta_a, eta_b) of full-grid
# arrays vanishing on the boundary: gamma real (gauge direction), a real
# perturbation of the E-connection a = A / 2, eta complex spinor.  The
# pointwise inner product weighs them (2, 2, 2, 2, 1, 1).

SECTION_WEIGHTS = (C.GAUGE_WEIGHT, C.FORM_WEIGHT, C.FORM_WEIGHT, C.FORM_WEIGHT,
                   C.SPINOR_WEIGHT, C.SPINOR_WEIGHT)


def _dc(f, axis, h):
    """Central difference on interior nodes, zero on the boundary."""
    out = np.zeros(f.shape, dtype=f.dtype)
    lo = [slice(1, -1)] * f.ndim
    hi = [slice(1, -1)] * f.ndim
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    out[(slice(1, -1),) * f.ndim] = (f[tuple(hi)] - f[tuple(lo)]) / (2 * h)
    return out


def _mask(f):
    f = np.array(f, copy=True)
    f[0] = f[-1] = 0
    f[:, 0] = f[:, -1] = 0
    f[:, :, 0] = f[:, :, -1] = 0
    return f


def zero_section(grid):
    z = np.zeros(grid.shape)
    return (z, z.copy(), z.copy(), z.copy(), z.astype(complex), z.astype(complex))


def section_inner(grid, s1, s2) -> float:
    """Weighted L2 product h^3 sum w_k Re(conj(s1_k) s2_k)."""
    tot = 0.0
    for w, f, g in zip(SECTION_WEIGHTS, s1, s2):
        tot += w * float(np.real(np.vdot(f, g)))
    return grid.h**3 * tot


def section_norm(grid, s) -> float:
    """Unweighted discrete L2 norm."""
    return float(np.sqrt(grid.h**3 * sum(np.sum(np.abs(f) ** 2) for f in s)))


def _nabla(c, f, axis):
    h = c.grid.h
    A = (c.A1, c.A2, c.A3)[axis]
    return _dc(f, axis, h) - 0.5j * A * f


def d_c(c, xi):
    """Infinitesimal gauge action xi -> (d xi, i xi psi)."""
    h = c.grid.h
    xi = _mask(xi)
    return (_dc(xi, 0, h), _dc(xi, 1, h), _dc(xi, 2, h),
            _mask(1j * xi * c.alpha), _mask(1j * xi * c.beta))


def d_c_star(c, a1, a2, a3, ea, eb):
    """Weighted adjoint of :func:`d_c`: -div a + Im(psi^dagger eta) / 2."""
    h = c.grid.h
    div = _dc(a1, 0, h) + _dc(a2, 1, h) + _dc(a3, 2, h)
    return _mask(-div + 0.5 * np.imag(np.conj(c.alpha) * ea + np.conj(c.beta) * eb))


def D_c(c, a1, a2, a3, ea, eb):
    """Linearization of the monopole map at c, in the symmetric normalization.

    Form part: curl a + (Re(conj(al) eb + conj(ea) be), Im(..), Re(conj(al) ea - conj(be) eb)) / 2,
    spinor part: i sigma . nabla eta + rho(a) psi.
    """
    h = c.grid.h
    al, be = c.alpha, c.beta
    cross = np.conj(al) * eb + np.conj(ea) * be
    f1 = _dc(a3, 1, h) - _dc(a2, 2, h) + 0.5 * cross.real
    f2 = _dc(a1, 2, h) - _dc(a3, 0, h) + 0.5 * cross.imag
    f3 = _dc(a2, 0, h) - _dc(a1, 1, h) + 0.5 * np.real(np.conj(al) * ea - np.conj(be) * eb)
    n1a, n2a, n3a = (_nabla(c, ea, k) for k in range(3))
    n1b, n2b, n3b = (_nabla(c, eb, k) for k in range(3))
    sa = 1j * n3a + 1j * n1b + n2b + a3 * al + (a1 - 1j * a2) * be
    sb = 1j * n1a - n2a - 1j * n3b + (a1 + 1j * a2) * al - a3 * be
    return tuple(_mask(f) for f in (f1, f2, f3, sa, sb))


def apply_Dc(c, section):
    """Extended operator (gamma, q) -> (d_c* q, d_c gamma + D_c q)."""
    g, a1, a2, a3, ea, eb = section
    dg = d_c(c, g)
    Dq = D_c(c, a1, a2, a3, ea, eb)
    return (d_c_star(c, a1, a2, a3, ea, eb),) + tuple(_mask(x + y) for x, y in zip(dg, Dq))


# ------------------------------------------------- horizontal / normal split

def _slice_vortex(c):
    """Planar data of an x3-invariant configuration, or ValueError."""
    from types import SimpleNamespace
    k0 = c.grid.nz // 2
    ok = (np.all(c.A3 == 0) and np.all(c.beta == 0)
          and all(np.allclose(f, f[:, :, k0:k0 + 1], rtol=0, atol=1e-12)
                  for f in (c.A1, c.A2, c.alpha)))
    if not ok:
        raise ValueError("configuration is not an x3-invariant pullback with beta = 0")
    g2 = Grid2(c.grid.nx, c.grid.ny, c.grid.h, c.grid.center)
    return SimpleNamespace(grid=g2, alpha=c.alpha[:, :, k0], a1=0.5 * c.A1[:, :, k0],
                           a2=0.5 * c.A2[:, :, k0], t=c.t, centers=None)


def _to_blocks(section):
    """(b, lam) and (w, mu) per node: b = i(a1 + i a2), w = 2i(a3 + i gamma)."""
    g, a1, a2, a3, ea, eb = section
    return (1j * (a1 + 1j * a2), ea.astype(complex)), (2j * (a3 + 1j * g), eb.astype(complex))


def _from_blocks(first, second):
    b, lam = first
    w, mu = second
    f = -1j * b
    v = w / 2j
    return (v.imag, f.real, f.imag, v.real, lam, mu)


def _slices_apply(M, grid, fields):
    """Apply a planar interior matrix to every x3 slice of stacked fields."""
    nx, ny, nz = fields[0].shape
    cols = np.concatenate([f[1:-1, 1:-1, :].reshape(-1, nz) for f in fields], axis=0)
    res = M @ cols
    m = (nx - 2) * (ny - 2)
    out = []
    for k in range(len(fields)):
        f = np.zeros((nx, ny, nz), dtype=complex)
        f[1:-1, 1:-1, :] = res[k * m:(k + 1) * m].reshape(nx - 2, ny - 2, nz)
        f[:, :, 0] = f[:, :, -1] = 0
        out.append(f)
    return out


def decompose_TN(c, section, theta: Optional[OperatorHandle] = None):
    """Horizontal and normal parts with D_c = i (T' + N').

    Returns (T'-part, N'-part, defect); the parts are sections and the defect
    is the unweighted L2 norm of D_c(section) - i (T' + N')(section).
    """
    v = _slice_vortex(c)
    op = theta if theta is not None else assemble_theta(v)
    h = c.grid.h
    first, second = _to_blocks(section)
    Tf = tuple(_mask(_dc(f, 2, h)) for f in first)
    Ts = tuple(_mask(-_dc(f, 2, h)) for f in second)
    Nf = tuple(-f for f in _slices_apply(op.adjoint().matrix, v.grid, second))
    Ns = tuple(_slices_apply(op.matrix, v.grid, first))
    T = _from_blocks(Tf, Ts)
    N = _from_blocks(Nf, Ns)
    full = _from_blocks(tuple(1j * (x + y) for x, y in zip(Tf, Nf)),
                        tuple(1j * (x + y) for x, y in zip(Ts, Ns)))
    D = apply_Dc(c, section)
    defect = section_norm(c.grid, tuple(x - y for x, y in zip(D, full)))
    return T, N, defect


# ------------------------------------------------------------ slice kernel

@dataclass
class SliceKernel:
    """Orthonormal basis of Ker Theta on one slice, shared by all slices."""
    grid: object
    basis: np.ndarray          # columns: interior (b, lam) vectors, W-orthonormal
    weights: np.ndarray
    rank: int
    report: Optional[KernelReport] = None

    def fields(self, j):
        return unpack(self.grid, self.basis[:, j], 2)


def slice_kernel(c, gap_policy: float = 100.0, theta: Optional[OperatorHandle] = None,
                 n: Optional[int] = None) -> SliceKernel:
    v = _slice_vortex(c)
    op = theta if theta is not None else assemble_theta(v)
    if n is not None:
        op.meta["n"] = n
    rep = kernel_analysis(op, gap_policy, kernel_dim=n)
    if rep.status not in ("ok", "prescribed"):
        raise ValueError("slice kernel inconclusive: no spectral gap")
    B = np.array([pack(v.grid, *f) for f in rep.kernel_basis]).T.reshape(op.shape[1], -1)
    w = op.domain_weights
    # re-orthonormalize in the weighted product (complex Gram-Schmidt via QR)
    if B.shape[1]:
        Q, _ = np.linalg.qr(np.sqrt(w)[:, None] * B)
        B = Q / np.sqrt(w)[:, None]
    return SliceKernel(v.grid, B, w, B.shape[1], rep)


def project_Pi(c, section, K: Optional[SliceKernel]):
    """Slice-wise projection of a section onto the kernel bundle.

    The first block (b, lam) of each slice is projected onto span K; the
    second block is dropped, since kernel elements have the form (k, 0).
    """
    if K is None:
        raise ValueError("slice kernel basis missing")
    first, second = _to_blocks(section)
    nx, ny, nz = first[0].shape
    m = (nx - 2) * (ny - 2)
    cols = np.concatenate([f[1:-1, 1:-1, :].reshape(-1, nz) for f in first], axis=0)
    B = K.basis
    proj = B @ (B.conj().T @ (K.weights[:, None] * cols))
    out = []
    for k in range(2):
        f = np.zeros((nx, ny, nz), dtype=complex)
        f[1:-1, 1:-1, :] = proj[k * m:(k + 1) * m].reshape(nx - 2, ny - 2, nz)
        f[:, :, 0] = f[:, :, -1] = 0
        out.append(f)
    zero = np.zeros((nx, ny, nz), dtype=complex)
    return _from_blocks(tuple(out), (zero, zero.copy()))


def project_Pi_complement(c, section, K: SliceKernel):
    P = project_Pi(c, section, K)
    return tuple(x - y for x, y in zip(section, P))
