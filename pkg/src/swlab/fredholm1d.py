"""Numerical index of d/df between polynomially weighted spaces on the line.

The operator is written in the coordinate s with ds = df / varsigma, where
the weight becomes exponential at the ends, and conjugated by the weight
isometries so that both domain and range carry the plain L^2(ds) norm.
There it reads

    d/ds - (eps - 1/2) * varsigma'(f(s))

with a zeroth-order coefficient tending to -+(eps - 1/2)/R at the ends.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import cumulative_trapezoid

from .grid import CutoffProfile, WeightSpec, cutoff_eval

VARIANTS = ("plain", "adjoint", "extended", "perturbed")


class IndexError1D(RuntimeError):
    """No clean separation between near-null and bulk singular values."""


@dataclass(frozen=True)
class Weighted1DSpace:
    L: float
    m: int
    weight: WeightSpec
    k: int = 0

    def __post_init__(self):
        if self.m < 1024:
            raise ValueError(f"node count must be >= 1024, got {self.m}")
        if self.L < 20 * self.weight.R:
            raise ValueError(f"L must be >= 20 R (L={self.L}, R={self.weight.R})")
        if self.k != 0:
            raise ValueError("only k = 0 is discretized")

    @property
    def epsilon(self) -> float:
        return self.weight.epsilon

    @property
    def R(self) -> float:
        return self.weight.R


def varsigma(f, R):
    return WeightSpec(0.0, R, "x").varsigma(f)


def varsigma_prime(f, R):
    f = np.asarray(f, dtype=float)
    x = np.clip(np.abs(f) / R - 1.0, 0.0, 1.0)
    lam = cutoff_eval(CutoffProfile("even", R), f)
    dlam = -30.0 * x**2 * (1.0 - x) ** 2 / R * np.sign(f)
    return dlam * (1.0 - np.abs(f) / R) + (1.0 - lam) * np.sign(f) / R


def s_of_f(f, R):
    """s(f) = int_0^f dg / varsigma(g), cumulative trapezoid on the samples
    (which must be increasing and contain 0 in their range)."""
    f = np.asarray(f, dtype=float)
    s = cumulative_trapezoid(1.0 / varsigma(f, R), f, initial=0.0)
    return s - np.interp(0.0, f, s)


@dataclass
class OperatorHandle:
    variant: str
    space: Weighted1DSpace
    matrix: sp.csr_matrix
    s: np.ndarray
    f: np.ndarray
    ds: float
    plateau_scale: float = 0.0
    nu: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.matrix.shape

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def coefficient(self) -> np.ndarray:
        """Zeroth-order coefficient of the conjugated plain operator."""
        return -(self.space.epsilon - 0.5) * varsigma_prime(self.f, self.space.R)

    def plateau(self):
        lam = cutoff_eval(CutoffProfile("one_sided", self.plateau_scale), self.f)
        return lam, 1.0 - lam

    def encode(self, u, c_plus: float = 0.0, c_minus: float = 0.0) -> np.ndarray:
        """Domain vector of a function u sampled at the nodes.  For the
        extended variant u is split as plateau(c_plus, c_minus) + e."""
        u = np.asarray(u, dtype=float)
        eps, R = self.space.epsilon, self.space.R
        w = varsigma(self.f, R) ** (eps - 0.5)
        if self.variant == "extended":
            lp, lm = self.plateau()
            e = w * (u - c_plus * lp - c_minus * lm)
            return np.concatenate([e, [c_plus, c_minus]])
        return w * u

    def decode(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        eps, R = self.space.epsilon, self.space.R
        w = varsigma(self.f, R) ** (0.5 - eps)
        if self.variant == "extended":
            lp, lm = self.plateau()
            n = len(self.f)
            return w * x[:n] + x[n] * lp + x[n + 1] * lm
        return w * x[: len(self.f)]


def _nodes(space: Weighted1DSpace):
    R, L, m = space.R, space.L, space.m
    fine = np.linspace(-L, L, 16 * m + 1)
    sf = s_of_f(fine, R)
    s = np.linspace(sf[0], sf[-1], m)
    f = np.interp(s, sf, fine)
    return s, f, s[1] - s[0]


def _difference(m, ds):
    """Forward differences, backward in the last row; square, no boundary
    condition."""
    main = np.full(m, -1.0)
    upper = np.ones(m - 1)
    D = sp.diags([main, upper], [0, 1], shape=(m, m), format="lil")
    D[m - 1, m - 2] = -1.0
    D[m - 1, m - 1] = 1.0
    return (D.tocsr() / ds)


def build_weighted_d(space: Weighted1DSpace, variant: str = "plain",
                     nu: Optional[Callable] = None,
                     plateau_scale: Optional[float] = None) -> OperatorHandle:
    eps = space.epsilon
    if not 1.0 < eps < 1.5:
        raise ValueError(f"epsilon must lie in (1, 3/2), got {eps}")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant == "perturbed" and nu is None:
        raise ValueError("perturbed variant needs nu")
    R = space.R
    s, f, ds = _nodes(space)
    m = len(s)
    sig = varsigma(f, R)
    coef = -(eps - 0.5) * varsigma_prime(f, R)
    nu_vals = None
    if variant == "perturbed":
        nu_vals = np.asarray(nu(f), dtype=float) * np.ones(m)
        coef = coef + sig * nu_vals
    P = (_difference(m, ds) + sp.diags(coef)).tocsr()
    d = R if plateau_scale is None else float(plateau_scale)
    if variant == "adjoint":
        P = P.T.tocsr()
    elif variant == "extended":
        x = (f / d + 1.0) / 2.0
        xc = np.clip(x, 0.0, 1.0)
        dlam = 30.0 * xc**2 * (1.0 - xc) ** 2 / (2.0 * d)
        col = sig ** (eps + 0.5) * dlam
        P = sp.hstack([P, sp.csr_matrix(col[:, None]), sp.csr_matrix(-col[:, None])]).tocsr()
    return OperatorHandle(variant, space, P, s, f, ds, plateau_scale=d, nu=nu_vals)


@dataclass
class Index1DPolicy:
    n_probe: int = 6
    localization: float = 0.95
    gap: float = 5.0
    seed: int = 0


@dataclass
class Index1DReport:
    variant: str
    epsilon: float
    dim_ker: int
    dim_coker: int
    index: int
    singular_values: list
    kernel_localization: list
    cokernel_localization: list
    cokernel_correlation: Optional[float] = None
    kernel_correlation: Optional[float] = None
    kernel_basis: Optional[np.ndarray] = field(default=None, repr=False)
    cokernel_basis: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "epsilon": self.epsilon,
            "dim_ker": self.dim_ker,
            "dim_coker": self.dim_coker,
            "index": self.index,
            "singular_values": [float(v) for v in self.singular_values],
            "kernel_localization": [float(v) for v in self.kernel_localization],
            "cokernel_localization": [float(v) for v in self.cokernel_localization],
            "cokernel_correlation": self.cokernel_correlation,
            "kernel_correlation": self.kernel_correlation,
        }


def _smallest(A, k, seed=0):
    """Smallest k eigenpairs of the PSD sparse matrix A."""
    n = A.shape[0]
    k = min(k, n - 1)
    shift = -1e-10 * max(abs(A).sum(axis=1).max(), 1.0)
    v0 = np.random.default_rng(seed).standard_normal(n)
    vals, vecs = spla.eigsh(A.tocsc(), k=k, sigma=shift, which="LM", v0=v0)
    order = np.argsort(vals)
    return np.sqrt(np.clip(vals[order], 0.0, None)), vecs[:, order]


def _localization(vec, f, L, extra=0):
    """Fraction of the vector's mass in |f| <= L/2; trailing finite-dimensional
    coordinates (plateau coefficients) count as interior."""
    n = len(f)
    w = np.abs(vec[:n]) ** 2
    inner = w[np.abs(f) <= L / 2].sum() + np.sum(np.abs(vec[n:n + extra]) ** 2)
    return float(inner / max(np.sum(np.abs(vec) ** 2), 1e-300))


def _corr(a, b):
    return float(abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


def _near_null(sv, gap):
    """Number of singular values below the highest gap of ratio >= ``gap``
    in the probed low spectrum; raises if there is none."""
    if len(sv) < 2:
        raise IndexError1D("too few singular values")
    ratios = sv[1:] / np.maximum(sv[:-1], 1e-300)
    hits = np.nonzero(ratios >= gap)[0]
    if len(hits) == 0:
        raise IndexError1D(f"inconclusive gap: best ratio {ratios.max():.3g} < {gap}")
    return int(hits[-1]) + 1


def _interior_null(A, vecs, rows):
    """Closest vectors to ``vecs`` annihilated exactly by the given rows of A,
    re-orthonormalized.  Rows away from the truncation carry the continuum
    equation; the boundary rows are left free."""
    B = A[rows, :]
    M = (B @ B.T).tocsc()
    out = vecs - B.T @ spla.spsolve(M, B @ vecs).reshape(len(rows), -1)
    q, _ = np.linalg.qr(out)
    signs = np.sign(np.sum(q * vecs, axis=0))
    signs[signs == 0] = 1.0
    return q * signs


def numerical_index(op: OperatorHandle, policy: Optional[Index1DPolicy] = None) -> Index1DReport:
    policy = policy or Index1DPolicy()
    A = op.matrix.tocsr()
    space = op.space
    m = len(op.f)
    extra = A.shape[1] - m
    sv_r, V = _smallest((A.T @ A).tocsr(), policy.n_probe + extra, policy.seed)
    sv_l, U = _smallest((A @ A.T).tocsr(), policy.n_probe, policy.seed)
    nr = _near_null(sv_r, policy.gap)
    nl = _near_null(sv_l, policy.gap)
    # domain of the adjoint is the range of d/df: interior mass is computed on
    # node samples in both cases
    loc_r = [_localization(V[:, j], op.f, space.L, extra) for j in range(nr)]
    loc_l = [_localization(U[:, j], op.f, space.L) for j in range(nl)]
    ker = [j for j in range(nr) if loc_r[j] >= policy.localization]
    coker = [j for j in range(nl) if loc_l[j] >= policy.localization]
    interior = np.arange(2, m - 2)
    K = _interior_null(A, V[:, ker], interior) if ker else None
    C = _interior_null(A.T.tocsr(), U[:, coker], interior) if coker else None
    eps, R = space.epsilon, space.R
    sig = varsigma(op.f, R)
    # the cokernel of d/df + nu in the eps-weighted L^2 is
    # varsigma^{-2 eps} exp(int nu); conjugated: varsigma^{1/2 - eps} exp(int nu)
    decaying = sig ** (0.5 - eps)
    if op.nu is not None:
        decaying = decaying * np.exp(cumulative_trapezoid(op.nu, op.f, initial=0.0))
    rep = Index1DReport(
        variant=op.variant, epsilon=eps, dim_ker=len(ker), dim_coker=len(coker),
        index=len(ker) - len(coker),
        singular_values=list(np.union1d(sv_r, sv_l)[: policy.n_probe]),
        kernel_localization=loc_r, cokernel_localization=loc_l,
        kernel_basis=K, cokernel_basis=C,
    )
    if op.variant in ("plain", "perturbed") and coker:
        rep.cokernel_correlation = _corr(C[:, 0], decaying)
    if op.variant == "adjoint" and ker:
        rep.kernel_correlation = _corr(K[:, 0], decaying)
    if op.variant == "extended" and ker:
        u = op.decode(K[:, 0])
        rep.kernel_correlation = _corr(u, np.ones_like(u))
    return rep


def perturb_stability(space: Weighted1DSpace, nus: Sequence[Callable],
                      policy: Optional[Index1DPolicy] = None) -> list:
    out = []
    for nu in nus:
        op = build_weighted_d(space, "perturbed", nu=nu)
        out.append(numerical_index(op, policy))
    return out


def decaying_nu(amplitude=0.5, R=4.0, power=3):
    return lambda f: amplitude * (1.0 + np.abs(f) / R) ** (-power)


def bump_nu(amplitude=1.0, center=0.0, width=2.0):
    def nu(f):
        x = (np.asarray(f) - center) / width
        out = np.zeros_like(x, dtype=float)
        inside = np.abs(x) < 1
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
        return out
    return nu
