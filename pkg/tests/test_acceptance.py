"""Acceptance criteria 1-13, one test each, at the stated tolerances."""
import json
import time

import numpy as np
import pytest

from swlab import cli
from swlab.fredholm1d import Weighted1DSpace, build_weighted_d, numerical_index
from swlab.gluing import end_chart, far_center, glue_and_correct, preglue, GluingJob, residual_sweep
from swlab.grid import Grid2, Grid3, WeightSpec
from swlab.linear_ops import (_from_blocks, _mask, assemble_theta, d_c, decompose_TN, D_c,
                              kernel_analysis, section_norm, slice_kernel)
from swlab.sw3d import (bump, energy, energy_gradient, flat, minimize_energy, pullback,
                        sw_residual)
from swlab.vortex import (CenterSet, centers_of, solve_vortex, tail_decay_fit, vortex_number)


def c2_norm(f, h):
    grads = np.gradient(f, h)
    return max(np.abs(f).max(), max(np.abs(g).max() for g in grads),
               max(np.abs(x).max() for g in grads for x in np.gradient(g, h)))


def test_criterion_01_vortex_bound(criterion):
    g = Grid2(256, 256, 20.0 / 256)
    parts, ok = [], True
    for centers in ([], [0j], [-1 + 0j, 1 + 0j]):
        t0 = time.perf_counter()
        s = solve_vortex(centers, g)
        dt = time.perf_counter() - t0
        m = float(np.abs(s.alpha).max())
        good = m <= 1 + 5 * g.h**2 and dt < 30
        if not centers:
            dev = float(np.abs(s.alpha - 1).max())
            good = good and dev <= 1e-8
        ok &= good
        parts.append(f"n={len(centers)} max|a|={m:.6f} ({dt:.1f}s)")
    criterion(1, ok, "; ".join(parts) + f"; bound {1 + 5 * g.h**2:.6f}")


def test_criterion_02_vortex_number(criterion):
    g = Grid2(280, 280, 0.1)
    parts, ok = [], True
    for centers in ([0j], [-1 + 0j, 1 + 0j], [0j, 1.5 + 0j, -1.5j]):
        nv = vortex_number(solve_vortex(centers, g))
        ok &= abs(nv - len(centers)) <= 0.02
        parts.append(f"n={len(centers)}: {nv:.4f}")
    small = vortex_number(solve_vortex([0j], Grid2(120, 120, 0.1)))
    large = vortex_number(solve_vortex([0j], Grid2(240, 240, 0.1)))
    ok &= abs(large - 1) < abs(small - 1)
    criterion(2, ok, ", ".join(parts) + f"; radius 6 -> {small:.4f}, radius 12 -> {large:.4f}")


def test_criterion_03_tails(criterion):
    s = solve_vortex([0j], Grid2(256, 256, 20.0 / 256))
    parts, ok = [], True
    for q in ("deficit", "covariant"):
        rate, qual = tail_decay_fit(s, 4.0, 8.0, q)
        ok &= rate >= 0.5 and qual >= 0.98
        parts.append(f"{q}: rate {rate:.3f} R^2 {qual:.4f}")
    criterion(3, ok, "; ".join(parts))


def test_criterion_04_kernel_dimensions(criterion):
    g = Grid2(61, 61, 0.25)
    parts, ok = [], True
    for centers in ([], [0j], [0j, 0j]):
        n = len(centers)
        s = solve_vortex(centers, g, polish=True)
        r = kernel_analysis(assemble_theta(s), decay_annulus=(3.0, 6.0))
        rates = [float(x) for x in r.decay_rates]
        ok &= (r.dim_ker == 2 * n and r.dim_coker == 0 and r.gap_ratio >= 1e3
               and all(x >= 0.5 for x in rates))
        parts.append(f"n={n}: ker {r.dim_ker} coker {r.dim_coker} gap {r.gap_ratio:.3g}"
                     + (f" decay {min(rates):.3f}" if rates else ""))
    criterion(4, ok, "; ".join(parts))


def test_criterion_05_residual_order(criterion):
    sups = []
    for h in (0.1, 0.05):
        n = int(round(10 / h)) * 2 + 1
        v = solve_vortex([0.3 + 0.1j], Grid2(n, n, h))
        m = int(round(3 / h)) * 2 + 1
        sups.append(sw_residual(pullback(v, 1.0, Grid3(m, m, 9, h))).sup)
    ratio = sups[0] / sups[1]
    fl = sw_residual(flat(Grid3(24, 24, 12, 0.25))).sup
    ok = 3.5 <= ratio <= 4.5 and fl <= 1e-10
    criterion(5, ok, f"sup residual h=0.1: {sups[0]:.4e}, h=0.05: {sups[1]:.4e}, ratio {ratio:.3f};"
                     f" flat {fl:.1e}")


def test_criterion_06_elliptic_complex(criterion):
    rng = np.random.default_rng(6)
    params = [(rng.uniform(-1.5, 1.5, 3), rng.uniform(0.7, 1.2), rng.normal()) for _ in range(10)]
    fitted = []
    for h in (0.2, 0.1):
        n2 = int(round(12 / h)) * 2 + 1
        v = solve_vortex([0.3 + 0.1j], Grid2(n2, n2, h), polish=True)
        n3 = int(round(4 / h)) * 2 + 1
        c = pullback(v, 1.0, Grid3(n3, n3, int(round(3 / h)) * 2 + 1, h))
        X, Y, Z = c.grid.mesh()
        Cs = []
        for p, w, a in params:
            xi = _mask(a * np.exp(-((X - p[0]) ** 2 + (Y - p[1]) ** 2 + (Z - p[2]) ** 2) / w**2))
            out = D_c(c, *d_c(c, xi))
            Cs.append(section_norm(c.grid, out) / (h**2 * c2_norm(xi, h)))
        fitted.append(max(Cs))
    ratio = max(fitted) / min(fitted)
    criterion(6, ratio <= 2.0, f"fitted C at h=0.2: {fitted[0]:.4f}, h=0.1: {fitted[1]:.4f},"
                               f" ratio {ratio:.3f}")


def test_criterion_07_horizontal_normal(criterion):
    h = 0.25
    v = solve_vortex([0j], Grid2(81, 81, h), polish=True)
    g3 = Grid3(33, 33, 9, h)
    c = pullback(v, 1.0, g3)
    rng = np.random.default_rng(7)
    X, Y, Z = g3.mesh()
    worst = 0.0
    for _ in range(10):
        sec = []
        for k in range(6):
            p = rng.uniform(-1.5, 1.5, 3)
            a = rng.normal() + (1j * rng.normal() if k >= 4 else 0)
            sec.append(_mask(a * np.exp(-((X - p[0]) ** 2 + (Y - p[1]) ** 2 + (Z - p[2]) ** 2))))
        _, _, defect = decompose_TN(c, tuple(sec))
        worst = max(worst, defect / (h**2 * max(c2_norm(np.abs(f), h) for f in sec)))
    K = slice_kernel(c, n=1)
    nmax = 0.0
    for j in range(K.rank):
        b, lam = K.fields(j)
        B = np.repeat(b[:, :, None], g3.nz, axis=2)
        L = np.repeat(lam[:, :, None], g3.nz, axis=2)
        B[:, :, [0, -1]] = 0
        L[:, :, [0, -1]] = 0
        z = np.zeros(g3.shape, complex)
        s = _from_blocks((B, L), (z, z.copy()))
        _, N, _ = decompose_TN(c, s)
        nmax = max(nmax, section_norm(g3, N) / section_norm(g3, s))
    ok = worst <= 1.0 and nmax <= 1e-8 and K.rank == 1
    criterion(7, ok, f"max defect/(h^2 |s|_C2) {worst:.2e} (C = 1); kernel N'-part {nmax:.2e}")


def test_criterion_08_fredholm_indices(criterion):
    t0 = time.perf_counter()
    ok, parts = True, []
    for eps in (1.1, 1.25, 1.4):
        for L, m in ((320.0, 4096), (320.0, 8192), (640.0, 4096)):
            sp_ = Weighted1DSpace(L, m, WeightSpec(eps, 4.0, "x"))
            p = numerical_index(build_weighted_d(sp_, "plain"))
            a = numerical_index(build_weighted_d(sp_, "adjoint"))
            e = numerical_index(build_weighted_d(sp_, "extended"))
            good = (p.index == -1 and (p.cokernel_correlation or 0) >= 0.99 and a.index == 1
                    and e.index == 1 and (e.kernel_correlation or 0) >= 0.99)
            ok &= good
            if not good or (L, m) == (320.0, 4096):
                parts.append(f"eps={eps} L={L:g} m={m}: {p.index}/{a.index}/{e.index}"
                             f" corr {p.cokernel_correlation:.5f}/{e.kernel_correlation:.5f}")
    dt = time.perf_counter() - t0
    ok &= dt < 120
    criterion(8, ok, "; ".join(parts) + f"; stable under m->2m, L->2L; {dt:.1f}s")


def test_criterion_09_preglue_residual(criterion):
    rows, slope, overlap = residual_sweep([8, 12, 16, 24], h=0.4, epsilon=1.25, margin=8.0)
    w = [r["residual_w"] for r in rows]
    dec = all(b < a for a, b in zip(w, w[1:]))
    bounded = all(r["residual_w"] <= r["bound"] * (1 + 1e-12) for r in rows)
    criterion(9, dec and bounded,
              "residuals " + ", ".join(f"R={r['R']:g}: {r['residual_w']:.4e} (<= {r['bound']:.4e})"
                                       for r in rows))


def test_criterion_10_newton_correction(criterion):
    R, h = 12.0, 0.18
    n = 2 * int(np.ceil((1.5 * R + 9) / h)) + 1
    g = Grid2(n, n, h)
    base = solve_vortex([0.3 + 0.1j], g, polish=True)
    far = CenterSet.of([far_center(R)])
    pre = preglue(GluingJob(base, far, R))
    sol, rec = glue_and_correct(base, far, R, tol=1e-10, rtol=1e-6)
    target = max(1e-10, 1e-6 * rec.initial_residual_sup)
    got = [z for z, _ in centers_of(sol).points]
    dist = max(min(abs(z - w) for z in got) for w in (0.3 + 0.1j, far_center(R)))
    dn = abs(vortex_number(sol) - vortex_number(pre))
    ok = (rec.final_residual <= target and rec.q_ratio <= 2 and dist <= 2 * h and dn <= 0.05
          and len(got) == 2)
    criterion(10, ok, f"residual {rec.initial_residual_sup:.3e} -> {rec.final_residual:.3e}"
                      f" (target {target:.1e}); |q|/|eta| {rec.q_ratio:.3f}; center error {dist:.3f};"
                      f" vortex number change {dn:.1e}")


def test_criterion_11_end_chart(criterion):
    R, h = 6.0, 0.2
    n = 2 * int(np.ceil((1.5 * R + 11) / h)) + 1
    base = solve_vortex([], Grid2(n, n, h))
    probes = [1.5 * R * np.exp(1j * (2 * np.pi * k / 8 + 0.1)) for k in range(8)]
    res = end_chart(base, probes, R)
    good = 0
    for r in res:
        near = r.centers and min(abs(z - r.probe) for z, _ in r.centers) <= 2 * h
        good += bool(r.converged and near and abs(r.vortex_number - 1) <= 0.05)
    delta = 1e-2
    pair = end_chart(base, [probes[0], probes[0] + delta], R)
    a, b = pair[0].field, pair[1].field
    diff = max(float(np.abs(getattr(a, k) - getattr(b, k)).max()) for k in ("a1", "a2", "alpha"))
    ok = good == 8 and pair[0].converged and pair[1].converged and diff <= 10 * delta
    criterion(11, ok, f"{good}/8 probes corrected; delta-probe sup difference {diff:.3e}"
                      f" (<= {10 * delta:g})")


def test_criterion_12_energy_descent(criterion):
    v = solve_vortex([0.3 + 0.1j], Grid2(97, 97, 0.25), polish=True)
    c = pullback(v, 1.0, Grid3(33, 33, 17, 0.25))
    g = c.grid
    c1 = c.with_arrays(c.A1, c.A2, c.A3, c.alpha, c.beta + 0.1 * bump(g, (0.2, -0.3, 0), 1.5))
    b0 = sw_residual(c1).beta_l2
    r = minimize_energy(c1, max_iter=3000, beta_target=1e-4 * b0)
    mono = bool(np.all(np.diff(r.energies) <= 0))
    bratio = r.beta_norms[-1] / b0
    # gradient check on 20 coordinates near the perturbation
    E0, gA1, gA2, gA3, ga, gb = energy_gradient(c1)
    rng = np.random.default_rng(12)
    X, Y, Z = g.mesh()
    region = np.argwhere((X**2 + Y**2 + Z**2 < 2.0) & (np.abs(Z) < g.L3 - 2 * g.h))
    picks = region[rng.choice(len(region), 20, replace=False)]
    worst = 0.0
    for n_, idx in enumerate(map(tuple, picks)):
        slot, part = divmod(n_ % 8, 2)
        grads = (gA1, gA2, ga, gb)
        names = ("A1", "A2", "alpha", "beta")
        an = grads[slot][idx]
        an = an.imag if (part and slot >= 2) else an.real

        def shifted(s):
            arrs = {k: getattr(c1, k).copy() for k in ("A1", "A2", "A3", "alpha", "beta")}
            arrs[names[slot]][idx] += 1j * s if (part and slot >= 2) else s
            return energy(c1.with_arrays(arrs["A1"], arrs["A2"], arrs["A3"], arrs["alpha"],
                                         arrs["beta"]))

        eps = 1e-5
        fd = (shifted(eps) - shifted(-eps)) / (2 * eps)
        worst = max(worst, abs(fd - an) / max(abs(an), 1e-3))
    ok = mono and bratio <= 1e-4 and worst <= 1e-5
    criterion(12, ok, f"|beta| ratio {bratio:.2e} after {r.iterations} steps, monotone {mono};"
                      f" gradient rel. error {worst:.2e} on 20 coordinates")


def test_criterion_13_determinism(criterion, tmp_path):
    jobs = [("fredholm1d", {"eps": "1.25"}),
            ("spectrum", {"centers": "0", "grid": "61", "radius": "7.5"}),
            ("pullback", {"centers": "0.3+0.1i", "grid": "64", "radius": "8", "nz": "9"})]
    same = []
    for cmd, cfg in jobs:
        blobs = []
        for rep in ("a", "b"):
            out = tmp_path / f"{cmd}-{rep}"
            cli.run(cmd, dict(cfg), out, seed=13)
            blobs.append((out / "manifest.json").read_bytes())
        same.append(blobs[0] == blobs[1])
        assert json.loads(blobs[0])["artifacts"]
    criterion(13, all(same), ", ".join(f"{c}: {'identical' if s else 'DIFFERENT'}"
                                        for (c, _), s in zip(jobs, same)))
