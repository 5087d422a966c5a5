import numpy as np
import pytest

from swlab.gluing import (BandError, ContractionError, GluingJob, end_chart, far_center,
                          glue_residual, newton_correct, preglue, residual_sweep, solve_far,
                          residual_vector)
from swlab.grid import Grid2, WeightSpec
from swlab.vortex import CenterSet, centers_of, from_fields, solve_vortex, vortex_number

R = 6.0
H = 0.25


def grid_for(R, margin=7.0, h=H):
    n = 2 * int(np.ceil((1.5 * R + margin) / h)) + 1
    return Grid2(n, n, h)


@pytest.fixture(scope="module")
def g():
    return grid_for(R)


@pytest.fixture(scope="module")
def base0(g):
    return solve_vortex([], g)


@pytest.fixture(scope="module")
def base1(g):
    return solve_vortex([0.2 + 0.1j], g, polish=True)


@pytest.fixture(scope="module")
def glued(base1):
    job = GluingJob(base1, CenterSet.of([far_center(R)]), R)
    return job, preglue(job)


@pytest.fixture(scope="module")
def corrected(glued):
    _, c = glued
    return newton_correct(c, rtol=1e-4)


def test_empty_far_set_returns_base(base1):
    job = GluingJob(base1, CenterSet.of([]), R)
    assert preglue(job) is base1


def test_single_far_vortex_on_flat_base(base0):
    z0 = far_center(R)
    c = preglue(GluingJob(base0, CenterSet.of([z0]), R))
    assert abs(vortex_number(c) - 1) <= 0.05
    cs = centers_of(c)
    assert cs.n == 1 and abs(cs.points[0][0] - z0) <= 2 * H


def test_exact_where_cutoff_is_constant(glued, base1):
    job, c = glued
    gam = job.gamma(c.grid.z)
    inner = gam == 1.0
    for name in ("a1", "a2", "alpha"):
        assert np.array_equal(getattr(c, name)[inner], getattr(base1, name)[inner])
    y = solve_far(job)
    outer = gam == 0.0
    assert np.allclose(np.abs(c.alpha[outer]), np.abs(y.alpha[outer]), rtol=0, atol=1e-13)


def test_cutoff_bands(glued):
    job, _ = glued
    r = np.linspace(0, 2 * R, 401)
    gam = job.gamma(r)
    assert np.all(gam[r <= 0.5 * R] == 1.0) and np.all(gam[r >= 0.75 * R] == 0.0)
    assert np.all(np.diff(gam) <= 0)


@pytest.mark.parametrize("kw", [
    dict(constants=(1.0, 0.5, 0.75, 0.25)),
    dict(y=[2.0 + 0j]),
    dict(v=[3.0 + 0j]),
    dict(R=-1.0),
])
def test_band_errors(g, base1, kw):
    v = solve_vortex(kw["v"], g) if "v" in kw else base1
    y = CenterSet.of(kw.get("y", [far_center(R)]))
    with pytest.raises(BandError):
        GluingJob(v, y, kw.get("R", R), kw.get("constants", (1.0, 0.75, 0.5, 0.25)))


def test_grid_too_small():
    small = solve_vortex([], Grid2(61, 61, 0.25))
    with pytest.raises(BandError):
        GluingJob(small, CenterSet.of([far_center(R)]), R)


def test_correction_record(corrected, glued):
    sol, rec = corrected
    assert rec.converged
    assert all(b <= a for a, b in zip(rec.residuals, rec.residuals[1:]))
    assert rec.q_ratio <= 2
    assert rec.delta1_ratio <= 1e-8
    assert abs(vortex_number(sol) - vortex_number(glued[1])) <= 0.05
    js = rec.to_json()
    assert list(js) == sorted(js)


def test_correction_keeps_centers(corrected):
    sol, _ = corrected
    got = [z for z, _ in centers_of(sol).points]
    assert len(got) == 2
    for w in (0.2 + 0.1j, far_center(R)):
        assert min(abs(z - w) for z in got) <= 2 * H


def test_correction_idempotent(corrected):
    sol, rec = corrected
    again, rec2 = newton_correct(sol, tol=rec.final_residual)
    assert rec2.iterations == 0 and again is sol


def test_exact_solution_needs_no_steps(base1):
    sup = float(np.max(np.abs(residual_vector(base1))))
    sol, rec = newton_correct(base1, tol=max(sup, 1e-10))
    assert rec.iterations == 0 and rec.q_ratio == 0.0


def test_contraction_precondition(base0):
    g = base0.grid
    X, Y = np.meshgrid(g.x, g.y, indexing="ij")
    bad = from_fields(g, 1.0, base0.centers, base0.a1 + 3 * np.exp(-(X**2 + Y**2) / 4),
                      base0.a2, 0.2 * base0.alpha)
    with pytest.raises(ContractionError) as err:
        newton_correct(bad)
    assert err.value.k > 0 and err.value.eta > 1 / (10 * err.value.k)


def test_glue_residual_band(glued):
    _, c = glued
    w = WeightSpec(1.25, 4.0, "radial")
    l2w, sup, band = glue_residual(c, w, band=(0.5 * R, 0.75 * R))
    assert 0 < band <= sup and l2w > 0


def test_sweep_decreasing_small():
    rows, slope, _ = residual_sweep([6.0, 9.0], h=0.4, margin=7.0)
    assert rows[1]["residual_w"] < rows[0]["residual_w"]
    with pytest.raises(ValueError):
        residual_sweep([9.0, 6.0])


def test_end_chart_band_violation(base0):
    res = end_chart(base0, [2.0 + 0j], R)
    assert not res[0].converged and "C1 R" in res[0].error
