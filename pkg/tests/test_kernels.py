import os
import subprocess
import sys

import numpy as np
import pytest

from swlab import _kernels_py, kernels
from swlab.grid import Grid2, Grid3
from swlab.sw3d import bump, pullback
from swlab.vortex import solve_vortex

compiled = pytest.importorskip("swlab._kernels")


@pytest.fixture(scope="module")
def args():
    h = 0.25
    v = solve_vortex([0.3 + 0.1j], Grid2(81, 81, h))
    g3 = Grid3(33, 33, 13, h)
    c = pullback(v, 1.0, g3)
    rng = np.random.default_rng(5)
    A3 = 0.02 * bump(g3, (0.1, 0.2, 0.0), 1.5)
    beta = 0.05 * bump(g3, (0.2, 0.1, 0.0), 2.0) * (1 + 0.5j)
    alpha = c.alpha + 0.01 * (rng.normal(size=g3.shape) + 1j * rng.normal(size=g3.shape))
    return (c.A1, c.A2, A3, alpha, beta, h, 1.0)


def close(a, b):
    if isinstance(a, tuple):
        return all(close(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a), np.asarray(b)
    return np.allclose(a, b, rtol=1e-13, atol=1e-13 * max(1.0, np.abs(b).max()))


@pytest.mark.parametrize("name", ["residual", "energy", "energy_grad"])
def test_backends_agree(args, name):
    assert close(getattr(compiled, name)(*args), getattr(_kernels_py, name)(*args))


def test_default_backend():
    if os.environ.get("SWLAB_PURE_PYTHON") in ("1", "true", "yes"):
        assert kernels.BACKEND == "numpy"
    else:
        assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    code = "from swlab import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SWLAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
    assert out.stdout.strip() == "numpy"


def test_energy_same_under_fallback():
    code = ("from swlab.grid import Grid3; from swlab.sw3d import flat, bump, energy;"
            "g = Grid3(16, 16, 8, 0.5); c = flat(g);"
            "c = c.with_arrays(c.A1 + 0.1 * bump(g, (0, 0, 0), 2), c.A2, c.A3, c.alpha, c.beta);"
            "print(repr(energy(c)))")
    vals = []
    for flag in ("0", "1"):
        env = dict(os.environ, SWLAB_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env)
        vals.append(float(out.stdout))
    assert vals[0] == pytest.approx(vals[1], rel=1e-13)
