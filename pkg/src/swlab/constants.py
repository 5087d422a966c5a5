"""Sign and normalization conventions shared by every module.

The spinor covariant derivative is ``d - i a`` with ``a`` a real 1-form (the
connection on the line bundle E); the curvature of the determinant line is
twice ``da``.  Every choice below is pinned by requiring the flat
configuration ``a = 0, psi = (sqrt(t), 0)`` to solve the discrete equations
exactly, and by the n = 0 ... 3 vortex numbers coming out integral.
"""

import numpy as np

GAMMA1 = np.array([[0, 1j], [1j, 0]], dtype=complex)
GAMMA2 = np.array([[0, 1], [-1, 0]], dtype=complex)
GAMMA3 = np.array([[1j, 0], [0, -1j]], dtype=complex)
GAMMAS = (GAMMA1, GAMMA2, GAMMA3)

# sigma(psi, phi) = SIGMA_SIGN * i * (sym(psi phi^dagger))_0
SIGMA_SIGN = 1.0

# F_A (determinant line) = CURVATURE_FACTOR * (-i da)
CURVATURE_FACTOR = 2.0

# Planar vortex equation at parameter t:  curl a = (t - |alpha|^2) / VORTEX_DENOM
VORTEX_DENOM = 4.0

# Scalar reduction u = log|alpha|^2:  Lap u = (e^u - t) / REDUCTION_DENOM + 4 pi sum delta
REDUCTION_DENOM = 2.0

# Weights of the pointwise inner product on (gauge scalar, 1-form, spinor)
# that make the extended deformation operator symmetric and put the planar
# normal block in the (-4 d b + conj(alpha) lam, 2 dbar lam - b alpha) form.
GAUGE_WEIGHT = 2.0
FORM_WEIGHT = 2.0
SPINOR_WEIGHT = 1.0
