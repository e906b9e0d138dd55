"""Tour of the spatial operators: kernels, convolution, energy.

Builds a periodic grid, tabulates a Gaussian interaction kernel, and
checks the identities the solver leans on: the kernel mass a = J * 1,
self-adjointness of the convolution, and the fact that the chemical
potential really is the variation of the free energy.
"""

import numpy as np

from nlch import (Potential, ScalarField, build_kernel, chemical_potential,
                  constant_field, convolve, energy, inner, make_grid)

grid = make_grid(2, 64, 64, lx=2 * np.pi, ly=2 * np.pi)
kernel = build_kernel("gaussian", 0.4, 1.25, grid)
pot = Potential.quartic()

print("grid:", grid.shape, "spacing", grid.spacings)
print("kernel mass a in [%.12f, %.12f]" % (kernel.a_min, kernel.a_max))

# convolving the constant 1 returns a(x) itself
one = constant_field(grid, 1.0)
a_field = convolve(kernel, one)
print("max |J*1 - a| = %.3e" % np.max(np.abs(a_field.values - kernel.a.values)))

# self-adjointness: (J*f, g) = (f, J*g) for a symmetric kernel
rng = np.random.default_rng(0)
f = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
g = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
lhs = inner(convolve(kernel, f), g)
rhs = inner(f, convolve(kernel, g))
print("self-adjointness gap = %.3e" % abs(lhs - rhs))

# the pure phases minimize the local part, so their energy is purely
# the nonlocal penalty of being constant, which vanishes
for c in (-1.0, 1.0):
    print("energy of phi = %+.0f: %.3e" % (c, energy(kernel, pot, constant_field(grid, c))))

# central difference of the energy along a random direction matches the
# inner product with the chemical potential
phi = ScalarField(grid, 0.5 * np.sin(grid.meshes()[0]))
psi = ScalarField(grid, rng.uniform(-1, 1, grid.shape))
mu = chemical_potential(kernel, pot, phi)
eps = 1e-5
dplus = energy(kernel, pot, ScalarField(grid, phi.values + eps * psi.values))
dminus = energy(kernel, pot, ScalarField(grid, phi.values - eps * psi.values))
fd = (dplus - dminus) / (2 * eps)
print("variation: finite diff %.10f vs pairing %.10f" % (fd, inner(mu, psi)))
