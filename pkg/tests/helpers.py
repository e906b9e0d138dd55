"""Independent oracles and scenario builders shared by the test modules.

Everything here recomputes quantities by a route the library does not
take: direct summation for convolutions, pairwise double sums for the
interaction energy, explicit pixel loops for fidelity maps.  Slow on
purpose; keep the grids small.
"""

import numpy as np

from nlch import ImageGray, Mask, ScalarField


def brute_convolve_periodic(kernel, f):
    """Direct-sum circular convolution, h_vol-weighted."""
    g = f.grid
    vals = f.values
    out = np.zeros_like(vals)
    if g.dim == 1:
        n = g.nx
        for i in range(n):
            for j in range(n):
                out[i] += kernel.values[(i - j) % n] * vals[j]
    else:
        nx, ny = g.nx, g.ny
        for ix in range(nx):
            for iy in range(ny):
                acc = 0.0
                for jx in range(nx):
                    for jy in range(ny):
                        acc += kernel.values[(ix - jx) % nx, (iy - jy) % ny] \
                            * vals[jx, jy]
                out[ix, iy] = acc
    return ScalarField(g, out * g.h_vol)


def reflect_extend(values):
    """Even reflection of a field onto the doubled box, every axis."""
    out = values
    for axis in range(values.ndim):
        out = np.concatenate([out, np.flip(out, axis=axis)], axis=axis)
    return out


def brute_convolve_neumann(kernel, f):
    """Reflection realization by direct summation on the doubled box."""
    g = f.grid
    ext = reflect_extend(f.values)
    kv = kernel.values_extended
    out = np.zeros(g.shape)
    if g.dim == 1:
        n2 = ext.shape[0]
        for i in range(g.nx):
            for j in range(n2):
                out[i] += kv[(i - j) % n2] * ext[j]
    else:
        n2x, n2y = ext.shape
        for ix in range(g.nx):
            for iy in range(g.ny):
                acc = 0.0
                for jx in range(n2x):
                    for jy in range(n2y):
                        acc += kv[(ix - jx) % n2x, (iy - jy) % n2y] \
                            * ext[jx, jy]
                out[ix, iy] = acc
    return ScalarField(g, out * g.h_vol)


def brute_energy(kernel, potential, f):
    """Interaction energy as the pairwise difference double sum.

    Uses the identity: quadratic part = 1/4 sum_xy J(x-y) (f(x)-f(y))^2
    over the periodic box (the doubled box under neumann, divided by the
    number of reflected copies), plus the local potential integral.
    """
    g = f.grid
    if g.bc == "periodic":
        vals = f.values
        kv = kernel.values
        copies = 1
    else:
        vals = reflect_extend(f.values)
        kv = kernel.values_extended
        copies = 2 ** g.dim
    flat = vals.ravel()
    n = flat.size
    shape = vals.shape
    quad = 0.0
    for i in range(n):
        ii = np.unravel_index(i, shape)
        for j in range(n):
            jj = np.unravel_index(j, shape)
            kidx = tuple((a - b) % s for a, b, s in zip(ii, jj, shape))
            quad += kv[kidx] * (flat[i] - flat[j]) ** 2
    quad *= 0.25 * g.h_vol * g.h_vol / copies
    local = float(np.sum(potential.f(f.values)) * g.h_vol)
    return quad + local


def fidelity_by_pixel_rule(image, mask, spec):
    """Per-pixel loop version of build_fidelity (arrays in image layout)."""
    lam = np.zeros((image.height, image.width))
    h = np.zeros((image.height, image.width))
    cut = spec.threshold * 255.0
    for r in range(image.height):
        for c in range(image.width):
            if mask.damaged[r, c]:
                lam[r, c] = 0.0
                h[r, c] = 0.0
            else:
                lam[r, c] = spec.lambda0
                h[r, c] = spec.colors[1] if image.pixels[r, c] >= cut \
                    else spec.colors[0]
    return lam, h


def stripes_image(width, height, period):
    """Vertical stripes: color alternates along x with the given period."""
    col = ((np.arange(width) // (period // 2)) % 2) * 255
    return ImageGray(width, height, np.tile(col.astype(np.uint8), (height, 1)))


def square_mask(width, height, size):
    """Centered square damaged region of the given side length."""
    d = np.zeros((height, width), dtype=bool)
    r0, c0 = (height - size) // 2, (width - size) // 2
    d[r0:r0 + size, c0:c0 + size] = True
    return Mask(width, height, d)


def damage(image, mask, fill=128):
    """Overwrite the damaged pixels with a fill value."""
    px = image.pixels.copy()
    px[mask.damaged] = fill
    return ImageGray(image.width, image.height, px)


def band_limited_noise(grid, amplitude, seed):
    """Seeded noise with its upper third of modes removed, mean zero."""
    from nlch.grid import _forward_values, _inverse_values

    rng = np.random.default_rng(seed)
    vals = amplitude * rng.uniform(-1.0, 1.0, size=grid.shape)
    coef = _forward_values(grid, vals)
    mask = np.ones(coef.shape, dtype=bool)
    for axis, n in enumerate(grid.sizes):
        idx = np.arange(coef.shape[axis])
        if grid.bc == "periodic":
            if axis == grid.dim - 1:
                keep = idx <= n // 3
            else:
                keep = (np.minimum(idx, n - idx)) <= n // 3
        else:
            keep = idx <= 2 * (n // 3)
        shape = [1] * grid.dim
        shape[axis] = coef.shape[axis]
        mask = mask & keep.reshape(shape)
    out = _inverse_values(grid, np.where(mask, coef, 0.0))
    out = out - out.mean()
    return ScalarField(grid, out)
