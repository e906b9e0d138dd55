"""Cell-centered rectangular grids and fast trigonometric transforms.

Fields live at the cell centers of a uniform mesh in one or two space
dimensions.  Two boundary treatments are supported:

* ``periodic`` : Fourier basis, centers at ``x_i = i h``.
* ``neumann``  : cosine basis (DCT-II on half-sample centers,
  ``x_i = (i + 1/2) h``); every basis function has zero normal
  derivative at the walls, so Laplacians built in it satisfy the no-flux
  condition mode by mode.

All differential operators are diagonal in the respective basis.  As a
consequence discrete integration by parts is exact, which the energy
bookkeeping in the rest of the package relies on: the spectral identity
``(f, laplacian(g)) == -(grad f, grad g)`` holds to rounding, not merely
to truncation order.

The module also defines the ``NLCH1`` snapshot container used to save
and reload fields together with their grid and simulation time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "GridError",
    "ScalarField",
    "SpectralField",
    "VectorField",
    "boundary_normal_flux",
    "divergence_of_product",
    "gradient",
    "inverse_laplacian_zero_mean",
    "laplacian",
    "make_grid",
    "read_snapshot",
    "transform",
    "write_snapshot",
]

BC_CHOICES = ("periodic", "neumann")

#: Relative tolerance for the zero-mean precondition of the inverse Laplacian.
MEAN_ZERO_TOL = 1e-10

#: Tolerance for the vanishing normal flux of a velocity under neumann bc.
NORMAL_FLUX_TOL = 1e-10


class GridError(ValueError):
    """Invalid grid construction, mismatched fields, or violated preconditions."""


def _axis_view(values: np.ndarray, axis: int) -> tuple:
    """Shape tuple that broadcasts a 1d array along ``axis`` of ``values``."""
    shape = [1] * values.ndim
    shape[axis] = -1
    return tuple(shape)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered mesh on a rectangle (or interval).

    Attributes
    ----------
    dim : int
        1 or 2.
    nx, ny : int or None
        Cells per axis; ``ny`` is None in 1d.  Sizes must be even so the
        2/3-rule truncation and the real-input transforms are well defined.
    lx, ly : float or None
        Side lengths; ``ly`` is None in 1d.
    bc : str
        ``"periodic"`` or ``"neumann"``.
    """

    dim: int
    nx: int
    ny: int | None
    lx: float
    ly: float | None
    bc: str

    # -- geometry ----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.nx,) if self.dim == 1 else (self.nx, self.ny)

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.shape

    @property
    def lengths(self) -> tuple[float, ...]:
        return (self.lx,) if self.dim == 1 else (self.lx, self.ly)

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float | None:
        return None if self.dim == 1 else self.ly / self.ny

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.sizes))

    @property
    def h_vol(self) -> float:
        """Volume of one cell (the quadrature weight of every node)."""
        v = 1.0
        for s in self.spacings:
            v *= s
        return v

    @property
    def cell_count(self) -> int:
        c = 1
        for n in self.sizes:
            c *= n
        return c

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis."""
        n = self.sizes[axis]
        h = self.spacings[axis]
        offset = 0.0 if self.bc == "periodic" else 0.5
        return (np.arange(n) + offset) * h

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays broadcast to the full grid shape."""
        axes = [self.axis_coordinates(a) for a in range(self.dim)]
        if self.dim == 1:
            return (axes[0],)
        return tuple(np.meshgrid(axes[0], axes[1], indexing="ij"))

    # -- spectral symbols --------------------------------------------------

    @cached_property
    def _axis_wavenumbers(self) -> tuple[np.ndarray, ...]:
        """Per-axis wavenumbers in the coefficient layout of ``_forward``.

        periodic: 2*pi*fftfreq per axis, with the last axis halved (rfft).
        neumann:  k_j = pi * j / L per axis.
        """
        out = []
        for axis in range(self.dim):
            n = self.sizes[axis]
            h = self.spacings[axis]
            L = self.lengths[axis]
            if self.bc == "periodic":
                if axis == self.dim - 1:
                    k = 2.0 * np.pi * sfft.rfftfreq(n, d=h)
                else:
                    k = 2.0 * np.pi * sfft.fftfreq(n, d=h)
            else:
                k = np.pi * np.arange(n) / L
            out.append(k)
        return tuple(out)

    @cached_property
    def coefficient_shape(self) -> tuple[int, ...]:
        if self.bc == "neumann":
            return self.shape
        if self.dim == 1:
            return (self.nx // 2 + 1,)
        return (self.nx, self.ny // 2 + 1)

    @cached_property
    def lap_symbol(self) -> np.ndarray:
        """Eigenvalues of the Laplacian (all <= 0) in coefficient layout."""
        ks = self._axis_wavenumbers
        if self.dim == 1:
            return -(ks[0] ** 2)
        return -(ks[0][:, None] ** 2 + ks[1][None, :] ** 2)

    @cached_property
    def poisson_symbol(self) -> np.ndarray:
        """Multiplier solving ``-lap w = f`` on mean-zero data (zero mode -> 0)."""
        ksq = -self.lap_symbol
        out = np.zeros_like(ksq)
        nz = ksq > 0
        out[nz] = 1.0 / ksq[nz]
        return out

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Weights W with ``sum(f**2) * h_vol == sum(W * |coef|**2)``."""
        if self.bc == "periodic":
            last = self.sizes[-1]
            dbl = np.full(last // 2 + 1, 2.0)
            dbl[0] = 1.0
            if last % 2 == 0:
                dbl[-1] = 1.0
            w = np.broadcast_to(dbl, self.coefficient_shape).copy()
            return w * (self.h_vol / self.cell_count)
        axis_w = []
        for n in self.sizes:
            w = np.full(n, 1.0 / (2 * n))
            w[0] = 1.0 / (4 * n)
            axis_w.append(w)
        if self.dim == 1:
            return axis_w[0] * self.h_vol
        return axis_w[0][:, None] * axis_w[1][None, :] * self.h_vol

    @cached_property
    def _dealias_keep(self) -> np.ndarray:
        """Boolean 2/3-rule mask in coefficient layout (True = keep).

        Under periodic bc modes with index |j| > n//3 are discarded; under
        neumann bc the cut sits at 2n//3 because the cosine/sine bases live
        on the implicitly doubled domain.
        """
        masks = []
        for axis in range(self.dim):
            n = self.sizes[axis]
            if self.bc == "periodic":
                if axis == self.dim - 1:
                    idx = np.arange(n // 2 + 1)
                else:
                    idx = np.abs(np.rint(sfft.fftfreq(n) * n).astype(int))
                masks.append(idx <= n // 3)
            else:
                masks.append(np.arange(n) <= (2 * n) // 3)
        if self.dim == 1:
            return masks[0]
        return masks[0][:, None] & masks[1][None, :]

    # -- validation helpers ------------------------------------------------

    def require_same(self, other: "Grid", what: str = "fields") -> None:
        if self != other:
            raise GridError(f"{what} live on different grids: {self} vs {other}")


def make_grid(
    dim: int,
    nx: int,
    ny: int | None = None,
    lx: float = 2.0 * np.pi,
    ly: float | None = None,
    bc: str = "periodic",
) -> Grid:
    """Build a validated grid.

    Parameters
    ----------
    dim : int
        1 or 2.
    nx, ny : int
        Even cell counts >= 4 per axis (``ny`` ignored in 1d).
    lx, ly : float
        Positive side lengths (``ly`` ignored in 1d).
    bc : str
        ``"periodic"`` or ``"neumann"``.
    """
    if dim not in (1, 2):
        raise GridError(f"dim must be 1 or 2, got {dim}")
    if bc not in BC_CHOICES:
        raise GridError(f"bc must be one of {BC_CHOICES}, got {bc!r}")
    if dim == 1:
        ny, ly = None, None
    else:
        if ny is None:
            raise GridError("ny is required for a 2d grid")
        if ly is None:
            raise GridError("ly is required for a 2d grid")
    for name, n in (("nx", nx), ("ny", ny)):
        if n is None:
            continue
        if not isinstance(n, (int, np.integer)) or n < 4 or n % 2:
            raise GridError(f"{name} must be an even integer >= 4, got {n}")
    for name, L in (("lx", lx), ("ly", ly)):
        if L is None:
            continue
        if not np.isfinite(L) or L <= 0:
            raise GridError(f"{name} must be positive and finite, got {L}")
    return Grid(dim=dim, nx=int(nx), ny=None if ny is None else int(ny),
                lx=float(lx), ly=None if ly is None else float(ly), bc=bc)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True)
class ScalarField:
    """Immutable real-valued field sampled at cell centers."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise GridError(
                f"field shape {vals.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise GridError("field contains non-finite values")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def mean(self) -> float:
        return float(self.values.mean())

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self.grid.require_same(other.grid)
            return ScalarField(self.grid, self.values + other.values)
        return ScalarField(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self.grid.require_same(other.grid)
            return ScalarField(self.grid, self.values - other.values)
        return ScalarField(self.grid, self.values - other)

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            self.grid.require_same(other.grid)
            return ScalarField(self.grid, self.values * other.values)
        return ScalarField(self.grid, self.values * other)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.values)


def constant_field(grid: Grid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.shape, float(value)))


def inner(f: ScalarField, g: ScalarField) -> float:
    """Discrete L2 inner product ``sum(f * g) * h_vol``."""
    f.grid.require_same(g.grid)
    return float(np.sum(f.values * g.values) * f.grid.h_vol)


def norm_l2(f: ScalarField) -> float:
    return float(np.sqrt(np.sum(f.values**2) * f.grid.h_vol))


@dataclass(frozen=True)
class SpectralField:
    """Coefficients of a field in the grid's trigonometric basis.

    periodic: complex half-spectrum in the layout of ``scipy.fft.rfftn``.
    neumann:  real DCT-II coefficients, one per cell.
    """

    grid: Grid
    coefficients: np.ndarray

    def __post_init__(self):
        coef = np.asarray(self.coefficients)
        if coef.shape != self.grid.coefficient_shape:
            raise GridError(
                f"coefficient shape {coef.shape} does not match "
                f"expected {self.grid.coefficient_shape}"
            )
        coef = coef.copy()
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)


@dataclass(frozen=True)
class VectorField:
    """Velocity field: one ScalarField per axis, on a shared grid."""

    components: tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise GridError("a vector field needs at least one component")
        grid = comps[0].grid
        if len(comps) != grid.dim:
            raise GridError(
                f"{grid.dim}d grid needs {grid.dim} components, got {len(comps)}"
            )
        for c in comps:
            grid.require_same(c.grid)
        object.__setattr__(self, "components", comps)

    @property
    def grid(self) -> Grid:
        return self.components[0].grid

    def max_speed(self) -> float:
        return float(max(np.abs(c.values).max() for c in self.components))


# ---------------------------------------------------------------------------
# transforms


def _forward_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    # leading axes beyond the grid's are treated as a batch
    axes = tuple(range(values.ndim - grid.dim, values.ndim))
    if grid.bc == "periodic":
        return sfft.rfftn(values, axes=axes)
    return sfft.dctn(values, type=2, axes=axes)


def _inverse_values(grid: Grid, coef: np.ndarray) -> np.ndarray:
    axes = tuple(range(coef.ndim - grid.dim, coef.ndim))
    if grid.bc == "periodic":
        return sfft.irfftn(coef, s=grid.shape, axes=axes)
    return sfft.idctn(coef, type=2, axes=axes)


def transform(f, direction: str):
    """Move a field between physical and coefficient space.

    ``transform(scalar_field, "forward")`` returns a :class:`SpectralField`;
    ``transform(spectral_field, "inverse")`` returns a :class:`ScalarField`.
    The round trip reproduces the input to ~1e-12 relative accuracy.
    """
    if direction == "forward":
        if not isinstance(f, ScalarField):
            raise GridError("forward transform expects a ScalarField")
        return SpectralField(f.grid, _forward_values(f.grid, f.values))
    if direction == "inverse":
        if not isinstance(f, SpectralField):
            raise GridError("inverse transform expects a SpectralField")
        return ScalarField(f.grid, _inverse_values(f.grid, f.coefficients))
    raise GridError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian; exact on every resolved basis function."""
    g = f.grid
    coef = _forward_values(g, f.values) * g.lap_symbol
    return ScalarField(g, _inverse_values(g, coef))


def inverse_laplacian_zero_mean(f: ScalarField) -> ScalarField:
    """Solve ``-lap w = f`` for the unique mean-zero solution ``w``.

    The right-hand side must have zero mean relative to its own size
    (``|mean| <= 1e-10 * rms``), otherwise the problem is inconsistent and
    a :class:`GridError` is raised.
    """
    g = f.grid
    mean = f.values.mean()
    rms = float(np.sqrt(np.mean(f.values**2)))
    if abs(mean) > MEAN_ZERO_TOL * max(rms, 1e-300):
        raise GridError(
            f"inverse laplacian needs mean-zero data: |mean| = {abs(mean):.3e}, "
            f"rms = {rms:.3e}"
        )
    coef = _forward_values(g, f.values) * g.poisson_symbol
    vals = _inverse_values(g, coef)
    return ScalarField(g, vals - vals.mean())


def gradient(f: ScalarField) -> VectorField:
    """Spectral gradient of ``f`` as a VectorField.

    Under neumann bc the derivative of the cosine interpolant is evaluated
    through the sine basis, which drops the (vanishing-at-centers) top mode.
    """
    g = f.grid
    out = []
    if g.bc == "periodic":
        coef = _forward_values(g, f.values)
        for axis in range(g.dim):
            k = g._axis_wavenumbers[axis].reshape(_axis_view(coef, axis))
            out.append(ScalarField(g, _inverse_values(g, 1j * k * coef)))
    else:
        for axis in range(g.dim):
            out.append(ScalarField(g, _cos_derivative_axis(
                f.values, g.lengths[axis], axis)))
    return VectorField(tuple(out))


def _cos_derivative_axis(values: np.ndarray, L: float, axis: int) -> np.ndarray:
    """d/dx along ``axis`` of the cosine interpolant (result in sine basis)."""
    n = values.shape[axis]
    A = sfft.dct(values, type=2, axis=axis)
    B = np.zeros_like(A)
    factor = (np.arange(1, n) * np.pi / L).reshape(_axis_view(A, axis))
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    src[axis] = slice(1, None)
    dst[axis] = slice(0, n - 1)
    B[tuple(dst)] = -A[tuple(src)] * factor
    return sfft.idst(B, type=2, axis=axis)


def _sin_shift_to_cos(P: np.ndarray, L: float, axis: int) -> np.ndarray:
    """Derivative of a sine-II expansion: returns cosine coefficients.

    The top sine mode differentiates to a cosine that vanishes at all cell
    centers, so it is dropped.
    """
    n = P.shape[axis]
    C = np.zeros_like(P)
    factor = (np.arange(1, n) * np.pi / L).reshape(_axis_view(P, axis))
    src = [slice(None)] * P.ndim
    dst = [slice(None)] * P.ndim
    src[axis] = slice(0, n - 1)
    dst[axis] = slice(1, None)
    C[tuple(dst)] = P[tuple(src)] * factor
    return C


def boundary_normal_flux(u: VectorField) -> float:
    """Largest wall value of the normal velocity component.

    Zero by construction under periodic bc.  Under neumann bc the cosine
    interpolant of each component is evaluated on its two walls.
    """
    g = u.grid
    if g.bc == "periodic":
        return 0.0
    worst = 0.0
    for axis, comp in enumerate(u.components):
        n = g.sizes[axis]
        A = sfft.dct(comp.values, type=2, axis=axis)
        signs_alt = (-1.0) ** np.arange(n)
        shape = _axis_view(A, axis)
        for s in (np.ones(n), signs_alt):
            coef = A * s.reshape(shape)
            wall = (np.take(coef, 0, axis=axis)
                    + 2.0 * np.take(coef, np.arange(1, n), axis=axis).sum(axis=axis)) / (2 * n)
            worst = max(worst, float(np.abs(wall).max()))
    return worst


def _check_normal_flux(u: VectorField) -> None:
    scale = 1.0 + u.max_speed()
    flux = boundary_normal_flux(u)
    if flux > NORMAL_FLUX_TOL * scale:
        raise GridError(
            f"velocity has nonzero normal flux on the boundary under neumann bc "
            f"(max wall value {flux:.3e})"
        )


def divergence_product_coefficients(grid: Grid, u_values: tuple, f_values: np.ndarray):
    """Coefficients of ``div(u f)`` with 2/3-rule dealiasing of the products.

    Returns an array in the layout that ``_inverse_values`` maps back to
    physical space (complex half-spectrum under periodic bc, cosine
    coefficients under neumann bc).
    """
    keep = grid._dealias_keep
    if grid.bc == "periodic":
        total = np.zeros(grid.coefficient_shape, dtype=np.complex128)
        for axis, uc in enumerate(u_values):
            P = sfft.rfftn(uc * f_values)
            P = np.where(keep, P, 0.0)
            k = grid._axis_wavenumbers[axis].reshape(_axis_view(P, axis))
            total = total + 1j * k * P
        return total
    total = np.zeros(grid.shape)
    for axis, uc in enumerate(u_values):
        p = uc * f_values
        S = sfft.dst(p, type=2, axis=axis)
        for other in range(grid.dim):
            if other != axis:
                S = sfft.dct(S, type=2, axis=other)
        # sine index m corresponds to mode m+1: shift the keep mask by one
        mask = keep
        if grid.dim == 1:
            sin_keep = np.roll(keep, -1)
            sin_keep[-1] = False
            mask = sin_keep
        else:
            axis_keep = np.arange(grid.sizes[axis]) + 1 <= (2 * grid.sizes[axis]) // 3
            other_keep = np.arange(grid.sizes[1 - axis]) <= (2 * grid.sizes[1 - axis]) // 3
            if axis == 0:
                mask = axis_keep[:, None] & other_keep[None, :]
            else:
                mask = other_keep[:, None] & axis_keep[None, :]
        S = np.where(mask, S, 0.0)
        total = total + _sin_shift_to_cos(S, grid.lengths[axis], axis)
    return total


def divergence_of_product(u: VectorField, f: ScalarField) -> ScalarField:
    """Conservative transport term ``div(u f)`` via spectral derivatives.

    The pointwise product is dealiased with the 2/3 rule before
    differentiation.  Under neumann bc the product is expanded in the sine
    basis (zero at the walls), which requires the velocity itself to have a
    vanishing normal component; that is checked and violations raise.
    The result has exactly zero mean under both boundary conditions.
    """
    g = u.grid
    g.require_same(f.grid)
    if g.bc == "neumann":
        _check_normal_flux(u)
    coef = divergence_product_coefficients(
        g, tuple(c.values for c in u.components), f.values)
    return ScalarField(g, _inverse_values(g, coef))


# ---------------------------------------------------------------------------
# NLCH1 snapshot format

_SNAPSHOT_MAGIC = b"NLCH1"


def write_snapshot(path, f: ScalarField, time: float) -> None:
    """Write a field to the NLCH1 container.

    Layout: four ASCII header lines (magic, ``dim nx ny``, ``lx ly bc``,
    ``time <float>``) followed by the row-major float64 little-endian
    payload.  1d grids store ``ny = 1`` and ``ly = 0``.
    """
    g = f.grid
    ny = 1 if g.ny is None else g.ny
    ly = 0.0 if g.ly is None else g.ly
    header = (
        _SNAPSHOT_MAGIC + b"\n"
        + f"{g.dim} {g.nx} {ny}\n".encode("ascii")
        + f"{g.lx!r} {ly!r} {g.bc}\n".encode("ascii")
        + f"time {float(time)!r}\n".encode("ascii")
    )
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_snapshot(path) -> tuple[ScalarField, float]:
    """Read an NLCH1 container back into a field and its time stamp."""
    raw = Path(path).read_bytes()
    lines = []
    pos = 0
    for _ in range(4):
        end = raw.find(b"\n", pos)
        if end < 0:
            raise GridError(f"{path}: truncated NLCH1 header")
        lines.append(raw[pos:end])
        pos = end + 1
    if lines[0] != _SNAPSHOT_MAGIC:
        raise GridError(
            f"{path}: bad magic {lines[0][:16]!r}, expected {_SNAPSHOT_MAGIC!r}"
        )
    try:
        dim, nx, ny = (int(t) for t in lines[1].split())
        lx_s, ly_s, bc = lines[2].split()
        lx, ly = float(lx_s), float(ly_s)
        tag, t_s = lines[3].split()
        time = float(t_s)
    except ValueError as exc:
        raise GridError(f"{path}: malformed NLCH1 header: {exc}") from None
    if tag != b"time":
        raise GridError(f"{path}: fourth header line must start with 'time'")
    grid = make_grid(dim, nx, ny if dim == 2 else None, lx,
                     ly if dim == 2 else None, bc.decode("ascii"))
    expected = grid.cell_count * 8
    payload = raw[pos:]
    if len(payload) != expected:
        raise GridError(
            f"{path}: payload has {len(payload)} bytes, expected {expected}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, values), time
