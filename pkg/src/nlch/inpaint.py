"""Binary-image inpainting through the fidelity-reaction flow.

A damaged grayscale image and a damage mask become a fidelity pair
(lam, h): outside the damaged region D the reaction lam0 (phi - h) pins
the phase field to the image colors (wells at phi1, phi2); inside D the
reaction vanishes and the conserved nonlocal dynamics fills the hole by
continuing the surrounding pattern.  The restored image is the final
field thresholded at the well midpoint.

Images travel as binary PGM (P5, maxval 255).  Pixels are identified
one-to-one with simulation cells at unit spacing, so no resampling enters
the fidelity term; pixel counts must be even (transform layout).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, make_grid
from .physics import Potential, build_kernel
from .stepper import ModelSpec, SimConfig, State, run

__all__ = [
    "FidelitySpec",
    "ImageGray",
    "InpaintError",
    "InpaintParams",
    "InpaintResult",
    "Mask",
    "build_fidelity",
    "inpaint",
    "read_mask",
    "read_pgm",
    "threshold",
    "write_pgm",
]


class InpaintError(ValueError):
    """Malformed image data or inconsistent inpainting inputs."""


# ---------------------------------------------------------------------------
# image containers and PGM I/O


@dataclass(frozen=True)
class ImageGray:
    """8-bit grayscale image; pixels[row, col], row-major."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width):
            raise InpaintError(
                f"pixel array shape {px.shape} does not match "
                f"height x width = {self.height} x {self.width}"
            )
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)


@dataclass(frozen=True)
class Mask:
    """Damage mask; damaged[row, col] is True inside the damaged region D."""

    width: int
    height: int
    damaged: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.damaged, dtype=bool)
        if d.shape != (self.height, self.width):
            raise InpaintError(
                f"mask array shape {d.shape} does not match "
                f"height x width = {self.height} x {self.width}"
            )
        d = d.copy()
        d.setflags(write=False)
        object.__setattr__(self, "damaged", d)


def _pgm_tokens(data: bytes, path) -> tuple[list[bytes], int]:
    """First four header tokens and the offset one byte past the last one."""
    tokens = []
    i = 0
    n = len(data)
    while len(tokens) < 4:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if i == start:
            raise InpaintError(f"{path}: truncated PGM header")
        tokens.append(data[start:i])
    return tokens, i


def read_pgm(path) -> ImageGray:
    """Read a binary PGM (P5, maxval 255); reject anything else."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data:
        raise InpaintError(f"{path}: empty file")
    magic = data[:2]
    if magic == b"P2":
        raise InpaintError(
            f"{path}: ASCII PGM (P2) is not supported, need binary PGM (P5)"
        )
    if magic != b"P5":
        raise InpaintError(f"{path}: not a PGM file (magic {magic!r}, need P5)")
    tokens, off = _pgm_tokens(data, path)
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise InpaintError(f"{path}: non-numeric PGM header fields") from None
    if width < 1 or height < 1:
        raise InpaintError(f"{path}: bad image size {width} x {height}")
    if maxval != 255:
        raise InpaintError(f"{path}: unsupported maxval {maxval}, need 255")
    payload = data[off + 1 :]
    if len(payload) != width * height:
        raise InpaintError(
            f"{path}: payload has {len(payload)} bytes, need {width * height}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return ImageGray(width=width, height=height, pixels=pixels)


def write_pgm(path, image: ImageGray, comments=()) -> None:
    """Write a binary PGM (P5, maxval 255), optional header comments."""
    with open(path, "wb") as fh:
        fh.write(b"P5\n")
        for line in comments:
            text = str(line).replace("\n", " ").replace("\r", " ")
            fh.write(b"# " + text.encode("ascii", "replace") + b"\n")
        fh.write(b"%d %d\n255\n" % (image.width, image.height))
        fh.write(np.ascontiguousarray(image.pixels, dtype=np.uint8).tobytes())


def read_mask(path) -> Mask:
    """Damage mask from PGM: dark pixels (< 128) are the damaged region."""
    img = read_pgm(path)
    return Mask(width=img.width, height=img.height, damaged=img.pixels < 128)


# ---------------------------------------------------------------------------
# fidelity construction


@dataclass(frozen=True)
class FidelitySpec:
    """Strength and color mapping of the fidelity term.

    ``lambda0`` may be zero (no pinning anywhere, the free-dynamics
    control case).  ``colors`` are the field values the two image colors
    map to; they must be the wells of the potential in use.  ``threshold``
    is the binarization cut as a fraction of the 8-bit range.
    """

    lambda0: float = 1e3
    colors: tuple[float, float] = (-1.0, 1.0)
    threshold: float = 0.5

    def __post_init__(self):
        if not (np.isfinite(self.lambda0) and self.lambda0 >= 0):
            raise InpaintError(f"lambda0 must be >= 0, got {self.lambda0}")
        c1, c2 = self.colors
        if not (np.isfinite(c1) and np.isfinite(c2) and c1 < c2):
            raise InpaintError(f"colors must be increasing, got {self.colors}")
        if not 0.0 < self.threshold < 1.0:
            raise InpaintError(
                f"threshold must be in (0, 1), got {self.threshold}"
            )

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.colors[0] + self.colors[1])

    def potential(self) -> Potential:
        if self.colors == (-1.0, 1.0):
            return Potential.quartic()
        return Potential.shifted_quartic(self.colors[0], self.colors[1])


def build_fidelity(image: ImageGray, mask: Mask, spec: FidelitySpec,
                   grid: Grid) -> tuple[ScalarField, ScalarField]:
    """Map (image, mask) to the reaction pair (lam, h) on the grid.

    ``h`` is the second color where the pixel clears the threshold and the
    first color elsewhere; ``lam`` is ``lambda0`` on intact pixels and 0 on
    damaged ones.  Inside the damaged region the dynamics never reads h,
    so it is set to 0 there.  Image rows map to the grid's second axis.
    """
    if (image.width, image.height) != (mask.width, mask.height):
        raise InpaintError(
            f"image is {image.width} x {image.height} but mask is "
            f"{mask.width} x {mask.height}"
        )
    if grid.dim != 2 or grid.sizes != (image.width, image.height):
        raise InpaintError(
            f"grid size {grid.sizes} does not match image "
            f"{image.width} x {image.height}"
        )
    cut = spec.threshold * 255.0
    c1, c2 = spec.colors
    h_vals = np.where(image.pixels.T >= cut, c2, c1).astype(np.float64)
    damaged = mask.damaged.T
    h_vals[damaged] = 0.0
    lam_vals = np.where(damaged, 0.0, spec.lambda0)
    return ScalarField(grid, lam_vals), ScalarField(grid, h_vals)


def threshold(f: ScalarField, spec: FidelitySpec) -> ImageGray:
    """Binarize a field at the color midpoint: 255 at or above, 0 below."""
    mid = spec.midpoint
    px = np.where(f.values.T >= mid, 255, 0).astype(np.uint8)
    ny, nx = px.shape
    return ImageGray(width=nx, height=ny, pixels=px)


# ---------------------------------------------------------------------------
# the end-to-end flow


@dataclass(frozen=True)
class InpaintParams:
    """Solver knobs for an inpainting job.

    The kernel width is in pixels.  ``dt`` must respect the explicit
    fidelity cap ``dt <= 1 / lambda0``.  ``noise_amplitude`` seeds the
    damaged region with uniform noise for multistability experiments;
    the default initialization inside D is exactly 0.
    """

    dt: float = 1e-3
    kernel_kind: str = "gaussian"
    kernel_eps: float = 3.0
    kernel_amplitude: float = 1.25
    bc: str = "neumann"
    steady_tol: float = 1e-6
    max_steps: int = 200_000
    stabilization: float | str = "auto"
    noise_amplitude: float = 0.0
    seed: int = 0
    cadence: int = 50


@dataclass(frozen=True)
class InpaintResult:
    """Restored image plus how the run ended.

    ``converged`` is False when the flow hit max_steps before reaching the
    steady tolerance; the image is then the partial restoration.
    """

    image: ImageGray
    converged: bool
    state: State
    steps: int
    reason: str


def inpaint(image: ImageGray, mask: Mask, spec: FidelitySpec,
            params: InpaintParams = InpaintParams(), sink=None) -> InpaintResult:
    """Restore the damaged region by running the fidelity flow to rest.

    Builds the unit-spacing grid, the fidelity pair, and the kernel; runs
    the conserved dynamics from phi0 = h (0 inside the damage) until the
    increment rate drops below ``steady_tol``; thresholds the final field
    back to an image.  Non-convergence is reported on the result, not
    raised.
    """
    if spec.lambda0 > 0 and params.dt > 1.0 / spec.lambda0 * (1 + 1e-12):
        raise InpaintError(
            f"dt = {params.dt:g} exceeds the fidelity cap "
            f"1/lambda0 = {1.0 / spec.lambda0:g}"
        )
    grid = make_grid(2, image.width, image.height,
                     lx=float(image.width), ly=float(image.height),
                     bc=params.bc)
    lam, h = build_fidelity(image, mask, spec, grid)
    potential = spec.potential()
    kernel = build_kernel(params.kernel_kind, params.kernel_eps,
                          params.kernel_amplitude, grid)
    model = ModelSpec.chbeg(lam, h)

    phi0 = h.values.copy()
    if params.noise_amplitude > 0:
        rng = np.random.default_rng(params.seed)
        noise = params.noise_amplitude * rng.uniform(-1, 1, size=grid.shape)
        phi0 = phi0 + np.where(mask.damaged.T, noise, 0.0)

    config = SimConfig(
        dt=params.dt,
        t_end=params.dt * (params.max_steps + 1),
        stabilization=params.stabilization,
        steady_tol=params.steady_tol,
        max_steps=params.max_steps,
        seed=params.seed,
        cadence=params.cadence,
        cfl_mode="error",
    )
    result = run(State(0.0, ScalarField(grid, phi0)), model, kernel,
                 potential, config, sink=sink)
    converged = result.reason == "steady"
    if not converged:
        warnings.warn(
            f"inpainting stopped by {result.reason} after {result.steps} "
            f"steps without reaching steady_tol = {params.steady_tol:g}",
            RuntimeWarning, stacklevel=2,
        )
    return InpaintResult(
        image=threshold(result.state.phi, spec),
        converged=converged,
        state=result.state,
        steps=result.steps,
        reason=result.reason,
    )
