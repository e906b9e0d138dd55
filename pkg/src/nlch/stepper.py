"""Stabilized first-order IMEX time stepping for the conserved dynamics.

The evolved systems share the form

    phi_t + reaction + div(u phi) = lap(mu) + g,      mu = a phi + F'(phi) - J*phi

with reaction = sigma (phi - mbar) for the mean-reverting variant ("cho")
and reaction = lam(x) (phi - h(x)) for the fidelity variant ("chbeg").

One step solves, diagonally in transform space,

    (1 + dt sigma + dt (a_min + S) k^2) phi_hat_new =
        (1 + dt S k^2) phi_hat
        - dt k^2 hat[(a - a_min) phi + F'(phi) - J*phi]
        - dt hat[div(u phi)] + dt hat[g + sigma mbar]        (cho)
        - dt hat[div(u phi)] + dt hat[g - lam (phi - h)]     (chbeg)

The shift S >= S_min makes the energy of the reaction-free, force-free
flow nonincreasing at any dt; sigma is implicit (constant coefficient),
lam explicit (diagonal in physical space, capped by dt <= 1/max lam).
Spatially constant states follow the implicit-Euler mean update exactly,
because every spatial term above annihilates the zero mode.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import diagnostics
from .grid import (
    Grid,
    GridError,
    ScalarField,
    VectorField,
    _check_normal_flux,
    _forward_values,
    _inverse_values,
    divergence_product_coefficients,
)
from .physics import Kernel, Potential, check_hypotheses

__all__ = [
    "DivergedError",
    "ModelSpec",
    "RunResult",
    "SimConfig",
    "StabilityReport",
    "State",
    "StepperError",
    "make_velocity",
    "mass_closed_form_cho",
    "run",
    "spinodal_initial",
    "stability_limits",
    "step",
]


class StepperError(ValueError):
    """Invalid model/config combination or a failed stepping precondition."""


class DivergedError(RuntimeError):
    """The field stopped being finite; carries the offending step index."""

    def __init__(self, message: str, step_index: int):
        super().__init__(message)
        self.step_index = step_index


# ---------------------------------------------------------------------------
# model and configuration


@dataclass(frozen=True)
class ModelSpec:
    """Which reaction closes the system, plus shared transport and source.

    Build through :meth:`cho` (mean-reverting reaction ``sigma (phi - mbar)``)
    or :meth:`chbeg` (fidelity reaction ``lam(x) (phi - h(x))``).  ``velocity``
    and ``source`` may be ``None`` for the zero field.
    """

    kind: str
    sigma: float = 0.0
    mbar: float = 0.0
    lam: ScalarField | None = None
    h: ScalarField | None = None
    velocity: VectorField | None = None
    source: ScalarField | None = None

    @staticmethod
    def cho(sigma: float, mbar: float,
            velocity: VectorField | None = None,
            source: ScalarField | None = None) -> "ModelSpec":
        if not (np.isfinite(sigma) and sigma >= 0):
            raise StepperError(f"sigma must be finite and >= 0, got {sigma}")
        if not np.isfinite(mbar):
            raise StepperError(f"mbar must be finite, got {mbar}")
        m = ModelSpec("cho", sigma=float(sigma), mbar=float(mbar),
                      velocity=velocity, source=source)
        m._validate_shared()
        return m

    @staticmethod
    def chbeg(lam: ScalarField, h: ScalarField,
              velocity: VectorField | None = None,
              source: ScalarField | None = None) -> "ModelSpec":
        lam.grid.require_same(h.grid)
        if lam.values.min() < 0:
            raise StepperError(
                f"fidelity strength must be nonnegative, min = {lam.values.min()}"
            )
        m = ModelSpec("chbeg", lam=lam, h=h, velocity=velocity, source=source)
        m._validate_shared()
        return m

    def _validate_shared(self) -> None:
        g = self.grid()
        for f in (self.source,):
            if f is not None and g is not None:
                g.require_same(f.grid)
        if self.velocity is not None:
            if g is not None:
                g.require_same(self.velocity.grid)
            # reject velocities that push mass through the walls
            _check_normal_flux(self.velocity)

    def grid(self) -> Grid | None:
        for f in (self.lam, self.h, self.source):
            if f is not None:
                return f.grid
        if self.velocity is not None:
            return self.velocity.grid
        return None

    @property
    def lambda_max(self) -> float:
        if self.lam is None:
            return 0.0
        return float(self.lam.values.max())


@dataclass(frozen=True)
class SimConfig:
    """Time-stepping knobs.

    ``stabilization`` is ``"auto"`` (resolve S through stability_limits) or
    a fixed nonnegative number.  ``steady_tol`` acts on the increment rate
    ``||phi_new - phi|| / dt``; zero disables steady detection.
    ``cfl_mode`` decides whether a dt above the explicit-term caps warns
    or raises.  ``range_guard`` is the |phi| range the stabilization bound
    is sampled on; exceeding it triggers a recompute plus warning.
    """

    dt: float
    t_end: float
    stabilization: float | str = "auto"
    steady_tol: float = 0.0
    max_steps: int = 1_000_000
    seed: int = 0
    cadence: int = 10
    cfl_mode: str = "warn"
    range_guard: float = 1.5

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise StepperError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(self.t_end) and self.t_end >= 0):
            raise StepperError(f"t_end must be >= 0, got {self.t_end}")
        if isinstance(self.stabilization, str):
            if self.stabilization != "auto":
                raise StepperError(
                    f"stabilization must be 'auto' or a number, got {self.stabilization!r}"
                )
        elif not (np.isfinite(self.stabilization) and self.stabilization >= 0):
            raise StepperError(
                f"stabilization must be >= 0, got {self.stabilization}"
            )
        if self.steady_tol < 0:
            raise StepperError(f"steady_tol must be >= 0, got {self.steady_tol}")
        if self.max_steps < 0:
            raise StepperError(f"max_steps must be >= 0, got {self.max_steps}")
        if self.cadence < 1:
            raise StepperError(f"cadence must be >= 1, got {self.cadence}")
        if self.cfl_mode not in ("warn", "error"):
            raise StepperError(f"cfl_mode must be warn or error, got {self.cfl_mode!r}")
        if not (np.isfinite(self.range_guard) and self.range_guard > 0):
            raise StepperError(f"range_guard must be positive, got {self.range_guard}")


@dataclass(frozen=True)
class State:
    """Time and field of one trajectory point."""

    t: float
    phi: ScalarField


@dataclass(frozen=True)
class RunResult:
    """Final state of a run plus why and when it stopped."""

    state: State
    reason: str
    steps: int


# ---------------------------------------------------------------------------
# stability limits


@dataclass(frozen=True)
class StabilityReport:
    """Stabilization bound and explicit-term time step caps.

    ``dt_advective``/``dt_reaction`` are ``None`` when the corresponding
    explicit term is absent (no cap).
    """

    s_min: float
    range_guard: float
    dt_advective: float | None
    dt_reaction: float | None
    max_speed: float
    lambda_max: float


def stability_limits(model: ModelSpec, kernel: Kernel, potential: Potential,
                     config: SimConfig) -> StabilityReport:
    """Bounds the step needs: the energy-stability shift and explicit caps.

    ``s_min = max |F''(s) + a(x) - a_min|`` over ``|s| <= range_guard`` and
    the grid; the advective cap is ``0.5 h_min / max|u|`` and the reaction
    cap ``1 / max lam`` (the mean-reverting sigma is implicit, uncapped).
    """
    m = config.range_guard
    s = np.linspace(-m, m, 2049)
    d2 = potential.d2f(s)
    spread = kernel.a_max - kernel.a_min
    s_min = float(np.maximum(np.abs(d2), np.abs(d2 + spread)).max())

    max_speed = 0.0 if model.velocity is None else model.velocity.max_speed()
    dt_adv = None
    if max_speed > 0:
        dt_adv = 0.5 * min(kernel.grid.spacings) / max_speed
    lam_max = model.lambda_max
    dt_rxn = None if lam_max == 0 else 1.0 / lam_max
    return StabilityReport(
        s_min=s_min, range_guard=m, dt_advective=dt_adv, dt_reaction=dt_rxn,
        max_speed=max_speed, lambda_max=lam_max,
    )


# ---------------------------------------------------------------------------
# the scheme


class _Scheme:
    """Precomputed update context shared by step() and run()."""

    def __init__(self, model: ModelSpec, kernel: Kernel, potential: Potential,
                 config: SimConfig):
        grid = kernel.grid
        mg = model.grid()
        if mg is not None:
            grid.require_same(mg)
        report = check_hypotheses(kernel, potential)
        failing = [i for i in ("H1", "H2", "H3") if not report[i].holds]
        if failing:
            raise StepperError(
                "kernel/potential pair fails required hypotheses "
                + ", ".join(failing)
            )

        limits = stability_limits(model, kernel, potential, config)
        self.limits = limits
        caps = []
        if limits.dt_advective is not None and config.dt > limits.dt_advective:
            caps.append(f"advective cap {limits.dt_advective:.6g}")
        if limits.dt_reaction is not None and config.dt > limits.dt_reaction * (1 + 1e-12):
            caps.append(f"reaction cap {limits.dt_reaction:.6g}")
        if caps:
            msg = f"dt = {config.dt:g} exceeds " + " and ".join(caps)
            if config.cfl_mode == "error":
                raise StepperError(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=3)

        self.model = model
        self.kernel = kernel
        self.potential = potential
        self.config = config
        self.grid = grid
        self.auto_s = config.stabilization == "auto"
        self.s = limits.s_min if self.auto_s else float(config.stabilization)
        self.guard = config.range_guard

        self.k2 = -grid.lap_symbol
        self.sigma_impl = model.sigma if model.kind == "cho" else 0.0
        self._build_factors()

        self.delta_a = kernel.a.values - kernel.a_min
        self.has_delta_a = bool(np.abs(self.delta_a).max() > 1e-13 * max(1.0, kernel.a_max))
        self.u_values = None
        if model.velocity is not None:
            self.u_values = tuple(c.values for c in model.velocity.components)
            if all(np.abs(u).max() == 0.0 for u in self.u_values):
                self.u_values = None

        # static part of the explicit forcing
        if model.kind == "cho":
            r = np.zeros(grid.shape)
            if model.source is not None:
                r = r + model.source.values
            if model.sigma != 0.0:
                r = r + model.sigma * model.mbar
            self.r_static_hat = None
            if np.abs(r).max() > 0:
                self.r_static_hat = _forward_values(grid, r)
        else:
            self.r_static_hat = None  # chbeg forcing depends on phi

    def _build_factors(self):
        dt = self.config.dt
        self.denom = 1.0 + dt * self.sigma_impl \
            + dt * (self.kernel.a_min + self.s) * self.k2
        self.numer = 1.0 + dt * self.s * self.k2

    def escalate_guard(self, observed: float, step_index: int):
        """Range guard exceeded: re-derive S on the observed range, warn."""
        self.guard = observed
        if self.auto_s:
            limits = stability_limits(
                self.model, self.kernel, self.potential,
                replace(self.config, range_guard=observed),
            )
            self.s = limits.s_min
            self._build_factors()
            warnings.warn(
                f"|phi| reached {observed:.3g} beyond the stabilization range "
                f"at step {step_index}; raised S to {self.s:.6g}",
                RuntimeWarning, stacklevel=3,
            )
        else:
            warnings.warn(
                f"|phi| reached {observed:.3g} beyond the stabilization range "
                f"at step {step_index}; S is fixed at {self.s:.6g}",
                RuntimeWarning, stacklevel=3,
            )

    def advance(self, phi: np.ndarray, phi_hat: np.ndarray, step_index: int):
        """One update; returns (phi_new, phi_hat_new)."""
        m = self.model
        dt = self.config.dt
        if self.has_delta_a:
            nl = self.delta_a * phi + self.potential.df(phi)
        else:
            nl = self.potential.df(phi)

        if m.kind == "chbeg":
            r = -m.lam.values * (phi - m.h.values)
            if m.source is not None:
                r = r + m.source.values
            both = _forward_values(self.grid, np.stack((nl, r)))
            nl_hat, r_hat = both[0], both[1]
        else:
            nl_hat = _forward_values(self.grid, nl)
            r_hat = self.r_static_hat

        rhs = self.numer * phi_hat - dt * self.k2 * (nl_hat - self.kernel.spectrum * phi_hat)
        if self.u_values is not None:
            rhs = rhs - dt * divergence_product_coefficients(self.grid, self.u_values, phi)
        if r_hat is not None:
            rhs = rhs + dt * r_hat

        new_hat = rhs / self.denom
        new = _inverse_values(self.grid, new_hat)
        peak = float(np.abs(new).max())
        if not np.isfinite(peak):
            raise DivergedError(
                f"field is no longer finite after step {step_index}", step_index
            )
        if peak > self.guard:
            self.escalate_guard(peak, step_index)
        return new, new_hat


def step(state: State, model: ModelSpec, kernel: Kernel, potential: Potential,
         config: SimConfig) -> State:
    """Advance one dt.  Pure; run() amortizes the setup this repeats."""
    scheme = _Scheme(model, kernel, potential, config)
    phi = state.phi
    kernel.grid.require_same(phi.grid)
    phi_hat = _forward_values(phi.grid, phi.values)
    new, _ = scheme.advance(phi.values, phi_hat, 0)
    return State(t=state.t + config.dt, phi=ScalarField(phi.grid, new))


def run(state0: State, model: ModelSpec, kernel: Kernel, potential: Potential,
        config: SimConfig, sink=None) -> RunResult:
    """Iterate step until t_end, steady state, max_steps, or divergence.

    ``sink(record, state)`` is called at step 0, every ``cadence`` steps,
    and on the final state of a completed run.  The stop reason is one of
    ``t_end``, ``steady``, ``max_steps``, ``diverged``; a diverged run
    returns the last finite state, and its record stream ends at the last
    state whose diagnostics were representable.
    """
    grid = kernel.grid
    grid.require_same(state0.phi.grid)
    scheme = _Scheme(model, kernel, potential, config)
    dt = config.dt
    t0 = state0.t
    horizon = config.t_end - 1e-9 * dt

    state = state0
    emitted_at = -1
    if sink is not None:
        sink(diagnostics.record(state, model, kernel, potential), state)
        emitted_at = 0

    phi = state0.phi.values
    phi_hat = _forward_values(grid, phi)
    n = 0
    reason = "t_end"
    norm_scale = np.sqrt(grid.h_vol)
    while t0 + n * dt < horizon:
        if n >= config.max_steps:
            reason = "max_steps"
            break
        try:
            new, new_hat = scheme.advance(phi, phi_hat, n)
        except DivergedError:
            reason = "diverged"
            break
        n += 1
        incr = float(np.linalg.norm((new - phi).ravel())) * norm_scale / dt
        phi, phi_hat = new, new_hat
        state = State(t=t0 + n * dt, phi=ScalarField(grid, phi))
        if sink is not None and n % config.cadence == 0:
            # a finite but enormous field can overflow inside the
            # diagnostics (F' cubes the values); that is divergence too
            try:
                rec = diagnostics.record(state, model, kernel, potential)
            except GridError:
                reason = "diverged"
                break
            sink(rec, state)
            emitted_at = n
        if config.steady_tol > 0 and incr <= config.steady_tol:
            reason = "steady"
            break

    if sink is not None and emitted_at != n and reason != "diverged":
        try:
            rec = diagnostics.record(state, model, kernel, potential)
        except GridError:
            reason = "diverged"
        else:
            sink(rec, state)
    return RunResult(state=state, reason=reason, steps=n)


# ---------------------------------------------------------------------------
# closed forms and generators


def mass_closed_form_cho(mbar0: float, sigma: float, f_const: float, t):
    """Mean of the mean-reverting flow: solution of  d/dt m + sigma m = f.

    ``f_const`` is the constant forcing ``mean(g) + sigma mbar``.  Returns
    ``f/sigma + (mbar0 - f/sigma) exp(-sigma t)`` for positive sigma and
    the linear drift ``mbar0 + f t`` at sigma = 0.  Vectorized over t.
    """
    t = np.asarray(t, dtype=np.float64)
    if sigma < 0:
        raise StepperError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        out = mbar0 + f_const * t
    else:
        limit = f_const / sigma
        out = limit + (mbar0 - limit) * np.exp(-sigma * t)
    if out.ndim == 0:
        return float(out)
    return out


def spinodal_initial(grid: Grid, amplitude: float, mean: float = 0.0,
                     seed: int = 0) -> ScalarField:
    """Uniform noise in [-amplitude, amplitude] around ``mean``, seeded."""
    if amplitude < 0:
        raise StepperError(f"amplitude must be >= 0, got {amplitude}")
    rng = np.random.default_rng(seed)
    vals = mean + amplitude * rng.uniform(-1.0, 1.0, size=grid.shape)
    return ScalarField(grid, vals)


def make_velocity(grid: Grid, kind: str, magnitude: float = 1.0) -> VectorField | None:
    """Prescribed velocity families: ``zero``, ``shear``, ``taylor_green``.

    ``zero`` returns ``None`` (the stepper skips transport entirely).
    ``shear`` is ``(magnitude sin(2 pi y / ly), 0)``; ``taylor_green`` a
    divergence-free cellular flow.  Both need dim = 2 and, having nonzero
    wall-normal components in the cosine representation, periodic bc.
    """
    if kind == "zero":
        return None
    if kind not in ("shear", "taylor_green"):
        raise StepperError(f"unknown velocity kind {kind!r}")
    if grid.dim != 2:
        raise StepperError(f"velocity kind {kind!r} needs a 2-d grid")
    x, y = grid.meshes()
    if kind == "shear":
        ux = magnitude * np.sin(2 * np.pi * y / grid.ly)
        uy = np.zeros(grid.shape)
    else:
        ax = 2 * np.pi / grid.lx
        ay = 2 * np.pi / grid.ly
        ux = magnitude * np.sin(ax * x) * np.cos(ay * y)
        uy = -magnitude * (ax / ay) * np.cos(ax * x) * np.sin(ay * y)
    return VectorField((ScalarField(grid, ux), ScalarField(grid, uy)))
