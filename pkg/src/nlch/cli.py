"""Command-line front end: config parsing and command dispatch.

Four commands share one flat ``key = value`` config format:

* ``run``      evolve a model, write snapshots and a diagnostics CSV
* ``inpaint``  restore a damaged PGM image through the fidelity flow
* ``check``    print the kernel/potential hypothesis table
* ``probe``    run the dissipativity probe over several amplitudes

Exit codes: 0 success, 1 runtime failure (non-convergence, divergence),
2 failed required hypotheses from ``check``, 64 usage errors.  Outputs
embed the seed and the effective config so runs can be reproduced
bit-identically.
"""

from __future__ import annotations

import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .diagnostics import (DiagnosticsError, TimeSeries, dissipativity_probe,
                          write_diagnostics_csv)
from .grid import GridError, ScalarField, make_grid, read_snapshot, write_snapshot
from .inpaint import (FidelitySpec, InpaintError, InpaintParams, build_fidelity,
                      inpaint, read_mask, read_pgm, write_pgm)
from .physics import PhysicsError, Potential, build_kernel, check_hypotheses
from .stepper import (ModelSpec, SimConfig, State, StepperError,
                      make_velocity, run, spinodal_initial)

__all__ = ["Config", "ConfigError", "UsageError", "dispatch", "main",
           "normalize_config", "parse_config"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CHECK_FAILED = 2
EXIT_USAGE = 64


class ConfigError(ValueError):
    """Malformed or inconsistent configuration text."""


class UsageError(ValueError):
    """Bad command line: unknown command, missing flag, bad flag value."""


# ---------------------------------------------------------------------------
# config schema

_AUTO = object()

# key -> (type tag, default, allowed values or None)
# type tags: int, float, str, choice, auto_or_float, float_list
_SCHEMA = {
    "dim": ("int", 2, None),
    "nx": ("int", 64, None),
    "ny": ("int", 64, None),
    "lx": ("float", 2 * np.pi, None),
    "ly": ("float", 2 * np.pi, None),
    "bc": ("choice", "periodic", ("periodic", "neumann")),
    "model": ("choice", "cho", ("cho", "chbeg")),
    "sigma": ("float", 0.0, None),
    "mbar": ("float", 0.0, None),
    "lambda0": ("float", 1e3, None),
    "image": ("str", "", None),
    "mask": ("str", "", None),
    "kernel": ("choice", "gaussian", ("gaussian", "mollifier")),
    "eps": ("float", 0.4, None),
    "amplitude": ("float", 1.25, None),
    "potential": ("choice", "quartic", ("quartic",)),
    "velocity": ("choice", "zero", ("zero", "shear", "taylor_green")),
    "velocity_magnitude": ("float", 1.0, None),
    "source": ("choice", "zero", ("zero", "constant")),
    "source_value": ("float", 0.0, None),
    "initial": ("choice", "spinodal", ("spinodal", "snapshot", "image")),
    "initial_amplitude": ("float", 0.05, None),
    "initial_mean": ("float", 0.0, None),
    "initial_snapshot": ("str", "", None),
    "dt": ("float", None, None),
    "t_end": ("float", None, None),
    "stabilization_s": ("auto_or_float", "auto", None),
    "steady_tol": ("float", 0.0, None),
    "max_steps": ("int", 1_000_000, None),
    "seed": ("int", 0, None),
    "probe_amplitudes": ("float_list", (0.1, 1.0, 5.0), None),
    "output_dir": ("str", "out", None),
    "cadence": ("int", 10, None),
}

_REQUIRED = {
    "run": ("dt", "t_end"),
    "probe": ("dt", "t_end"),
    "inpaint": ("dt",),
    "check": (),
}


@dataclass(frozen=True)
class Config:
    """Validated flat configuration; equality is on effective values."""

    values: dict
    provided: frozenset = field(default_factory=frozenset, compare=False)

    def __getitem__(self, key):
        return self.values[key]

    def was_provided(self, key) -> bool:
        return key in self.provided


def _parse_value(key, raw, line_no):
    tag, _, allowed = _SCHEMA[key]
    where = f"line {line_no}: {key}:"
    if tag == "int":
        try:
            return int(raw, 10)
        except ValueError:
            raise ConfigError(f"{where} expected an integer, got {raw!r}") from None
    if tag == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{where} expected a number, got {raw!r}") from None
    if tag == "auto_or_float":
        if raw == "auto":
            return "auto"
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(
                f"{where} expected 'auto' or a number, got {raw!r}") from None
    if tag == "float_list":
        try:
            return tuple(float(part) for part in raw.split(","))
        except ValueError:
            raise ConfigError(
                f"{where} expected comma-separated numbers, got {raw!r}") from None
    if tag == "choice":
        if raw not in allowed:
            raise ConfigError(
                f"{where} expected one of {', '.join(allowed)}, got {raw!r}")
        return raw
    return raw


def parse_config(text: str) -> Config:
    """Parse ``key = value`` lines into a validated Config with defaults.

    ``#`` starts a comment; blank lines are skipped.  Unknown keys,
    duplicate keys, and badly typed values raise ConfigError naming the
    key and line.
    """
    values = {}
    first_line = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {body!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(
                f"duplicate key {key!r} on lines {first_line[key]} and {line_no}")
        values[key] = _parse_value(key, raw, line_no)
        first_line[key] = line_no
    provided = frozenset(values)
    for key, (_, default, _) in _SCHEMA.items():
        if key not in values:
            values[key] = default
    return Config(values=values, provided=provided)


def _format_value(key, value):
    tag = _SCHEMA[key][0]
    if value is None:
        return ""
    if tag == "float":
        return f"{value:.17g}"
    if tag == "auto_or_float":
        return value if value == "auto" else f"{value:.17g}"
    if tag == "float_list":
        return ",".join(f"{v:.17g}" for v in value)
    return str(value)


def normalize_config(config: Config) -> str:
    """Render the effective config; re-parsing yields an equal Config."""
    lines = ["# effective configuration (nlch %s)" % __version__]
    for key in _SCHEMA:
        value = config.values.get(key)
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(key, value)}")
    return "\n".join(lines) + "\n"


def _require(config: Config, command: str) -> None:
    for key in _REQUIRED[command]:
        if config.values.get(key) is None and not config.was_provided(key):
            raise ConfigError(
                f"missing required key {key!r} for command {command!r}")


# ---------------------------------------------------------------------------
# model assembly from config


def _build_grid(config: Config):
    if config["dim"] == 1:
        return make_grid(1, config["nx"], lx=config["lx"], bc=config["bc"])
    return make_grid(2, config["nx"], config["ny"], lx=config["lx"],
                     ly=config["ly"], bc=config["bc"])


def _build_velocity(config: Config, grid):
    if config["velocity"] == "zero":
        return None
    return make_velocity(grid, config["velocity"], config["velocity_magnitude"])


def _build_source(config: Config, grid):
    if config["source"] == "zero" or config["source_value"] == 0.0:
        return None
    return ScalarField(grid, np.full(grid.shape, config["source_value"]))


def _build_model(config: Config, grid):
    """ModelSpec plus the fidelity target h (None for cho)."""
    velocity = _build_velocity(config, grid)
    source = _build_source(config, grid)
    if config["model"] == "cho":
        return ModelSpec.cho(config["sigma"], config["mbar"],
                             velocity=velocity, source=source), None
    image_path, mask_path = config["image"], config["mask"]
    if not image_path or not mask_path:
        raise ConfigError(
            "model chbeg needs both 'image' and 'mask' paths "
            "(config keys or --image/--mask flags)")
    image = read_pgm(image_path)
    mask = read_mask(mask_path)
    spec = FidelitySpec(lambda0=config["lambda0"])
    lam, h = build_fidelity(image, mask, spec, grid)
    return ModelSpec.chbeg(lam, h, velocity=velocity, source=source), h


def _initial_state(config: Config, grid, h) -> State:
    kind = config["initial"]
    if kind == "spinodal" and h is not None and not config.was_provided("initial"):
        kind = "image"
    if kind == "snapshot":
        path = config["initial_snapshot"]
        if not path:
            raise ConfigError("initial = snapshot needs 'initial_snapshot' path")
        f, time = read_snapshot(path)
        if f.grid != grid:
            raise ConfigError(
                f"snapshot grid {f.grid.sizes} does not match "
                f"config grid {grid.sizes}")
        return State(time, f)
    if kind == "image":
        if h is None:
            raise ConfigError("initial = image needs model = chbeg")
        return State(0.0, ScalarField(grid, h.values.copy()))
    return State(0.0, spinodal_initial(
        grid, config["initial_amplitude"], mean=config["initial_mean"],
        seed=config["seed"]))


def _sim_config(config: Config, cfl_mode="warn") -> SimConfig:
    return SimConfig(
        dt=config["dt"], t_end=config["t_end"],
        stabilization=config["stabilization_s"],
        steady_tol=config["steady_tol"], max_steps=config["max_steps"],
        seed=config["seed"], cadence=config["cadence"], cfl_mode=cfl_mode)


def _metadata_comments(config: Config):
    yield f"nlch {__version__}"
    yield f"seed = {config['seed']}"
    for line in normalize_config(config).splitlines():
        if line.startswith("#") or line.startswith("output_dir = "):
            continue
        yield line


# ---------------------------------------------------------------------------
# commands


def _cmd_run(config: Config, out_dir: str) -> int:
    grid = _build_grid(config)
    kernel = build_kernel(config["kernel"], config["eps"], config["amplitude"],
                          grid)
    potential = Potential.quartic()
    model, h = _build_model(config, grid)
    state0 = _initial_state(config, grid, h)
    os.makedirs(out_dir, exist_ok=True)

    series = TimeSeries()
    dt = config["dt"]

    def sink(rec, state):
        series.append(rec)
        step_index = int(round(state.t / dt)) if dt > 0 else 0
        write_snapshot(os.path.join(out_dir, f"snap_{step_index:08d}.nlch1"),
                       state.phi, state.t)

    result = run(state0, model, kernel, potential, _sim_config(config),
                 sink=sink)
    write_diagnostics_csv(os.path.join(out_dir, "diagnostics.csv"), series,
                          comments=_metadata_comments(config))
    with open(os.path.join(out_dir, "effective.cfg"), "w") as fh:
        fh.write(normalize_config(config))
    if result.reason == "diverged":
        print(f"nlch: run diverged after {result.steps} steps; partial "
              f"diagnostics in {out_dir}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"run: {result.steps} steps, stopped by {result.reason}, "
          f"t = {result.state.t:.17g}, outputs in {out_dir}")
    return EXIT_OK


def _cmd_inpaint(config: Config, out_dir: str) -> int:
    image_path, mask_path = config["image"], config["mask"]
    if not image_path or not mask_path:
        raise UsageError("inpaint needs --image and --mask (or config keys)")
    image = read_pgm(image_path)
    mask = read_mask(mask_path)
    spec = FidelitySpec(lambda0=config["lambda0"])
    defaults = InpaintParams()
    params = InpaintParams(
        dt=config["dt"], kernel_kind=config["kernel"],
        kernel_eps=config["eps"] if config.was_provided("eps")
        else defaults.kernel_eps,
        kernel_amplitude=config["amplitude"],
        bc=config["bc"] if config.was_provided("bc") else defaults.bc,
        steady_tol=config["steady_tol"] if config.was_provided("steady_tol")
        else defaults.steady_tol,
        max_steps=config["max_steps"],
        stabilization=config["stabilization_s"], seed=config["seed"],
        cadence=config["cadence"])
    os.makedirs(out_dir, exist_ok=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = inpaint(image, mask, spec, params)
    write_pgm(os.path.join(out_dir, "restored.pgm"), result.image,
              comments=[f"nlch {__version__}", f"seed = {config['seed']}"])
    write_snapshot(os.path.join(out_dir, "phi_final.nlch1"),
                   result.state.phi, result.state.t)
    with open(os.path.join(out_dir, "effective.cfg"), "w") as fh:
        fh.write(normalize_config(config))
    if not result.converged:
        print(f"nlch: inpaint stopped by {result.reason} after {result.steps} "
              f"steps without reaching steady_tol", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"inpaint: steady after {result.steps} steps, outputs in {out_dir}")
    return EXIT_OK


def _cmd_check(config: Config) -> int:
    grid = _build_grid(config)
    kernel = build_kernel(config["kernel"], config["eps"], config["amplitude"],
                          grid)
    report = check_hypotheses(kernel, Potential.quartic())
    print(report.summary_table())
    return EXIT_OK if report.required_ok() else EXIT_CHECK_FAILED


def _cmd_probe(config: Config) -> int:
    grid = _build_grid(config)
    kernel = build_kernel(config["kernel"], config["eps"], config["amplitude"],
                          grid)
    potential = Potential.quartic()
    model, _ = _build_model(config, grid)
    try:
        report = dissipativity_probe(
            config["probe_amplitudes"], model, kernel, potential,
            _sim_config(config), mean=config["initial_mean"],
            seed=config["seed"])
    except DiagnosticsError as exc:
        print(f"nlch: probe failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(report.summary_table())
    return EXIT_OK


# ---------------------------------------------------------------------------
# dispatch

_USAGE = """\
usage: nlch <command> [--config FILE] [--image FILE] [--mask FILE] [--out DIR]
commands: run | inpaint | check | probe"""


def _parse_argv(argv):
    if not argv:
        raise UsageError("no command given")
    command, flags = argv[0], {}
    if command in ("-h", "--help", "help"):
        return "help", {}
    if command not in _REQUIRED:
        raise UsageError(f"unknown command {command!r}")
    known = ("--config", "--image", "--mask", "--out")
    i = 1
    while i < len(argv):
        flag = argv[i]
        if flag not in known:
            raise UsageError(f"unknown flag {flag!r}")
        if i + 1 >= len(argv):
            raise UsageError(f"flag {flag} needs a value")
        if flag in flags:
            raise UsageError(f"flag {flag} given twice")
        flags[flag] = argv[i + 1]
        i += 2
    return command, flags


def dispatch(argv) -> int:
    """Run one command; returns the process exit code (0, 1, 2, or 64)."""
    try:
        command, flags = _parse_argv(list(argv))
        if command == "help":
            print(_USAGE)
            return EXIT_OK
        text = ""
        if "--config" in flags:
            try:
                with open(flags["--config"], "r", encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
        config = parse_config(text)
        values = dict(config.values)
        provided = set(config.provided)
        for flag, key in (("--image", "image"), ("--mask", "mask"),
                          ("--out", "output_dir")):
            if flag in flags:
                values[key] = flags[flag]
                provided.add(key)
        config = Config(values=values, provided=frozenset(provided))
        _require(config, command)
        out_dir = config["output_dir"]
        if command == "run":
            return _cmd_run(config, out_dir)
        if command == "inpaint":
            return _cmd_inpaint(config, out_dir)
        if command == "check":
            return _cmd_check(config)
        return _cmd_probe(config)
    except (UsageError, ConfigError, InpaintError, GridError, PhysicsError,
            StepperError, OSError) as exc:
        print(f"nlch: error: {exc}", file=sys.stderr)
        if isinstance(exc, UsageError):
            print(_USAGE, file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
