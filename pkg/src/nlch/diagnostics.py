"""Scalar time-series records, energy bookkeeping, and pattern statistics.

The per-step record carries the quantities of the energy balance

    d/dt E(phi) + ||grad mu||^2 + (reaction, mu) = (u phi, grad mu) + (g, mu)

so a finished run can be audited: the forward-difference residual of this
balance converges to zero at first order in dt.  Also here: the sharp-norm
ratio experiment behind continuous dependence on initial data, bimodality
and structure-factor metrics for patterns, and a multi-amplitude probe of
dissipativity (trajectories entering a common energy band).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .grid import ScalarField, _forward_values, gradient
from .physics import (
    Kernel,
    Potential,
    chemical_potential,
    energy,
    sharp_norm,
)

__all__ = [
    "CSV_FIELDS",
    "DependenceReport",
    "DiagRecord",
    "DiagnosticsError",
    "PatternMetrics",
    "ProbeEntry",
    "ProbeReport",
    "ResidualSeries",
    "StateTrail",
    "TimeSeries",
    "continuous_dependence",
    "dissipativity_probe",
    "energy_equality_residual",
    "pattern_metrics",
    "read_diagnostics_csv",
    "record",
    "write_diagnostics_csv",
]

CSV_FIELDS = ("t", "mean", "energy", "grad_mu_sq", "phi_min", "phi_max",
              "sharp", "attractor_dist")


class DiagnosticsError(ValueError):
    """Inconsistent series or trajectories handed to a diagnostic."""


@dataclass(frozen=True)
class DiagRecord:
    """Scalar snapshot of one trajectory point.

    The first eight fields are the CSV columns.  The three pairing fields
    are the inner products the energy balance needs; they ride along in
    memory (a run records them for free) but are not serialized.
    """

    t: float
    mean: float
    energy: float
    grad_mu_sq: float
    phi_min: float
    phi_max: float
    sharp: float
    attractor_dist: float
    reaction_pairing: float = 0.0
    transport_pairing: float = 0.0
    source_pairing: float = 0.0


def record(state, model, kernel: Kernel, potential: Potential) -> DiagRecord:
    """Compute every diagnostic scalar from the current field.

    The energy is obtained through the physics module's energy function on
    the same field object, so a stored snapshot reproduces it bit for bit.
    The attractor distance is ``d(phi, 0) = ||phi|| + |int F(phi) - int F(0)|^(1/2)``.
    """
    phi = state.phi
    g = phi.grid
    kernel.grid.require_same(g)
    vals = phi.values

    mu = chemical_potential(kernel, potential, phi)
    # ||grad mu||^2 as the spectral pairing (mu, -lap mu): the transform
    # carries the full derivative content, including modes whose sine
    # images vanish on the cell centers
    mu_hat = _forward_values(g, mu.values)
    grad_mu_sq = float(
        np.sum((-g.lap_symbol) * np.abs(mu_hat) ** 2 * g.parseval_weights)
    )
    en = energy(kernel, potential, phi)

    pot_integral = float(np.sum(potential.f(vals)) * g.h_vol)
    pot_zero = float(potential.f(0.0)) * g.h_vol * g.cell_count
    l2 = float(np.sqrt(np.sum(vals**2) * g.h_vol))
    attractor = l2 + float(np.sqrt(abs(pot_integral - pot_zero)))

    reaction = 0.0
    if model.kind == "cho":
        if model.sigma != 0.0:
            reaction = model.sigma * float(
                np.sum((vals - model.mbar) * mu.values) * g.h_vol
            )
    else:
        reaction = float(
            np.sum(model.lam.values * (vals - model.h.values) * mu.values) * g.h_vol
        )

    transport = 0.0
    if model.velocity is not None:
        grad_mu = gradient(mu)
        transport = float(
            sum(
                np.sum(u.values * vals * d.values)
                for u, d in zip(model.velocity.components, grad_mu.components)
            ) * g.h_vol
        )

    source = 0.0
    if model.source is not None:
        source = float(np.sum(model.source.values * mu.values) * g.h_vol)

    return DiagRecord(
        t=float(state.t), mean=float(vals.mean()), energy=en,
        grad_mu_sq=grad_mu_sq, phi_min=float(vals.min()),
        phi_max=float(vals.max()), sharp=sharp_norm(phi),
        attractor_dist=attractor, reaction_pairing=reaction,
        transport_pairing=transport, source_pairing=source,
    )


# ---------------------------------------------------------------------------
# series containers


class TimeSeries:
    """Ordered DiagRecords with strictly increasing t.

    Use the instance's ``sink`` method as the run callback to collect
    records as they are emitted.
    """

    def __init__(self, records=()):
        self.records: list[DiagRecord] = []
        for r in records:
            self.append(r)

    def append(self, rec: DiagRecord) -> None:
        if self.records and rec.t <= self.records[-1].t:
            raise DiagnosticsError(
                f"records must have increasing t: {rec.t} after {self.records[-1].t}"
            )
        self.records.append(rec)

    def sink(self, rec: DiagRecord, state) -> None:
        self.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def column(self, name: str) -> np.ndarray:
        if name not in {f.name for f in fields(DiagRecord)}:
            raise DiagnosticsError(f"unknown diagnostic column {name!r}")
        return np.array([getattr(r, name) for r in self.records])


class StateTrail:
    """Collects the states a run emits (for field-level diagnostics)."""

    def __init__(self):
        self.states = []

    def sink(self, rec: DiagRecord, state) -> None:
        self.states.append(state)

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]


# ---------------------------------------------------------------------------
# CSV round trip


def write_diagnostics_csv(path, series: TimeSeries, comments=()) -> None:
    """CSV with `# ` metadata lines, a fixed header, and %.17g rows."""
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(CSV_FIELDS) + "\n")
        for r in series.records:
            fh.write(",".join("%.17g" % getattr(r, k) for k in CSV_FIELDS) + "\n")


def read_diagnostics_csv(path) -> TimeSeries:
    """Parse a diagnostics CSV back into a TimeSeries (pairings not stored)."""
    series = TimeSeries()
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh)
                if row and not row[0].lstrip().startswith("#")]
    if not rows or tuple(rows[0]) != CSV_FIELDS:
        raise DiagnosticsError(f"{path}: missing or wrong diagnostics header")
    for row in rows[1:]:
        if len(row) != len(CSV_FIELDS):
            raise DiagnosticsError(f"{path}: row has {len(row)} columns")
        series.append(DiagRecord(**{k: float(v) for k, v in zip(CSV_FIELDS, row)}))
    return series


# ---------------------------------------------------------------------------
# energy balance residual


@dataclass(frozen=True)
class ResidualSeries:
    """Forward-difference energy-balance residual over a record window."""

    t: np.ndarray
    values: np.ndarray

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


def energy_equality_residual(series: TimeSeries, window=None) -> ResidualSeries:
    """r(t_n) = (E_{n+1} - E_n)/dt + ||grad mu||^2 + (reaction, mu)
               - (u phi, grad mu) - (g, mu), all at level n.

    The series must be recorded every step (cadence 1) so the forward
    difference matches the scheme's own discretization; ``window`` is an
    optional (t_lo, t_hi) restriction and must lie inside the series.
    """
    if len(series) < 2:
        raise DiagnosticsError("residual needs at least two records")
    t = series.column("t")
    if window is not None:
        lo, hi = window
        if lo < t[0] - 1e-12 or hi > t[-1] + 1e-12:
            raise DiagnosticsError(
                f"window [{lo}, {hi}] outside recorded range [{t[0]}, {t[-1]}]"
            )
        keep = (t >= lo - 1e-12) & (t <= hi + 1e-12)
        idx = np.flatnonzero(keep)
    else:
        idx = np.arange(len(series))
    if idx.size < 2:
        raise DiagnosticsError("window selects fewer than two records")

    en = series.column("energy")[idx]
    gms = series.column("grad_mu_sq")[idx]
    rea = series.column("reaction_pairing")[idx]
    tra = series.column("transport_pairing")[idx]
    src = series.column("source_pairing")[idx]
    tt = t[idx]
    dt = np.diff(tt)
    r = np.diff(en) / dt + gms[:-1] + rea[:-1] - tra[:-1] - src[:-1]
    return ResidualSeries(t=tt[:-1], values=r)


# ---------------------------------------------------------------------------
# continuous dependence


@dataclass(frozen=True)
class DependenceReport:
    """Sharp-norm divergence ratio of two trajectories.

    ``ratio[i] = sharp(phi_a(t_i) - phi_b(t_i))^2 / sharp(phi_a(0) - phi_b(0))^2``,
    1 at t = 0 by construction.  ``rate`` and ``intercept`` are the least
    squares line through log ratio; ``envelope_intercept`` shifts that line
    up until it dominates every sample, giving a certified exponential
    envelope ratio <= exp(envelope_intercept + rate t).
    """

    t: np.ndarray
    ratio: np.ndarray
    rate: float
    intercept: float
    envelope_intercept: float

    def max_ratio(self) -> float:
        return float(self.ratio.max())


def continuous_dependence(traj_a, traj_b) -> DependenceReport:
    """Compare two trajectories sampled at the same times, in the sharp norm."""
    if len(traj_a) != len(traj_b) or len(traj_a) < 2:
        raise DiagnosticsError(
            f"trajectories must have equal length >= 2, got {len(traj_a)} and {len(traj_b)}"
        )
    g = traj_a[0].phi.grid
    g.require_same(traj_b[0].phi.grid)
    t = np.array([s.t for s in traj_a])
    tb = np.array([s.t for s in traj_b])
    if not np.allclose(t, tb, rtol=1e-12, atol=1e-12):
        raise DiagnosticsError("trajectories are sampled at different times")

    sharps = np.array([
        sharp_norm(ScalarField(g, a.phi.values - b.phi.values))
        for a, b in zip(traj_a, traj_b)
    ])
    if sharps[0] == 0.0:
        raise DiagnosticsError("identical initial data: zero denominator")
    ratio = (sharps / sharps[0]) ** 2

    logr = np.log(np.maximum(ratio, 1e-300))
    tau = t - t[0]
    a = np.vstack([tau, np.ones_like(tau)]).T
    coef, *_ = np.linalg.lstsq(a, logr, rcond=None)
    rate, intercept = float(coef[0]), float(coef[1])
    envelope = float(np.max(logr - rate * tau))
    return DependenceReport(t=t, ratio=ratio, rate=rate, intercept=intercept,
                            envelope_intercept=envelope)


# ---------------------------------------------------------------------------
# pattern metrics


@dataclass(frozen=True)
class PatternMetrics:
    bimodal_fraction: float
    peak_wavenumber: float


def pattern_metrics(f: ScalarField, bimodal_threshold: float = 0.8) -> PatternMetrics:
    """Phase-separation statistics of a field.

    ``bimodal_fraction``: fraction of cells with |f| above the threshold
    (0.8 by convention for wells at -1 and 1).  ``peak_wavenumber``: the
    argmax over nonzero annuli of the radially binned power spectrum,
    with annuli of width 2 pi / lx; a 2-d grid must be square for the
    binning to be isotropic.
    """
    g = f.grid
    if g.dim == 2 and abs(g.lx - g.ly) > 1e-12 * g.lx:
        raise DiagnosticsError("peak_wavenumber needs lx == ly in 2-d")
    frac = float(np.mean(np.abs(f.values) > bimodal_threshold))

    from .grid import _forward_values  # late import to keep module load light

    coef = _forward_values(g, f.values)
    power = g.parseval_weights * np.abs(coef) ** 2
    unit = 2 * np.pi / g.lx
    if g.dim == 1:
        radius = np.abs(g._axis_wavenumbers[0]) / unit
    else:
        kx = g._axis_wavenumbers[0].reshape(-1, 1) / unit
        ky = g._axis_wavenumbers[1].reshape(1, -1) / unit
        radius = np.hypot(kx, ky)
    annulus = np.rint(radius).astype(int)
    totals = np.bincount(annulus.ravel(), weights=power.ravel())
    if totals.size < 2:
        return PatternMetrics(bimodal_fraction=frac, peak_wavenumber=0.0)
    peak = int(np.argmax(totals[1:])) + 1
    return PatternMetrics(bimodal_fraction=frac, peak_wavenumber=peak * unit)


# ---------------------------------------------------------------------------
# dissipativity probe


@dataclass(frozen=True)
class ProbeEntry:
    amplitude: float
    reason: str
    tail_energy_max: float
    tail_energy_min: float
    tail_mean_abs_max: float
    entry_time: float


@dataclass(frozen=True)
class ProbeReport:
    """Tail statistics of several runs started at different amplitudes.

    ``band`` is (min, max) of the pooled tail energies; ``entry_time`` per
    run is the first recorded time its energy is inside the band (capped
    above), evidence for an absorbing set.
    """

    entries: tuple
    band: tuple

    def summary_table(self) -> str:
        lines = [
            f"{'amplitude':>10} {'tail E max':>13} {'tail |mean|':>12} "
            f"{'entry t':>9}  reason",
            "-" * 60,
        ]
        for e in self.entries:
            lines.append(
                f"{e.amplitude:>10.4g} {e.tail_energy_max:>13.6g} "
                f"{e.tail_mean_abs_max:>12.6g} {e.entry_time:>9.4g}  {e.reason}"
            )
        lines.append(f"common band: [{self.band[0]:.6g}, {self.band[1]:.6g}]")
        return "\n".join(lines)


def dissipativity_probe(initial_amplitudes, model, kernel, potential, config,
                        mean: float = 0.0, seed: int | None = None) -> ProbeReport:
    """Run one trajectory per amplitude and compare where they settle.

    Each run starts from seeded uniform noise of the given amplitude
    around ``mean`` and is recorded at the config cadence; the tail is the
    final 20% of records.  A diverged run is an error.
    """
    from .stepper import State, run, spinodal_initial

    amps = [float(a) for a in initial_amplitudes]
    if len(amps) != len(set(amps)):
        raise DiagnosticsError(f"amplitudes must be distinct, got {amps}")
    if seed is None:
        seed = config.seed

    collected = []
    for amp in amps:
        phi0 = spinodal_initial(kernel.grid, amp, mean=mean, seed=seed)
        series = TimeSeries()
        result = run(State(0.0, phi0), model, kernel, potential, config,
                     sink=series.sink)
        if result.reason == "diverged":
            raise DiagnosticsError(
                f"run from amplitude {amp} diverged after {result.steps} steps"
            )
        collected.append((amp, result, series))

    tails = []
    for amp, result, series in collected:
        t = series.column("t")
        cut = t[0] + 0.8 * (t[-1] - t[0])
        tails.append(series.column("energy")[t >= cut])
    band = (min(float(tl.min()) for tl in tails),
            max(float(tl.max()) for tl in tails))

    entries = []
    for (amp, result, series), tail in zip(collected, tails):
        t = series.column("t")
        en = series.column("energy")
        cut = t[0] + 0.8 * (t[-1] - t[0])
        inside = np.flatnonzero(en <= band[1] + 1e-9 * max(1.0, abs(band[1])))
        entry = float(t[inside[0]]) if inside.size else float("inf")
        mn = series.column("mean")[t >= cut]
        entries.append(ProbeEntry(
            amplitude=amp, reason=result.reason,
            tail_energy_max=float(tail.max()), tail_energy_min=float(tail.min()),
            tail_mean_abs_max=float(np.abs(mn).max()), entry_time=entry,
        ))
    return ProbeReport(entries=tuple(entries), band=band)
