"""Continuous dependence on the initial datum, measured in the sharp norm.

Two runs start 1e-6 apart and the squared sharp-norm distance between
them is tracked against time.  The theory promises at most exponential
amplification, so the log of the ratio R(t) should sit under a straight
line.  The report fits that line and shifts it up into a certified
envelope; here the growth is mild and the ratio stays within an order of
magnitude over a unit horizon.
"""

import numpy as np

from nlch import (ModelSpec, Potential, ScalarField, SimConfig, State,
                  StateTrail, build_kernel, continuous_dependence,
                  make_grid, run, spinodal_initial)

grid = make_grid(2, 64, 64, lx=2 * np.pi, ly=2 * np.pi)
kernel = build_kernel("gaussian", 0.4, 1.25, grid)
pot = Potential.quartic()
model = ModelSpec.cho(1.0, 0.0)

phi_a = spinodal_initial(grid, 0.05, mean=0.0, seed=0)
delta = 1e-6 * np.random.default_rng(100).uniform(-1, 1, grid.shape)
phi_b = ScalarField(grid, phi_a.values + delta)

config = SimConfig(dt=1e-3, t_end=1.0, cadence=50)
trails = []
for phi in (phi_a, phi_b):
    trail = StateTrail()
    run(State(0.0, phi), model, kernel, pot, config, sink=trail.sink)
    trails.append(trail)

report = continuous_dependence(trails[0], trails[1])
print("   t      R(t)      envelope")
for t, r in zip(report.t, report.ratio):
    env = np.exp(report.envelope_intercept + report.rate * t)
    print("%5.2f  %8.4f  %10.4f" % (t, r, env))
print("\nfitted growth rate %.3f, max ratio %.3f"
      % (report.rate, report.max_ratio()))
