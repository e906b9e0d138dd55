"""Structural hypotheses and the resulting time-step limits.

The well-posedness theory asks for a handful of pointwise conditions
linking the kernel mass to the potential: the checker samples them and
reports margins and constants.  A kernel weaker than the potential's
concavity breaks the convexity condition, and the stepper refuses to run
in that regime.  The same report feeds the stabilization bound S_min and
the explicit-term time step caps.
"""

import numpy as np

from nlch import (ModelSpec, Potential, StepperError, build_kernel,
                  check_hypotheses, make_grid, make_velocity,
                  spinodal_initial, stability_limits, run, SimConfig, State)

grid = make_grid(2, 64, 64, lx=2 * np.pi, ly=2 * np.pi)
pot = Potential.quartic()

kernel = build_kernel("gaussian", 0.4, 1.25, grid)
print(check_hypotheses(kernel, pot).summary_table())

# amplitude 0.5 gives a = 0.5 < 1 = max concavity of the quartic,
# so the convexity condition fails with a negative margin
weak = build_kernel("gaussian", 0.4, 0.5, grid)
report = check_hypotheses(weak, pot)
print("\nweak kernel: H2 holds =", report["H2"].holds,
      " margin = %.3f" % report["H2"].margin)

# the stepper gates on that report
try:
    run(State(0.0, spinodal_initial(grid, 0.05)), ModelSpec.cho(0.0, 0.0),
        weak, pot, SimConfig(dt=1e-3, t_end=1e-2))
except StepperError as exc:
    print("stepper refused:", exc)

# stability limits for a transported, reverting model; the reaction is
# folded into the implicit solve, so only transport caps the step
model = ModelSpec.cho(1.0, 0.0, velocity=make_velocity(grid, "shear", 2.0))
limits = stability_limits(model, kernel, pot, SimConfig(dt=1e-3, t_end=1.0))
print("\nS_min          = %.4f" % limits.s_min)
print("advective cap  =", limits.dt_advective)
print("reaction cap   =", limits.dt_reaction)
print("max speed      = %.4f" % limits.max_speed)
