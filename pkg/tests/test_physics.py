"""Kernels, convolution, potentials, energy, and the hypothesis checker."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_convolve_neumann, brute_convolve_periodic, brute_energy
from nlch import (PhysicsError, Potential, ScalarField, build_kernel,
                  check_hypotheses, chemical_potential, constant_field,
                  convolve, energy, inner, inverse_laplacian_zero_mean,
                  make_grid, potential_eval, sharp_norm)


def grid2(n=16, bc="periodic", lx=2.0):
    return make_grid(2, n, n, lx=lx, ly=lx, bc=bc)


def random_field(grid, seed=0, amp=1.0):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, amp * rng.standard_normal(grid.shape))


# ---------------------------------------------------------------------------
# kernel construction


def test_kernel_mass_matches_amplitude():
    g = grid2(32)
    k = build_kernel("gaussian", 0.4, 1.25, g)
    assert abs(k.a_min - 1.25) <= 1e-12
    assert abs(k.a_max - 1.25) <= 1e-12
    assert abs(k.l1_norm - 1.25) <= 1e-10


def test_kernel_constant_under_neumann_too():
    g = grid2(16, "neumann")
    k = build_kernel("gaussian", 0.5, 2.0, g)
    assert abs(k.a_min - 2.0) <= 1e-10
    assert abs(k.a_max - 2.0) <= 1e-10


def test_mollifier_kernel_mass():
    g = grid2(32)
    k = build_kernel("mollifier", 0.8, 0.7, g)
    assert abs(k.a_min - 0.7) <= 1e-10


def test_kernel_symmetric():
    g = make_grid(1, 32)
    k = build_kernel("gaussian", 0.5, 1.0, g)
    flipped = np.roll(k.values[::-1], 1)
    assert np.abs(k.values - flipped).max() <= 1e-14


def test_kernel_spectrum_nonnegative_gaussian():
    for bc in ("periodic", "neumann"):
        g = grid2(16, bc)
        k = build_kernel("gaussian", 0.5, 1.0, g)
        assert k.spectrum.min() >= -1e-8 * k.spectrum.max()


def test_kernel_validation():
    g = grid2(16)  # h = 2 pi / 16
    with pytest.raises(PhysicsError):
        build_kernel("gaussian", 0.1, 1.0, g)  # under-resolved
    with pytest.raises(PhysicsError):
        build_kernel("mollifier", 4.0, 1.0, g)  # support exceeds half box
    with pytest.raises(PhysicsError):
        build_kernel("sinc", 0.5, 1.0, g)


# ---------------------------------------------------------------------------
# convolution


def test_convolve_oracle_1d_periodic():
    g = make_grid(1, 8, lx=2.0)
    k = build_kernel("gaussian", 0.6, 1.3, g)
    f = random_field(g, seed=1)
    fast = convolve(k, f)
    brute = brute_convolve_periodic(k, f)
    assert np.abs(fast.values - brute.values).max() <= 1e-12


def test_convolve_oracle_2d_periodic():
    g = make_grid(2, 8, 8, lx=2.0, ly=2.0)
    k = build_kernel("gaussian", 0.6, 1.3, g)
    f = random_field(g, seed=2)
    fast = convolve(k, f)
    brute = brute_convolve_periodic(k, f)
    assert np.abs(fast.values - brute.values).max() <= 1e-12


def test_convolve_oracle_1d_neumann():
    g = make_grid(1, 8, lx=2.0, bc="neumann")
    k = build_kernel("gaussian", 0.6, 1.3, g)
    f = random_field(g, seed=3)
    fast = convolve(k, f)
    brute = brute_convolve_neumann(k, f)
    assert np.abs(fast.values - brute.values).max() <= 1e-12


def test_convolve_oracle_2d_neumann():
    g = make_grid(2, 8, 8, lx=2.0, ly=2.0, bc="neumann")
    k = build_kernel("gaussian", 0.6, 1.3, g)
    f = random_field(g, seed=4)
    fast = convolve(k, f)
    brute = brute_convolve_neumann(k, f)
    assert np.abs(fast.values - brute.values).max() <= 1e-12


@pytest.mark.parametrize("bc", ["periodic", "neumann"])
def test_convolve_constants_in_constants_out(bc):
    g = grid2(16, bc)
    k = build_kernel("gaussian", 0.5, 1.25, g)
    out = convolve(k, constant_field(g, 2.0))
    assert np.abs(out.values - 2.0 * k.a.values).max() <= 1e-13
    assert np.abs(out.values - 2.0 * 1.25).max() <= 1e-7


def test_convolve_self_adjoint():
    for bc in ("periodic", "neumann"):
        g = grid2(16, bc)
        k = build_kernel("gaussian", 0.5, 1.0, g)
        f, w = random_field(g, 5), random_field(g, 6)
        assert np.isclose(inner(convolve(k, f), w), inner(f, convolve(k, w)),
                          rtol=1e-12, atol=1e-12)


def test_convolve_commutes_with_translation():
    g = make_grid(1, 32)
    k = build_kernel("gaussian", 0.5, 1.0, g)
    f = random_field(g, seed=7)
    rolled = ScalarField(g, np.roll(f.values, 5))
    a = convolve(k, rolled).values
    b = np.roll(convolve(k, f).values, 5)
    assert np.abs(a - b).max() <= 1e-12


# ---------------------------------------------------------------------------
# potential


def test_quartic_values():
    p = Potential.quartic()
    assert p.f(0.0) == 0.25
    assert p.f(1.0) == 0.0
    assert p.f(-1.0) == 0.0
    assert p.df(1.0) == 0.0
    assert p.d2f(0.0) == -1.0
    assert p.d2f(1.0) == 2.0
    assert p.wells == (-1.0, 1.0)
    assert p.well_midpoint == 0.0


def test_shifted_quartic_wells_are_critical():
    p = Potential.shifted_quartic(0.2, 1.8)
    assert abs(p.df(0.2)) <= 1e-14
    assert abs(p.df(1.8)) <= 1e-14
    assert p.f(0.2) <= 1e-14
    assert p.d2f(0.2) > 0 and p.d2f(1.8) > 0


def test_potential_derivatives_match_finite_differences():
    p = Potential.shifted_quartic(-0.5, 1.5, scale=0.4)
    s = np.linspace(-2.5, 2.5, 41)
    d = 1e-6
    fd1 = (p.f(s + d) - p.f(s - d)) / (2 * d)
    fd2 = (p.df(s + d) - p.df(s - d)) / (2 * d)
    assert np.abs(p.df(s) - fd1).max() <= 1e-6
    assert np.abs(p.d2f(s) - fd2).max() <= 1e-6


def test_potential_eval_orders():
    p = Potential.quartic()
    s = np.linspace(-2, 2, 9)
    assert np.array_equal(potential_eval(p, s, 0), p.f(s))
    assert np.array_equal(potential_eval(p, s, 1), p.df(s))
    assert np.array_equal(potential_eval(p, s, 2), p.d2f(s))
    with pytest.raises(PhysicsError):
        potential_eval(p, s, 3)


# ---------------------------------------------------------------------------
# energy and chemical potential


@pytest.mark.parametrize("bc", ["periodic", "neumann"])
def test_energy_brute_force_1d(bc):
    g = make_grid(1, 8, lx=2.0, bc=bc)
    k = build_kernel("gaussian", 0.6, 1.1, g)
    p = Potential.quartic()
    for seed in range(5):
        f = random_field(g, seed=seed)
        assert abs(energy(k, p, f) - brute_energy(k, p, f)) <= 1e-10


def test_energy_brute_force_2d():
    g = make_grid(2, 8, 8, lx=2.0, ly=2.0)
    k = build_kernel("gaussian", 0.6, 1.1, g)
    p = Potential.quartic()
    for seed in range(3):
        f = random_field(g, seed=seed)
        assert abs(energy(k, p, f) - brute_energy(k, p, f)) <= 1e-10


def test_energy_of_pure_phase_is_zero():
    g = grid2(16)
    k = build_kernel("gaussian", 0.5, 1.25, g)
    p = Potential.quartic()
    assert abs(energy(k, p, constant_field(g, 1.0))) <= 1e-12
    assert abs(energy(k, p, constant_field(g, -1.0))) <= 1e-12


def test_energy_interaction_part_nonnegative():
    # subtracting int F leaves 1/4 iint J(x-y) (f(x)-f(y))^2 >= 0
    g = grid2(16)
    k = build_kernel("gaussian", 0.5, 1.25, g)
    p = Potential.quartic()
    one = constant_field(g, 1.0)
    for seed in range(4):
        f = random_field(g, seed)
        interaction = energy(k, p, f) - inner(potential_eval(p, f, 0), one)
        assert interaction >= -1e-10


def test_chemical_potential_is_energy_gradient():
    g = grid2(16)
    k = build_kernel("gaussian", 0.5, 1.25, g)
    p = Potential.quartic()
    phi = random_field(g, seed=8, amp=0.5)
    rng = np.random.default_rng(9)
    mu = chemical_potential(k, p, phi)
    eps = 1e-5
    for _ in range(5):
        psi = ScalarField(g, rng.standard_normal(g.shape))
        plus = energy(k, p, ScalarField(g, phi.values + eps * psi.values))
        minus = energy(k, p, ScalarField(g, phi.values - eps * psi.values))
        directional = (plus - minus) / (2 * eps)
        pairing = inner(mu, psi)
        assert abs(directional - pairing) <= 1e-6 * max(1.0, abs(pairing))


def test_chemical_potential_local_identity():
    # mu = rho - J * phi with rho = a phi + F'(phi)
    g = grid2(16, "neumann")
    k = build_kernel("gaussian", 0.5, 1.25, g)
    p = Potential.quartic()
    phi = random_field(g, seed=10)
    mu = chemical_potential(k, p, phi)
    rho = chemical_potential_local_values(k, p, phi)
    rebuilt = rho - convolve(k, phi).values
    assert np.abs(mu.values - rebuilt).max() <= 1e-12


def chemical_potential_local_values(k, p, phi):
    from nlch import chemical_potential_local

    return chemical_potential_local(k, p, phi).values


def test_constant_chemical_potential_mean():
    # (mu, 1) = integral of a phi + F'(phi) - J*phi; with a constant the
    # convolution preserves means, so (mu, 1) = integral F'(phi).
    g = grid2(16)
    k = build_kernel("gaussian", 0.5, 1.25, g)
    p = Potential.quartic()
    phi = random_field(g, seed=11)
    mu = chemical_potential(k, p, phi)
    lhs = inner(mu, constant_field(g, 1.0))
    rhs = inner(ScalarField(g, p.df(phi.values)), constant_field(g, 1.0))
    assert np.isclose(lhs, rhs, rtol=1e-10, atol=1e-10)


# ---------------------------------------------------------------------------
# sharp norm


def test_sharp_norm_sine_oracle():
    g = make_grid(1, 64)
    x = g.axis_coordinates(0)
    for k_mode, amp in ((1, 2.0), (3, 0.7)):
        f = ScalarField(g, amp * np.sin(k_mode * x))
        expected = amp * np.sqrt(np.pi) / k_mode
        assert abs(sharp_norm(f) - expected) <= 1e-10


def test_sharp_norm_constant():
    g = grid2(8)
    assert abs(sharp_norm(constant_field(g, -0.75)) - 0.75) <= 1e-12
    assert sharp_norm(constant_field(g, 0.0)) == 0.0


def test_sharp_norm_inverse_laplacian_oracle():
    g = grid2(16)
    f = random_field(g, seed=12)
    dev = ScalarField(g, f.values - f.mean())
    direct = inner(dev, inverse_laplacian_zero_mean(dev)) + f.mean() ** 2
    assert abs(sharp_norm(f) - np.sqrt(direct)) <= 1e-10


# ---------------------------------------------------------------------------
# hypothesis checker


def default_kernel(amplitude=1.25):
    return build_kernel("gaussian", 0.4, amplitude, grid2(64))


def test_h2_margin_quartic():
    report = check_hypotheses(default_kernel(), Potential.quartic())
    assert report["H2"].holds
    assert abs(report["H2"].margin - 0.25) <= 1e-9
    assert report.required_ok()


def test_h2_fails_for_weak_kernel():
    report = check_hypotheses(default_kernel(0.5), Potential.quartic())
    assert not report["H2"].holds
    assert report["H2"].margin < 0
    assert not report.required_ok()


def test_h1_reports_kernel_mass():
    report = check_hypotheses(default_kernel(), Potential.quartic())
    assert report["H1"].holds
    assert abs(report["H1"].margin - 1.25) <= 1e-10


def test_h3_coercivity():
    report = check_hypotheses(default_kernel(), Potential.quartic())
    e = report["H3"]
    assert e.holds
    assert e.constants["c1"] > e.constants["half_l1"]
    # c2 makes the bound hold on the whole sampled range
    s = np.linspace(-3, 3, 2001)
    p = Potential.quartic()
    assert np.all(p.f(s) >= e.constants["c1"] * s**2 - e.constants["c2"] - 1e-9)


def test_h4_exists_for_quartic():
    report = check_hypotheses(default_kernel(), Potential.quartic())
    e = report["H4"]
    assert e.holds
    assert 1.0 < e.constants["p"] <= 2.0
    # the reported pair really bounds |F'|^p on the sampled range
    s = np.linspace(-3, 3, 2001)
    p = Potential.quartic()
    assert np.all(np.abs(p.df(s)) ** e.constants["p"]
                  <= e.constants["c4"] * (np.abs(p.f(s)) + 1.0) + 1e-9)


def test_h9_quartic_bare_potential():
    # with a == 0 and q = 1: F'' = 3 s^2 - 1 >= 3 |s|^2 - 1 exactly
    report = check_hypotheses(default_kernel(), Potential.quartic(), a_min=0.0)
    e = report["H9"]
    assert e.holds
    assert abs(e.constants["c9"] - 3.0) <= 1e-9
    assert abs(e.constants["c10"] - 1.0) <= 1e-12


def test_i8_lipschitz_constant():
    # analytic bound: |F'(s)-F'(r)| / ((1+s^2+r^2)|s-r|) peaks at
    # s = r = 3 on the sampled range with value 26/19
    report = check_hypotheses(default_kernel(), Potential.quartic())
    e = report["I8"]
    assert e.holds
    assert e.constants["c8"] <= 26.0 / 19.0 + 1e-9
    assert e.constants["c8"] >= 26.0 / 19.0 - 0.05


def test_check_hypotheses_validation():
    k = default_kernel()
    with pytest.raises(PhysicsError):
        check_hypotheses(k, Potential.quartic(), s_range=(2.0, -2.0))
    with pytest.raises(PhysicsError):
        check_hypotheses(k, Potential.quartic(), n_samples=10)


def test_summary_table_mentions_all_ids():
    table = check_hypotheses(default_kernel(), Potential.quartic()).summary_table()
    for name in ("H1", "H2", "H3", "H4", "H9", "I8"):
        assert name in table


@settings(max_examples=10, deadline=None)
@given(amplitude=st.floats(min_value=1.05, max_value=4.0))
def test_property_h2_margin_tracks_amplitude(amplitude):
    # constant a makes c0 = amplitude + min F'' = amplitude - 1 exactly
    g = grid2(16)
    k = build_kernel("gaussian", 0.5, amplitude, g)
    report = check_hypotheses(k, Potential.quartic())
    assert abs(report["H2"].margin - (amplitude - 1.0)) <= 1e-7 * amplitude
