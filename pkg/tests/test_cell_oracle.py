import math

import numpy as np
import pytest

from voidgap.cell_oracle import (BandStructure, branch_rank, compute_bands, default_eta_grid,
                                 envelope_exponent, fit_epsilon_cubed, solve_cell_problem)
from voidgap.cross_modes import ModeSet, analytic_cross_modes
from voidgap.dispersion import ordered_spectrum
from voidgap.errors import GeometryUnresolved, InsufficientPoints, VoidEscapesCell
from voidgap.gap_asymptotics import coupling_coefficients
from voidgap.geometry import CrossSection, VoidShape, make_cell
from voidgap.virtual_mass import analytic_virtual_mass

DISK = CrossSection.disk(0.5)
BALL = VoidShape.ball(1.0)


def neumann_cell(eps=0.25):
    return make_cell(DISK, BALL, (0, 0, 0.5), eps, "neumann")


def test_unperturbed_ground_state_is_zero():
    spectrum = solve_cell_problem(neumann_cell().unperturbed(), 0.0, 3, 1 / 10)
    assert spectrum.eigenvalues[0] == pytest.approx(0.0, abs=1e-9)
    assert np.all(np.diff(spectrum.eigenvalues) >= -1e-12)


def test_unperturbed_matches_lattice_with_second_order_error():
    ms = analytic_cross_modes(DISK, "neumann", 6)
    eta = 1.1
    exact = np.array([r[0] for r in ordered_spectrum(ms, eta, 4)])
    errs = []
    for h in (1 / 10, 1 / 20):
        spectrum = solve_cell_problem(neumann_cell().unperturbed(), eta, 4, h)
        errs.append(np.max(np.abs(spectrum.eigenvalues - exact)))
    assert errs[1] < 0.02 * exact.max()
    assert errs[1] < errs[0] / 2.5


def test_box_section_lattice():
    cell = make_cell(CrossSection.rectangle(1, 1), BALL, (0.5, 0.5, 0.5), 0.25).unperturbed()
    spectrum = solve_cell_problem(cell, math.pi / 2, 3, 1 / 12)
    # M = 0, pi^2, pi^2 on the unit square; the next axial harmonic is far above
    exact = [(math.pi / 2) ** 2] + [math.pi ** 2 + (math.pi / 2) ** 2] * 2
    np.testing.assert_allclose(spectrum.eigenvalues, exact, rtol=0.02)


def test_residuals_within_tolerance():
    spectrum = solve_cell_problem(neumann_cell(), 2.0, 3, 1 / 16)
    assert spectrum.n_unknowns > 2500
    assert np.all(spectrum.residuals <= 1e-8 * np.maximum(1.0, spectrum.eigenvalues))


def test_reflection_symmetry_for_centred_ball():
    a = solve_cell_problem(neumann_cell(), 1.0, 3, 1 / 10).eigenvalues
    b = solve_cell_problem(neumann_cell(), 2 * math.pi - 1.0, 3, 1 / 10).eigenvalues
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9)


def test_void_lowers_neumann_crossing_branch():
    base = solve_cell_problem(neumann_cell().unperturbed(), math.pi, 2, 1 / 10).eigenvalues
    pert = solve_cell_problem(neumann_cell(), math.pi, 2, 1 / 10).eigenvalues
    # F0 - |F1| < 0 < F0 + |F1| for a ball: the double value splits
    assert pert[0] < base[0] and pert[1] > base[1]


def test_unperturbed_bands_touch_at_crossing():
    bands = compute_bands(neumann_cell().unperturbed(), default_eta_grid(16), 2, 1 / 10)
    assert bands.gap_after(1) is None
    seg = bands.segments
    assert seg[0, 1] == pytest.approx(seg[1, 0], rel=1e-9)


def test_band_structure_gap_bookkeeping():
    vals = np.array([[0.0, 5.0, 6.0], [2.0, 4.0, 9.0], [3.0, 7.0, 8.0]])
    bs = BandStructure(0.1, np.zeros(3), vals, 0.1)
    np.testing.assert_allclose(bs.segments, [[0, 3], [4, 7], [6, 9]])
    assert bs.gaps == [(1, 3.0, 4.0)]
    assert bs.gap_after(2) is None


def test_threaded_bands_equal_serial():
    etas = default_eta_grid(16)
    serial = compute_bands(neumann_cell(), etas, 2, 1 / 10, threads=1)
    parallel = compute_bands(neumann_cell(), etas, 2, 1 / 10, threads=4)
    np.testing.assert_array_equal(serial.values, parallel.values)


def test_branch_rank():
    ms = ModeSet.from_eigenvalues([0.0, 13.56], "neumann")
    assert branch_rank(ms, math.pi, "-") == 1
    assert branch_rank(ms, math.pi, "+") == 2
    assert branch_rank(ms, math.pi / 2, "+") == 1
    assert branch_rank(ms, 3 * math.pi / 2, "-") == 1


def test_error_paths():
    with pytest.raises(GeometryUnresolved):
        solve_cell_problem(neumann_cell(0.05), 0.0, 2, 1 / 16)
    with pytest.raises(VoidEscapesCell):
        solve_cell_problem(neumann_cell(0.45), 0.0, 2, 1 / 16)
    with pytest.raises(InsufficientPoints):
        compute_bands(neumann_cell(), default_eta_grid(8), 2, 1 / 10)
    with pytest.raises(InsufficientPoints):
        fit_epsilon_cubed(neumann_cell(), [0.2, 0.25, 0.3], h=1 / 10)
    with pytest.raises(ValueError):
        solve_cell_problem(neumann_cell(), 0.0, 11, 1 / 10)


def test_coarse_fit_has_right_signs():
    ms = ModeSet.from_eigenvalues(analytic_cross_modes(DISK, "neumann", 4).eigenvalues, "neumann")
    eps = [0.2, 0.22, 0.25, 0.28]
    lower = fit_epsilon_cubed(neumann_cell(), eps, math.pi, "-", 1 / 12, mode_set=ms,
                              extrapolate=False)
    upper = fit_epsilon_cubed(neumann_cell(), eps, math.pi, "+", 1 / 12, mode_set=ms,
                              extrapolate=False)
    assert lower.slope < 0 < upper.slope
    assert lower.k == 1 and upper.k == 2
    assert lower.c0_estimate() >= 0


def test_envelope_exponent_coarse():
    exponent, devs = envelope_exponent(neumann_cell(), [0.2, 0.24, 0.28], math.pi / 2, 1, 1 / 12,
                                       extrapolate=False)
    assert np.all(devs != 0)
    assert 2.0 < exponent < 4.0


@pytest.mark.slow
def test_mixed_problem_slopes_follow_volume_weighted_formula():
    """Cell solver against the mixed-problem coefficients on the unit square."""
    square = CrossSection.rectangle(1, 1)
    cell = make_cell(square, BALL, (0.5, 0.5, 0.5), 0.1, "mixed")
    ms = analytic_cross_modes(square, "dirichlet", 4)
    cc = coupling_coefficients("mixed", ms, analytic_virtual_mass(BALL), BALL, (0.5, 0.5, 0.5),
                               square)
    upper_pred = cc.f0 + cc.abs_f1
    # alternative reading in which M1 enters the monopole term without the void volume
    v2 = ms.evaluate(1, (0.5, 0.5))[0] ** 2
    vol, q33 = BALL.volume, cc.q[2, 2]
    alt_f0 = (cc.m1 + math.pi ** 2 * (q33 + vol)) * v2
    alt_f1 = (cc.m1 - math.pi ** 2 * (q33 - vol)) * v2
    alternative = alt_f0 + abs(alt_f1)
    assert alternative == pytest.approx(488.6, abs=0.1)
    fit = fit_epsilon_cubed(cell, [0.075, 0.1, 0.125, 0.15], math.pi, "+", 1 / 24, mode_set=ms)
    assert upper_pred == pytest.approx(992.2, rel=1e-3)
    assert abs(fit.slope - upper_pred) < abs(fit.slope - alternative)
    assert fit.slope == pytest.approx(upper_pred, rel=0.2)
