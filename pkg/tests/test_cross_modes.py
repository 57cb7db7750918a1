import math

import numpy as np
import pytest
from scipy import special

from voidgap.cross_modes import analytic_cross_modes, eval_mode, solve_cross_modes
from voidgap.errors import PointOutsideDomain, ResolutionTooCoarse
from voidgap.geometry import CrossSection

# Bessel roots from scipy act as the independent oracle
J11_PRIME_SQ = special.jnp_zeros(1, 1)[0] ** 2      # 3.3899577...
J01_SQ = special.jn_zeros(0, 1)[0] ** 2             # 5.783185...


@pytest.fixture(scope="module")
def disk_dirichlet():
    return solve_cross_modes(CrossSection.disk(1.0), "dirichlet", 4, 1 / 40)


@pytest.fixture(scope="module")
def disk_neumann():
    return solve_cross_modes(CrossSection.disk(1.0), "neumann", 4, 1 / 40, extrapolate=True)


def test_frozen_bessel_values():
    assert J11_PRIME_SQ == pytest.approx(3.3899577, abs=1e-6)
    assert J01_SQ == pytest.approx(5.7831860, abs=1e-6)


def test_square_neumann_eigenvalues():
    ms = solve_cross_modes(CrossSection.rectangle(1, 1), "neumann", 4, 1 / 20, extrapolate=True)
    expected = [0.0, math.pi ** 2, math.pi ** 2, 2 * math.pi ** 2]
    assert ms.eigenvalues[0] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(ms.eigenvalues[1:], expected[1:], rtol=5e-3)


def test_disk_neumann_second_eigenvalue(disk_neumann):
    assert disk_neumann.eigenvalues[1] == pytest.approx(J11_PRIME_SQ, rel=5e-3)
    assert disk_neumann.error_estimate[1] < 5e-3 * J11_PRIME_SQ


def test_disk_dirichlet_first_mode(disk_dirichlet):
    assert disk_dirichlet.eigenvalues[0] == pytest.approx(J01_SQ, rel=5e-3)
    exact = analytic_cross_modes(CrossSection.disk(1.0), "dirichlet", 1)
    v_num, g_num = eval_mode(disk_dirichlet, 1, (0.0, 0.0))
    v_ex, _ = exact.evaluate(1, (0.0, 0.0))
    assert v_num == pytest.approx(v_ex, rel=5e-3)
    np.testing.assert_allclose(g_num, [0.0, 0.0], atol=1e-8)


def test_neumann_first_mode_is_constant(disk_neumann):
    # normalized against the discrete fluid area, which differs from pi by O(h^2)
    values = []
    for y in [(0.0, 0.0), (0.3, -0.4), (-0.7, 0.2)]:
        v, g = eval_mode(disk_neumann, 1, y)
        values.append(v)
        assert v == pytest.approx(math.pi ** -0.5, rel=1e-4)
        np.testing.assert_allclose(g, 0.0, atol=1e-8)
    assert np.ptp(values) < 1e-10


def test_orthonormal_modes(disk_dirichlet):
    np.testing.assert_allclose(disk_dirichlet.gram(), np.eye(4), atol=1e-7)


def test_first_dirichlet_mode_positive(disk_dirichlet):
    grid_values = disk_dirichlet.vectors[:, 0]
    assert np.all(grid_values > 0)


def test_dirichlet_normal_derivative_negative(disk_dirichlet):
    pts, nrm = CrossSection.disk(1.0).boundary_samples(24)
    for p, n in zip(0.97 * pts, nrm):
        _, g = eval_mode(disk_dirichlet, 1, p)
        assert g @ n < 0


def test_gradient_second_order_against_closed_form():
    cs = CrossSection.disk(1.0)
    exact = analytic_cross_modes(cs, "dirichlet", 1)
    y = (0.3, 0.2)
    _, g_ex = exact.evaluate(1, y)
    errs = []
    for h in (1 / 20, 1 / 40):
        ms = solve_cross_modes(cs, "dirichlet", 2, h)
        errs.append(np.linalg.norm(eval_mode(ms, 1, y)[1] - g_ex))
    assert errs[1] < errs[0] / 2.5


def test_scaling_law_dirichlet():
    small = solve_cross_modes(CrossSection.disk(0.5), "dirichlet", 2, 1 / 80)
    big = solve_cross_modes(CrossSection.disk(1.0), "dirichlet", 2, 1 / 40)
    assert small.eigenvalues[0] == pytest.approx(4 * big.eigenvalues[0], rel=1e-9)


def test_convergence_under_refinement():
    cs = CrossSection.disk(1.0)
    vals = [solve_cross_modes(cs, "neumann", 3, h).eigenvalues[1] for h in (1 / 10, 1 / 20, 1 / 40)]
    diffs = np.abs(np.diff(vals))
    assert diffs[1] < diffs[0]


def test_errors(disk_dirichlet):
    with pytest.raises(ResolutionTooCoarse):
        solve_cross_modes(CrossSection.disk(1.0), "neumann", 3, 0.5)
    with pytest.raises(PointOutsideDomain):
        eval_mode(disk_dirichlet, 1, (1.2, 0.0))
    with pytest.raises(ValueError):
        solve_cross_modes(CrossSection.disk(1.0), "neumann", 1, 0.05)


def test_polygon_cross_section_runs():
    tri = CrossSection.polygon([(0, 0), (1, 0), (0, 1)])
    ms = solve_cross_modes(tri, "dirichlet", 2, 1 / 40)
    # isosceles right triangle with legs 1: M1 = 5 pi^2
    assert ms.eigenvalues[0] == pytest.approx(5 * math.pi ** 2, rel=1e-2)


def test_analytic_rectangle_normalization():
    ms = analytic_cross_modes(CrossSection.rectangle(2.0, 1.0), "dirichlet", 3)
    xs = np.linspace(0, 2, 201)
    ys = np.linspace(0, 1, 101)
    vals = np.array([[ms.evaluate(1, (x, y))[0] for y in ys] for x in xs])
    from scipy.integrate import trapezoid
    norm = trapezoid(trapezoid(vals ** 2, ys, axis=1), xs)
    assert norm == pytest.approx(1.0, rel=1e-3)
