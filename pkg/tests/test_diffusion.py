import numpy as np
import pytest

from rtelab.diffusion import (SingularSystem, averaged_albedo, diffusion_coefficient, dtn_discrepancy,
                              fick_current, limit_table, normal_derivative, solve_diffusion)
from rtelab.grid import AngularGrid, build_grid
from rtelab.media import MediumField, ScaledMedium, bump, constant
from rtelab.transport import BoundaryFlux, solve_transport

TOL = 1e-9
UNIT = MediumField(constant(1.0), name="unit")


@pytest.mark.parametrize("n", [4, 8, 24, 36])
def test_diffusion_coefficient(n):
    ang = AngularGrid(n)
    direct = sum(ang.weights[j] * np.cos(ang.angles[j]) ** 2 for j in range(n))
    assert diffusion_coefficient(ang) == pytest.approx(0.5, abs=1e-12)
    assert diffusion_coefficient(ang) == pytest.approx(direct, abs=1e-14)


def test_constant_data_is_harmonic(grid24):
    sol = solve_diffusion(grid24, MediumField(bump()), lambda x, y: np.ones_like(x), 0.5)
    assert np.abs(sol.rho - 1.0).max() < 1e-10


@pytest.mark.parametrize("s", [1.0, 2.5])
def test_linear_data_exact(grid24, s):
    sol = solve_diffusion(grid24, MediumField(constant(s)), lambda x, y: x, 0.5)
    xc, _ = grid24.space.centers()
    assert np.abs(sol.rho - xc).max() < 1e-8
    assert np.allclose(normal_derivative(grid24, sol), grid24.facet_normal[:, 0], atol=1e-8)


def test_manufactured_second_order():
    L = 0.6
    errs = []
    for n in (12, 24, 48):
        g = build_grid(n, n, 4)
        xc, yc = g.space.centers()
        exact = np.sin(np.pi * xc / L) * np.sin(np.pi * yc / L)
        src = 0.5 * 2 * (np.pi / L) ** 2 * exact
        sol = solve_diffusion(g, UNIT, lambda x, y: np.zeros_like(x), 0.5, source=src)
        errs.append(np.abs(sol.rho - exact).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_maximum_principle(grid24):
    g = lambda x, y: np.sin(7 * x) * np.cos(5 * y)
    sol = solve_diffusion(grid24, MediumField(bump(2.0)), g, 0.5)
    assert sol.rho.min() >= sol.boundary.min() - 1e-10
    assert sol.rho.max() <= sol.boundary.max() + 1e-10


def test_singular_medium_rejected(grid6):
    with pytest.raises(SingularSystem):
        solve_diffusion(grid6, MediumField(constant(0.0)), lambda x, y: x, 0.5)


def test_averaged_albedo_trivial(grid6):
    for value, kn in ((1.0, 0.5), (0.0, 1.0)):
        inflow = BoundaryFlux.constant(grid6, value)
        f = solve_transport(grid6, ScaledMedium(UNIT, kn), inflow, TOL)
        assert np.abs(averaged_albedo(grid6, f, inflow)).max() < 1e-12


def test_fick_current_of_linear_data(grid24):
    sol = solve_diffusion(grid24, UNIT, lambda x, y: x, 0.5)
    assert np.allclose(fick_current(grid24, UNIT, sol), -0.5 * grid24.facet_normal[:, 0], atol=1e-8)


def test_constant_data_gives_zero_discrepancy(grid6):
    rows = limit_table(grid6, UNIT, [1.0, 0.5, 0.25], lambda x, y: np.ones_like(x), TOL)
    for r in rows:
        assert r.err_linf <= 10 * TOL
        assert r.dtn_disc <= 10 * TOL


def test_shift_invariance():
    g = build_grid(8, 8, 8)
    a = limit_table(g, UNIT, [0.5, 0.25], lambda x, y: x, 1e-12)
    b = limit_table(g, UNIT, [0.5, 0.25], lambda x, y: x + 3.0, 1e-12)
    for ra, rb in zip(a, b):
        assert ra.err_linf == pytest.approx(rb.err_linf, abs=1e-10)


@pytest.mark.slow
@pytest.mark.parametrize("medium", [MediumField(bump(), name="bump"),
                                    MediumField(constant(1.0), constant(1.0), name="absorbing")])
def test_limit_decreasing_variable_media(grid24, medium):
    rows = limit_table(grid24, medium, [0.5, 0.25, 0.125], lambda x, y: x, TOL)
    errs = [r.err_linf for r in rows]
    dtn = [r.dtn_disc for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert dtn[0] > dtn[1] > dtn[2]
    assert np.all(np.isfinite(dtn))


def test_dtn_discrepancy_single_value(grid6):
    v = dtn_discrepancy(grid6, UNIT, 0.5, lambda x, y: x, TOL)
    assert v == limit_table(grid6, UNIT, [0.5], lambda x, y: x, TOL)[0].dtn_disc
