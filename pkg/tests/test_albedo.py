import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rtelab.albedo import (AlbedoMatrix, assemble_ballistic, assemble_full, assemble_single_scattering,
                           ballistic_norm_oracle, diff_norm, operator_norm_l1, residual)
from rtelab.grid import build_grid
from rtelab.media import MediumField, ScaledMedium, bump, constant, make_paper_pair
from rtelab.raytrace import inflow_rays, straight_exit_map
from rtelab.transport import BoundaryFlux, NonConvergence, solve_transport

TOL = 1e-9


def medium(sigma_s=1.0, sigma_a=0.0, kn=1.0):
    return ScaledMedium(MediumField(constant(sigma_s), constant(sigma_a)), kn)


@pytest.fixture(scope="module")
def grid12():
    return build_grid(12, 12, 8)


def test_full_columns_are_indicator_solves(grid6):
    m = medium(1.0, 0.1, 0.5)
    M = assemble_full(grid6, m, TOL)
    for j in (0, 17, len(grid6.inflow) - 1):
        sol = solve_transport(grid6, m, BoundaryFlux.indicator(grid6, j), TOL)
        assert np.array_equal(M.matrix[:, j], sol.outflow.values)


def test_full_iterative_matches_direct(grid6):
    m = ScaledMedium(MediumField(bump()), 0.5)
    a = assemble_full(grid6, m, 1e-13)
    b = assemble_full(grid6, m, method="direct")
    assert np.abs(a.matrix - b.matrix).max() < 1e-10


def test_full_chunking_is_invisible(grid6):
    m = medium(kn=0.5)
    a = assemble_full(grid6, m, TOL)
    b = assemble_full(grid6, m, TOL, chunk=7)
    assert np.array_equal(a.matrix, b.matrix)


def test_pure_streaming_full_albedo(grid6):
    M = assemble_full(grid6, medium(0.0, 0.0), TOL)
    # each column delivers all of its mass along its own ordinate
    same = grid6.outflow.ordinate[:, None] == grid6.inflow.ordinate[None, :]
    assert np.all(M.matrix[~same] == 0)
    assert np.allclose(M.column_ratios(), 1.0, atol=1e-13)


@pytest.mark.parametrize("kn", [2.0, 0.5])
def test_full_conservation(grid12, kn):
    M = assemble_full(grid12, ScaledMedium(make_paper_pair(0.1, kn).perturbed.base, kn), TOL)
    assert np.abs(M.column_ratios() - 1.0).max() <= 10 * TOL
    assert operator_norm_l1(M) == pytest.approx(1.0, abs=10 * TOL)


def test_zero_contrast_pair_identical(grid6):
    pair = make_paper_pair(0.0, 0.5)
    a, b = assemble_full(grid6, pair.reference, TOL), assemble_full(grid6, pair.perturbed, TOL)
    assert np.abs(a.matrix - b.matrix).max() <= 1e-12
    assert diff_norm(a, b) <= 10 * TOL


def test_full_strict_raises_with_columns(grid6):
    with pytest.raises(NonConvergence) as err:
        assemble_full(grid6, medium(kn=0.1), TOL, max_iters=2)
    assert len(err.value.columns) > 0
    M = assemble_full(grid6, medium(kn=0.1), TOL, max_iters=2, strict=False)
    assert M.residuals.max() > TOL


def test_ballistic_no_attenuation(grid24):
    M = assemble_ballistic(grid24, medium(0.0, 0.0))
    exits = straight_exit_map(grid24)
    cols = np.arange(len(grid24.inflow))
    assert np.count_nonzero(M.matrix) == len(cols)
    # mass is carried unattenuated; entries are 1 wherever entry and exit weights agree
    assert np.allclose(M.column_ratios(), 1.0, rtol=1e-14)
    same = np.isclose(grid24.inflow.weight, grid24.outflow.weight[exits], rtol=1e-14)
    assert same.any()
    assert np.allclose(M.matrix[exits[same], cols[same]], 1.0, rtol=1e-14)


def test_ballistic_min_ray_entry(grid24):
    m = medium(1.0, 0.0, 1.0)
    M = assemble_ballistic(grid24, m)
    depth, length = inflow_rays(grid24)
    k = int(np.argmin(length))
    assert M.column_ratios()[k] == pytest.approx(np.exp(-length.min()), rel=1e-13)
    assert operator_norm_l1(M) == pytest.approx(np.exp(-length.min()), rel=1e-13)
    assert operator_norm_l1(M) == pytest.approx(ballistic_norm_oracle(grid24, m), rel=1e-14)


def test_ballistic_kn_halving_squares_attenuation(grid24):
    a = assemble_ballistic(grid24, medium(1.0, 0.0, 1.0)).column_ratios()
    b = assemble_ballistic(grid24, medium(1.0, 0.0, 0.5)).column_ratios()
    assert np.allclose(b, a**2, rtol=1e-12)


def _mean_gap(kind, kn, n):
    g = build_grid(n, n, 8)
    m = medium(1.0, 0.0, kn)
    ray = kind(g, m, "ray").column_ratios()
    swp = kind(g, m, "sweep").column_ratios()
    w = g.inflow.weight
    return (np.abs(ray - swp) @ w) / w.sum(), ray.max(), swp.max()


@pytest.mark.parametrize("kind, kn", [(assemble_ballistic, 1.0), (assemble_single_scattering, 2.0)])
def test_ray_and_sweep_variants_converge_together(kind, kn):
    coarse, _, _ = _mean_gap(kind, kn, 12)
    fine, ray_max, swp_max = _mean_gap(kind, kn, 24)
    # first-order upwind: the mean gap roughly halves under refinement
    assert fine < 0.6 * coarse
    assert abs(ray_max - swp_max) < 0.02 * ray_max


def test_single_scattering_zero_without_scattering(grid6):
    assert np.all(assemble_single_scattering(grid6, medium(0.0, 1.0)).matrix == 0)
    assert np.all(assemble_single_scattering(grid6, medium(0.0, 1.0), "sweep").matrix == 0)


@pytest.mark.parametrize("method", ["ray", "sweep"])
def test_single_scattering_large_kn_scaling(grid12, method):
    r = []
    for kn in (20.0, 40.0, 80.0):
        M = assemble_single_scattering(grid12, medium(1.0, 0.0, kn), method)
        assert np.all(M.matrix >= 0)
        r.append(operator_norm_l1(M) * kn)
    # kn * ||A2|| tends to a constant as attenuation vanishes
    assert abs(r[2] / r[1] - 1) < abs(r[1] / r[0] - 1) + 1e-12
    assert abs(r[2] / r[1] - 1) < 0.05


def test_remainder_ratio_at_kn8(grid12):
    m = medium(1.0, 0.0, 8.0)
    full = assemble_full(grid12, m, TOL)
    a1 = assemble_ballistic(grid12, m, "sweep")
    a2 = assemble_single_scattering(grid12, m, "sweep")
    ratio = operator_norm_l1(residual(full, a1, a2)) / operator_norm_l1(residual(full, a1))
    assert ratio <= 0.3


def test_norm_of_zero_matrix(grid6):
    M = AlbedoMatrix(np.zeros((len(grid6.outflow), len(grid6.inflow))), grid6.inflow.weight,
                     grid6.outflow.weight, "full")
    assert operator_norm_l1(M) == 0.0
    assert diff_norm(M, M) == 0.0


def test_difference_rejects_mismatch(grid6):
    M = assemble_ballistic(grid6, medium())
    other = M.with_weights(M.in_weight * 2, M.out_weight)
    with pytest.raises(ValueError):
        M - other


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_norm_attained_on_indicators(seed):
    r = np.random.default_rng(seed)
    g = build_grid(4, 4, 4)
    M = AlbedoMatrix(r.random((len(g.outflow), len(g.inflow))) * (r.random((len(g.outflow), len(g.inflow))) < 0.5),
                     g.inflow.weight, g.outflow.weight, "full")
    norm = operator_norm_l1(M)
    for _ in range(200):
        f = r.random(len(g.inflow)) * (r.random(len(g.inflow)) < r.random())
        if not f.any():
            continue
        ratio = (np.abs(M.apply(f)) @ g.outflow.weight) / (f @ g.inflow.weight)
        assert ratio <= norm + 1e-10
