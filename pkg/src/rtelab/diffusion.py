"""Limiting elliptic problem and the diffusion-limit discrepancy checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .grid import BOTTOM, LEFT, RIGHT, TOP, AngularGrid, PhaseSpaceGrid
from .media import MediumField, ScaledMedium
from .transport import DEFAULT_MAX_ITERS, DEFAULT_TOL, BoundaryFlux, KineticSolution, solve_transport

RESIDUAL_TOL = 1e-10


class SingularSystem(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiffusionSolution:
    rho: np.ndarray  # (nx, ny) cell values
    boundary: np.ndarray  # Dirichlet data per facet, canonical facet order
    coefficient: float
    residual: float


def diffusion_coefficient(angular: AngularGrid) -> float:
    """Second angular moment sum_j w_j cos^2(theta_j)."""
    return float(angular.weights @ angular.cos**2)


def _facet_values(grid: PhaseSpaceGrid, g) -> np.ndarray:
    if callable(g):
        return np.asarray(g(grid.facet_mid[:, 0], grid.facet_mid[:, 1]), dtype=float) * np.ones(grid.nfacets)
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.nfacets,):
        raise ValueError(f"boundary data must have one value per facet ({grid.nfacets})")
    return g


def solve_diffusion(grid: PhaseSpaceGrid, medium: MediumField, g, coefficient: float,
                    source=None) -> DiffusionSolution:
    """Solve -C div(sigma_s^-1 grad rho) + sigma_a rho = source with rho = g on the boundary.

    Cell-centred five-point stencil; interior face coefficients are harmonic
    means of C/sigma_s, boundary faces use the cell coefficient over a half
    cell (Dirichlet ghost value 2g - rho).
    """
    sp = grid.space
    nx, ny, dx, dy = sp.nx, sp.ny, sp.dx, sp.dy
    sigma_s, sigma_a = medium.sample(sp)
    if np.any(sigma_s <= 0):
        raise SingularSystem("diffusion needs sigma_s > 0 everywhere")
    gb = _facet_values(grid, g)
    D = coefficient / sigma_s
    n = nx * ny
    idx = np.arange(n).reshape(nx, ny)
    diag = sigma_a.ravel().copy()
    rhs = np.zeros(n) if source is None else np.broadcast_to(np.asarray(source, float), (nx, ny)).ravel().copy()
    rows, cols, vals = [], [], []

    def couple(p, q, coef):
        rows.extend([p, p]); cols.extend([p, q]); vals.extend([coef, -coef])

    # x faces
    hx = 2 * D[:-1, :] * D[1:, :] / (D[:-1, :] + D[1:, :]) / dx**2
    for ix in range(nx - 1):
        for iy in range(ny):
            c = hx[ix, iy]
            couple(idx[ix, iy], idx[ix + 1, iy], c)
            couple(idx[ix + 1, iy], idx[ix, iy], c)
    hy = 2 * D[:, :-1] * D[:, 1:] / (D[:, :-1] + D[:, 1:]) / dy**2
    for ix in range(nx):
        for iy in range(ny - 1):
            c = hy[ix, iy]
            couple(idx[ix, iy], idx[ix, iy + 1], c)
            couple(idx[ix, iy + 1], idx[ix, iy], c)
    for k in range(grid.nfacets):
        side = grid.facet_side[k]
        ix, iy = grid.facet_cell_ij(k)
        h = dx if side in (LEFT, RIGHT) else dy
        c = 2 * D[ix, iy] / h**2
        p = idx[ix, iy]
        diag[p] += c
        rhs[p] += c * gb[k]
    A = sps.csr_matrix((vals, (rows, cols)), shape=(n, n)) + sps.diags(diag)
    rho = spla.spsolve(A.tocsc(), rhs)
    res = float(np.max(np.abs(A @ rho - rhs)) / max(1.0, np.max(np.abs(rhs))))
    if res > RESIDUAL_TOL:
        raise SingularSystem(f"diffusion solve residual {res:.2e} exceeds {RESIDUAL_TOL:g}")
    return DiffusionSolution(rho.reshape(nx, ny), gb, coefficient, res)


def normal_derivative(grid: PhaseSpaceGrid, sol: DiffusionSolution) -> np.ndarray:
    """Outward normal derivative at each facet, one-sided and second order.

    Uses the boundary value and the first two cell centres inward.
    """
    nx, ny = grid.nx, grid.ny
    out = np.empty(grid.nfacets)
    rho = sol.rho
    for k in range(grid.nfacets):
        side, cell = grid.facet_side[k], grid.facet_cell[k]
        if side == LEFT:
            r1, r2, h = rho[0, cell], rho[1, cell], grid.space.dx
        elif side == RIGHT:
            r1, r2, h = rho[nx - 1, cell], rho[nx - 2, cell], grid.space.dx
        elif side == BOTTOM:
            r1, r2, h = rho[cell, 0], rho[cell, 1], grid.space.dy
        else:
            r1, r2, h = rho[cell, ny - 1], rho[cell, ny - 2], grid.space.dy
        inward = (9 * r1 - r2 - 8 * sol.boundary[k]) / (3 * h)
        out[k] = -inward
    return out


def averaged_albedo(grid: PhaseSpaceGrid, solution: KineticSolution, inflow: BoundaryFlux) -> np.ndarray:
    """Kn^-1 sum_j w_j (n.v_j) f(facet, v_j) per facet: the scaled net outward current."""
    ang = grid.angular
    cur = np.zeros(grid.nfacets)
    ndotv = grid.facet_normal @ ang.directions().T
    for bset, vals in ((grid.inflow, inflow.values), (grid.outflow, solution.outflow.values)):
        np.add.at(cur, bset.facet, ang.weights[bset.ordinate] * ndotv[bset.facet, bset.ordinate] * vals)
    return cur / solution.medium.kn


def fick_current(grid: PhaseSpaceGrid, medium: MediumField, sol: DiffusionSolution) -> np.ndarray:
    """-C sigma_s^-1 d_n rho at each facet, the limit of the averaged albedo."""
    sigma_s, _ = medium.sample(grid.space)
    ix, iy = grid.facet_cell_ij(np.arange(grid.nfacets))
    return -sol.coefficient / sigma_s[ix, iy] * normal_derivative(grid, sol)


@dataclass(frozen=True)
class LimitRow:
    kn: float
    err_linf: float
    dtn_disc: float
    iterations: int


def limit_table(grid: PhaseSpaceGrid, medium: MediumField, kn_list, g,
                tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> list[LimitRow]:
    """One transport solve per Kn with ordinate-independent inflow g, compared to the limit.

    err_linf = max |<f_Kn> - rho|; dtn_disc = max over facets of the averaged
    albedo minus the Fick current of rho. Both use the same C.
    """
    C = diffusion_coefficient(grid.angular)
    sol = solve_diffusion(grid, medium, g, C)
    fick = fick_current(grid, medium, sol)
    inflow = BoundaryFlux(grid, sol.boundary[grid.inflow.facet])
    rows = []
    for kn in kn_list:
        f = solve_transport(grid, ScaledMedium(medium, kn), inflow, tol, max_iters)
        err = float(np.max(np.abs(f.density - sol.rho)))
        dtn = float(np.max(np.abs(averaged_albedo(grid, f, inflow) - fick)))
        rows.append(LimitRow(float(kn), err, dtn, f.report.iterations))
    return rows


def limit_discrepancy(grid, medium, kn_list, g, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS) -> list[float]:
    return [r.err_linf for r in limit_table(grid, medium, kn_list, g, tol, max_iters)]


def dtn_discrepancy(grid, medium, kn, g, tol=DEFAULT_TOL, max_iters=DEFAULT_MAX_ITERS) -> float:
    return limit_table(grid, medium, [kn], g, tol, max_iters)[0].dtn_disc
