"""Scaled stationary RTE on the grid: upwind sweeps, source iteration and a direct oracle."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from ._sweep import sweep_batch
from .grid import BoundarySet, PhaseSpaceGrid
from .media import ScaledMedium

log = logging.getLogger(__name__)

SCHEME_TAG = "upwind1-sourceiter"
DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITERS = 50000


class NonConvergence(RuntimeError):
    def __init__(self, message, iterations=0, residual=float("nan"), columns=()):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.columns = tuple(columns)


@dataclass(frozen=True, eq=False)
class BoundaryFlux:
    """Values on the inflow (Gamma_-) or outflow (Gamma_+) list of a grid."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    outgoing: bool = False

    def __post_init__(self):
        if len(self.values) != len(self.index_set):
            raise ValueError(f"expected {len(self.index_set)} boundary values, got {len(self.values)}")

    @property
    def index_set(self) -> BoundarySet:
        return self.grid.outflow if self.outgoing else self.grid.inflow

    def l1(self) -> float:
        return float(np.abs(self.values) @ self.index_set.weight)

    def total(self) -> float:
        return float(self.values @ self.index_set.weight)

    @classmethod
    def constant(cls, grid, value: float) -> "BoundaryFlux":
        return cls(grid, np.full(len(grid.inflow), float(value)))

    @classmethod
    def indicator(cls, grid, position: int) -> "BoundaryFlux":
        v = np.zeros(len(grid.inflow))
        v[position] = 1.0
        return cls(grid, v)

    @classmethod
    def from_function(cls, grid, g) -> "BoundaryFlux":
        """Ordinate-independent inflow g(x, y) evaluated at facet midpoints."""
        mids = grid.facet_mid[grid.inflow.facet]
        return cls(grid, np.asarray(g(mids[:, 0], mids[:, 1]), dtype=float))


@dataclass(frozen=True)
class IterationReport:
    iterations: int
    residual: float
    converged: bool = True


@dataclass(frozen=True, eq=False)
class KineticSolution:
    grid: PhaseSpaceGrid
    medium: ScaledMedium
    density: np.ndarray  # angular average <f>, (nx, ny)
    outflow: BoundaryFlux
    report: IterationReport
    psi: np.ndarray | None = field(default=None, repr=False)  # (ntheta, nx, ny)


class Sweeper:
    """Precomputed sweep data for one (grid, medium) pair."""

    def __init__(self, grid: PhaseSpaceGrid, medium: ScaledMedium, total=None, scattering=None):
        self.grid = grid
        self.medium = medium
        sig_t, k = medium.cell_coefficients(grid.space)
        self.sigma_t = np.ascontiguousarray(sig_t if total is None else total, dtype=float)
        self.scattering = np.ascontiguousarray(k if scattering is None else scattering, dtype=float)
        maps = grid.sweep_maps()
        self.xin, self.yin, self.xout, self.yout = maps["xin"], maps["yin"], maps["xout"], maps["yout"]
        ang = grid.angular
        self._cos, self._sin, self._w = ang.cos, ang.sin, ang.weights

    def sweep(self, q: np.ndarray, inflow: np.ndarray, store_psi: bool = False):
        """Batched sweep. q: (nrhs, nx, ny); inflow: (nrhs, n_in).

        Returns (density (nrhs, nx, ny), outflow trace (nrhs, n_out), psi or None).
        """
        g = self.grid
        q = np.ascontiguousarray(q, dtype=float)
        inflow = np.asarray(inflow, dtype=float)
        nrhs = q.shape[0]
        bx = np.ascontiguousarray(inflow[:, self.xin])
        by = np.ascontiguousarray(inflow[:, self.yin])
        phi = np.empty((nrhs, g.nx, g.ny))
        outx = np.empty((nrhs, g.ntheta, g.ny))
        outy = np.empty((nrhs, g.ntheta, g.nx))
        psi = np.empty((nrhs, g.ntheta, g.nx, g.ny) if store_psi else (1, 1, 1, 1))
        sweep_batch(self._cos, self._sin, self._w, g.space.dx, g.space.dy, self.sigma_t,
                    q, bx, by, phi, outx, outy, psi, store_psi)
        trace = np.empty((nrhs, len(g.outflow)))
        trace[:, self.xout] = outx
        trace[:, self.yout] = outy
        return phi, trace, (psi if store_psi else None)

    def initial_guess(self, inflow: np.ndarray) -> np.ndarray:
        """Flux-weighted mean inflow per column, as a constant density.

        Any start converges to the same fixed point; this one makes constant
        inflow in a conservative medium an exact equilibrium after one sweep.
        """
        w = self.grid.inflow.weight
        mean = inflow @ w / w.sum()
        return np.broadcast_to(mean[:, None, None], (len(mean), self.grid.nx, self.grid.ny)).copy()

    def source_iteration(self, inflow: np.ndarray, tol: float = DEFAULT_TOL,
                         max_iters: int = DEFAULT_MAX_ITERS, source=None):
        """Solve all columns of ``inflow`` (nrhs, n_in) by source iteration.

        Each column stops independently once the max-cell change of its density
        is <= tol times the column's flux-weighted mean |inflow| (1 for zero
        inflow), so results do not depend on how columns are batched and an
        indicator column is held to the same relative accuracy as unit data.
        ``resid`` is reported in the same relative units.
        ``source`` is an optional fixed isotropic volume source (nrhs, nx, ny).
        Returns (density, trace, iterations, residuals).
        """
        inflow = np.atleast_2d(np.asarray(inflow, dtype=float))
        nrhs = inflow.shape[0]
        phi = self.initial_guess(inflow) if source is None else np.zeros((nrhs, self.grid.nx, self.grid.ny))
        trace = np.zeros((nrhs, len(self.grid.outflow)))
        iters = np.zeros(nrhs, dtype=np.int64)
        resid = np.full(nrhs, np.inf)
        w = self.grid.inflow.weight
        scale = np.abs(inflow) @ w / w.sum()
        scale[scale == 0] = 1.0
        active = np.arange(nrhs)
        k = self.scattering
        for it in range(1, max_iters + 1):
            q = k[None] * phi[active]
            if source is not None:
                q = q + source[active]
            new_phi, new_trace, _ = self.sweep(q, inflow[active])
            diff = np.abs(new_phi - phi[active]).reshape(len(active), -1).max(axis=1) / scale[active]
            phi[active] = new_phi
            trace[active] = new_trace
            iters[active] = it
            resid[active] = diff
            active = active[diff > tol]
            if len(active) == 0:
                break
        return phi, trace, iters, resid


def sweep(grid: PhaseSpaceGrid, medium: ScaledMedium, q, inflow: BoundaryFlux) -> KineticSolution:
    """One transport sweep with a frozen isotropic source q (nx, ny)."""
    sw = Sweeper(grid, medium)
    q = np.broadcast_to(np.asarray(q, dtype=float), (grid.nx, grid.ny))[None]
    phi, trace, psi = sw.sweep(q, inflow.values[None], store_psi=True)
    return KineticSolution(grid, medium, phi[0], BoundaryFlux(grid, trace[0], outgoing=True),
                           IterationReport(1, 0.0), psi[0])


def solve_transport(grid: PhaseSpaceGrid, medium: ScaledMedium, inflow: BoundaryFlux,
                    tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> KineticSolution:
    """Source iteration f^{m+1} = sweep(k <f^m>, inflow) until the max change of <f> is <= tol.

    The tolerance is relative to the flux-weighted mean |inflow|.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    sw = Sweeper(grid, medium)
    phi, trace, iters, resid = sw.source_iteration(inflow.values[None], tol, max_iters)
    if resid[0] > tol:
        raise NonConvergence(
            f"source iteration stalled after {iters[0]} iterations, residual {resid[0]:.3e} > tol {tol:g}",
            int(iters[0]), float(resid[0]))
    # one more sweep with the converged density recovers the angular flux
    _, _, psi = sw.sweep(sw.scattering[None] * phi, inflow.values[None], store_psi=True)
    return KineticSolution(grid, medium, phi[0], BoundaryFlux(grid, trace[0], outgoing=True),
                           IterationReport(int(iters[0]), float(resid[0])), psi[0])


# -- direct oracle ------------------------------------------------------------

def assemble_system(grid: PhaseSpaceGrid, medium: ScaledMedium):
    """Sparse matrix of the full discrete transport system and its inflow coupling.

    Unknowns are f[j, ix, iy] flattened in C order. Returns (A, B, T) with
    A f = B @ inflow and outflow trace = T @ f.
    """
    nt, nx, ny = grid.shape
    dx, dy = grid.space.dx, grid.space.dy
    sig_t, k = medium.cell_coefficients(grid.space)
    w = grid.angular.weights
    n = nt * nx * ny

    def idx(j, ix, iy):
        return (j * nx + ix) * ny + iy

    rows, cols, vals = [], [], []
    brow, bcol, bval = [], [], []
    trow, tcol = [], []
    for j, (c, s) in enumerate(grid.angular.directions()):
        a, b = abs(c) / dx, abs(s) / dy
        sx, sy = (1 if c > 0 else -1), (1 if s > 0 else -1)
        for ix in range(nx):
            for iy in range(ny):
                p = idx(j, ix, iy)
                rows.append(p); cols.append(p); vals.append(a + b + sig_t[ix, iy])
                for jj in range(nt):
                    rows.append(p); cols.append(idx(jj, ix, iy)); vals.append(-k[ix, iy] * w[jj])
                ux = ix - sx
                if 0 <= ux < nx:
                    rows.append(p); cols.append(idx(j, ux, iy)); vals.append(-a)
                else:
                    side = 0 if c > 0 else 1
                    brow.append(p); bcol.append(grid.in_lookup[grid.facet_id(side, iy), j]); bval.append(a)
                uy = iy - sy
                if 0 <= uy < ny:
                    rows.append(p); cols.append(idx(j, ix, uy)); vals.append(-b)
                else:
                    side = 2 if s > 0 else 3
                    brow.append(p); bcol.append(grid.in_lookup[grid.facet_id(side, ix), j]); bval.append(b)
    for q, (f, j) in enumerate(zip(grid.outflow.facet, grid.outflow.ordinate)):
        ix, iy = grid.facet_cell_ij(f)
        trow.append(q); tcol.append(idx(j, int(ix), int(iy)))
    A = sps.csc_matrix((vals, (rows, cols)), shape=(n, n))
    B = sps.csr_matrix((bval, (brow, bcol)), shape=(n, len(grid.inflow)))
    T = sps.csr_matrix((np.ones(len(trow)), (trow, tcol)), shape=(len(grid.outflow), n))
    return A, B, T


def direct_solve(grid: PhaseSpaceGrid, medium: ScaledMedium, inflow: BoundaryFlux) -> KineticSolution:
    """Sparse LU solve of the assembled system; the fixed point source iteration converges to."""
    A, B, T = assemble_system(grid, medium)
    f = spla.spsolve(A, B @ inflow.values)
    psi = f.reshape(grid.shape)
    density = np.einsum("j,jxy->xy", grid.angular.weights, psi)
    return KineticSolution(grid, medium, density, BoundaryFlux(grid, T @ f, outgoing=True),
                           IterationReport(0, 0.0), psi)
