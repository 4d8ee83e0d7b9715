"""Discrete albedo operators and their induced L1(d xi) norms."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numba
import numpy as np
import scipy.sparse.linalg as spla

from .grid import PhaseSpaceGrid
from .media import ScaledMedium
from .raytrace import _exit_facet, _exit_time, _optical_depth, inflow_rays, straight_exit_map
from .transport import (DEFAULT_MAX_ITERS, DEFAULT_TOL, NonConvergence, Sweeper,
                        assemble_system)

log = logging.getLogger(__name__)

FULL, BALLISTIC, SINGLE, RESIDUAL, DIFFERENCE = "full", "ballistic", "single-scattering", "residual", "difference"


@dataclass(frozen=True, eq=False)
class AlbedoMatrix:
    """Dense map from inflow values (Gamma_-) to outflow values (Gamma_+).

    ``matrix[i, j]`` is the outflow value at outflow position i produced by a
    unit inflow value at inflow position j; the L1 masses are the values times
    the attached d xi weights.
    """

    matrix: np.ndarray
    in_weight: np.ndarray
    out_weight: np.ndarray
    kind: str
    medium: str = ""
    kn: float = float("nan")
    iterations: np.ndarray | None = field(default=None, repr=False)
    residuals: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self):
        return self.matrix.shape

    def column_ratios(self) -> np.ndarray:
        return (self.out_weight @ np.abs(self.matrix)) / self.in_weight

    def with_weights(self, in_weight: np.ndarray, out_weight: np.ndarray) -> "AlbedoMatrix":
        """Same operator, normed with other boundary weights (values are unchanged)."""
        return replace(self, in_weight=np.asarray(in_weight), out_weight=np.asarray(out_weight))

    def apply(self, inflow: np.ndarray) -> np.ndarray:
        return self.matrix @ inflow

    def _check(self, other: "AlbedoMatrix"):
        if (self.matrix.shape != other.matrix.shape
                or not np.array_equal(self.in_weight, other.in_weight)
                or not np.array_equal(self.out_weight, other.out_weight)):
            raise ValueError("albedo matrices live on different boundary index sets")

    def __sub__(self, other: "AlbedoMatrix") -> "AlbedoMatrix":
        self._check(other)
        return replace(self, matrix=self.matrix - other.matrix, kind=DIFFERENCE,
                       iterations=None, residuals=None)


def _wrap(grid, matrix, kind, medium: ScaledMedium, iterations=None, residuals=None):
    return AlbedoMatrix(matrix, grid.inflow.weight.copy(), grid.outflow.weight.copy(), kind,
                        medium.base.name, medium.kn, iterations, residuals)


def assemble_full(grid: PhaseSpaceGrid, medium: ScaledMedium, tol: float = DEFAULT_TOL,
                  max_iters: int = DEFAULT_MAX_ITERS, method: str = "iterative",
                  chunk: int = 2048, strict: bool = True) -> AlbedoMatrix:
    """Column j = outflow trace of the transport solve with the unit indicator at inflow j.

    ``method="iterative"`` runs source iteration on batches of indicator
    columns; ``method="direct"`` factors the full sparse system once.
    With ``strict`` a column that misses ``tol`` raises NonConvergence.
    """
    n_in = len(grid.inflow)
    if method == "direct":
        A, B, T = assemble_system(grid, medium)
        lu = spla.splu(A)
        f = lu.solve(B.toarray())
        return _wrap(grid, np.asarray(T @ f), FULL, medium, np.zeros(n_in, int), np.zeros(n_in))
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    sw = Sweeper(grid, medium)
    M = np.empty((len(grid.outflow), n_in))
    iters = np.empty(n_in, dtype=np.int64)
    resid = np.empty(n_in)
    for start in range(0, n_in, chunk):
        cols = np.arange(start, min(start + chunk, n_in))
        inflow = np.zeros((len(cols), n_in))
        inflow[np.arange(len(cols)), cols] = 1.0
        _, trace, it, res = sw.source_iteration(inflow, tol, max_iters)
        M[:, cols] = trace.T
        iters[cols], resid[cols] = it, res
    bad = np.nonzero(resid > tol)[0]
    if strict and len(bad):
        raise NonConvergence(
            f"{len(bad)} albedo columns did not converge (first {bad[:10].tolist()}), "
            f"max residual {resid.max():.3e} after {iters.max()} iterations",
            int(iters.max()), float(resid.max()), bad.tolist())
    return _wrap(grid, M, FULL, medium, iters, resid)


def assemble_ballistic(grid: PhaseSpaceGrid, medium: ScaledMedium, method: str = "ray") -> AlbedoMatrix:
    """Unscattered part of the albedo.

    ``method="ray"``: one exact ray per inflow position from its facet
    midpoint; the column carries the attenuated mass exp(-X sigma_Kn) to the
    exit position. ``method="sweep"``: the upwind scheme with scattering
    switched off, for cross-checking.
    """
    sig_t, _ = medium.cell_coefficients(grid.space)
    if method == "sweep":
        sw = Sweeper(grid, medium, scattering=np.zeros_like(sig_t))
        n_in = len(grid.inflow)
        _, trace, _ = sw.sweep(np.zeros((n_in, grid.nx, grid.ny)), np.eye(n_in))
        return _wrap(grid, trace.T.copy(), BALLISTIC, medium)
    if method != "ray":
        raise ValueError(f"unknown method {method!r}")
    depth, _ = inflow_rays(grid, sig_t)
    exits = straight_exit_map(grid)
    cols = np.arange(len(grid.inflow))
    M = np.zeros((len(grid.outflow), len(grid.inflow)))
    M[exits, cols] = np.exp(-depth) * grid.inflow.weight / grid.outflow.weight[exits]
    return _wrap(grid, M, BALLISTIC, medium)


@numba.njit(cache=True)
def _single_scatter(mid, in_facet, in_ord, cos, sin, w, sig_t, kscat, lx, ly,
                    facet_offsets, out_lookup, max_step, out):
    nx, ny = sig_t.shape
    dx, dy = lx / nx, ly / ny
    nt = cos.shape[0]
    for m in range(in_facet.shape[0]):
        px, py = mid[in_facet[m], 0], mid[in_facet[m], 1]
        c0, s0 = cos[in_ord[m]], sin[in_ord[m]]
        tau = _exit_time(px, py, c0, s0, lx, ly)
        n = max(1, int(np.ceil(tau / max_step)))
        deta = tau / n
        for k in range(n):
            eta = (k + 0.5) * deta
            yx, yy = px + eta * c0, py + eta * s0
            ix = min(max(int(np.floor(yx / dx)), 0), nx - 1)
            iy = min(max(int(np.floor(yy / dy)), 0), ny - 1)
            kk = kscat[ix, iy]
            if kk == 0.0:
                continue
            att_in = np.exp(-_optical_depth(px, py, c0, s0, eta, sig_t, dx, dy))
            for j in range(nt):
                t2 = _exit_time(yx, yy, cos[j], sin[j], lx, ly)
                x2 = _optical_depth(yx, yy, cos[j], sin[j], t2, sig_t, dx, dy)
                side, cell = _exit_facet(yx, yy, cos[j], sin[j], lx, ly, nx, ny)
                i = out_lookup[facet_offsets[side] + cell, j]
                out[i, m] += w[j] * deta * kk * att_in * np.exp(-x2)


def assemble_single_scattering(grid: PhaseSpaceGrid, medium: ScaledMedium,
                               method: str = "ray") -> AlbedoMatrix:
    """Once-scattered part of the albedo.

    ``method="ray"`` integrates scattering points along each incident ray
    (step <= dx/2) and carries each emission along exact exit rays in every
    ordinate. ``method="sweep"`` applies one upwind sweep to the first-collision
    source of the scattering-free sweep.
    """
    sig_t, k = medium.cell_coefficients(grid.space)
    n_in = len(grid.inflow)
    if method == "sweep":
        free = Sweeper(grid, medium, scattering=np.zeros_like(sig_t))
        phi0, _, _ = free.sweep(np.zeros((n_in, grid.nx, grid.ny)), np.eye(n_in))
        _, trace, _ = free.sweep(k[None] * phi0, np.zeros((n_in, n_in)))
        return _wrap(grid, trace.T.copy(), SINGLE, medium)
    if method != "ray":
        raise ValueError(f"unknown method {method!r}")
    flux = np.zeros((len(grid.outflow), n_in))
    offsets = np.cumsum([0, grid.ny, grid.ny, grid.nx, grid.nx])
    ang = grid.angular
    _single_scatter(np.ascontiguousarray(grid.facet_mid), grid.inflow.facet, grid.inflow.ordinate,
                    ang.cos, ang.sin, ang.weights, np.ascontiguousarray(sig_t), np.ascontiguousarray(k),
                    grid.space.extent[0], grid.space.extent[1], offsets,
                    np.ascontiguousarray(grid.out_lookup), grid.space.dx / 2, flux)
    # flux is outflow mass per unit inflow mass; convert to values
    M = flux * grid.inflow.weight[None, :] / grid.outflow.weight[:, None]
    return _wrap(grid, M, SINGLE, medium)


def residual(full: AlbedoMatrix, ballistic: AlbedoMatrix, single: AlbedoMatrix | None = None) -> AlbedoMatrix:
    """full - ballistic (- single): the multiply-scattered remainder."""
    out = full - ballistic
    if single is not None:
        out = out - single
    return replace(out, kind=RESIDUAL)


def operator_norm_l1(M: AlbedoMatrix) -> float:
    """Induced L1(Gamma_-, d xi) -> L1(Gamma_+, d xi) norm: the max weighted column ratio."""
    if M.matrix.size == 0:
        return 0.0
    return float(M.column_ratios().max())


def diff_norm(Ma: AlbedoMatrix, Mb: AlbedoMatrix) -> float:
    return operator_norm_l1(Ma - Mb)


def ballistic_norm_oracle(grid: PhaseSpaceGrid, medium: ScaledMedium) -> float:
    """exp(-min over inflow rays of the optical length), by enumeration."""
    sig_t, _ = medium.cell_coefficients(grid.space)
    depth, _ = inflow_rays(grid, sig_t)
    return float(np.exp(-depth.min()))
