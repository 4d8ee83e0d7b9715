"""Phase-space grid: cells x discrete ordinates, plus the boundary sets Gamma_-/Gamma_+."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRAZING_TOL = 1e-12

SIDES = ("left", "right", "bottom", "top")
LEFT, RIGHT, BOTTOM, TOP = range(4)
_NORMALS = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, -1.0], [0.0, 1.0]])


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    nx: int
    ny: int
    extent: tuple[float, float]
    origin: tuple[float, float] = (0.0, 0.0)

    @property
    def dx(self) -> float:
        return self.extent[0] / self.nx

    @property
    def dy(self) -> float:
        return self.extent[1] / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def diameter(self) -> float:
        return float(np.hypot(*self.extent))

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Cell-center coordinates as two (nx, ny) arrays."""
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.dx
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.dy
        return np.meshgrid(x, y, indexing="ij")

    def locate(self, x, y):
        """Cell indices (clipped to the grid) of points in the closed box."""
        ix = np.floor((np.asarray(x) - self.origin[0]) / self.dx).astype(int)
        iy = np.floor((np.asarray(y) - self.origin[1]) / self.dy).astype(int)
        return np.clip(ix, 0, self.nx - 1), np.clip(iy, 0, self.ny - 1)


@dataclass(frozen=True)
class AngularGrid:
    """Equally spaced ordinates on the unit circle at midpoints (j + 1/2) * dtheta.

    Weights are normalized to sum to one, so the angular average is a plain
    weighted sum. All speeds are 1.
    """

    ntheta: int

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / self.ntheta

    @property
    def angles(self) -> np.ndarray:
        return (np.arange(self.ntheta) + 0.5) * self.dtheta

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.ntheta, 1.0 / self.ntheta)

    @property
    def cos(self) -> np.ndarray:
        return np.cos(self.angles)

    @property
    def sin(self) -> np.ndarray:
        return np.sin(self.angles)

    def directions(self) -> np.ndarray:
        return np.stack([self.cos, self.sin], axis=1)

    def moments(self) -> tuple[float, np.ndarray, np.ndarray]:
        """Zeroth, first and second angular moments of the quadrature."""
        w, v = self.weights, self.directions()
        return float(w.sum()), w @ v, (v * w[:, None]).T @ v


@dataclass(frozen=True)
class BoundaryFacet:
    side: int
    cell: int
    midpoint: tuple[float, float]
    normal: tuple[float, float]
    length: float

    @property
    def side_name(self) -> str:
        return SIDES[self.side]


@dataclass(frozen=True)
class PhaseBoundaryIndex:
    facet: BoundaryFacet
    ordinate: int
    inflow: bool
    weight: float


@dataclass(frozen=True, eq=False)
class BoundarySet:
    """Flat arrays describing Gamma_- or Gamma_+ in canonical order.

    Canonical order is side (left, right, bottom, top), then cell ascending,
    then ordinate ascending.
    """

    facet: np.ndarray
    ordinate: np.ndarray
    weight: np.ndarray  # d xi = |n.v| * h * w_j

    def __len__(self) -> int:
        return len(self.facet)


@dataclass(frozen=True, eq=False)
class PhaseSpaceGrid:
    space: SpatialGrid
    angular: AngularGrid
    facet_side: np.ndarray
    facet_cell: np.ndarray
    facet_mid: np.ndarray
    facet_normal: np.ndarray
    facet_length: np.ndarray
    inflow: BoundarySet
    outflow: BoundarySet
    # (nfacets, ntheta) -> position in inflow/outflow lists, -1 where absent
    in_lookup: np.ndarray = field(repr=False)
    out_lookup: np.ndarray = field(repr=False)

    @property
    def nx(self) -> int:
        return self.space.nx

    @property
    def ny(self) -> int:
        return self.space.ny

    @property
    def ntheta(self) -> int:
        return self.angular.ntheta

    @property
    def nfacets(self) -> int:
        return len(self.facet_side)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.ntheta, self.nx, self.ny)

    def describe(self) -> str:
        return (f"nx={self.nx} ny={self.ny} ntheta={self.ntheta} "
                f"extent={self.space.extent[0]:g}x{self.space.extent[1]:g}")

    def facet(self, k: int) -> BoundaryFacet:
        return BoundaryFacet(
            side=int(self.facet_side[k]),
            cell=int(self.facet_cell[k]),
            midpoint=tuple(self.facet_mid[k]),
            normal=tuple(self.facet_normal[k]),
            length=float(self.facet_length[k]),
        )

    def facet_id(self, side: int, cell: int) -> int:
        offsets = np.cumsum([0, self.ny, self.ny, self.nx, self.nx])
        return int(offsets[side] + cell)

    def inflow_index(self, k: int) -> PhaseBoundaryIndex:
        return PhaseBoundaryIndex(self.facet(self.inflow.facet[k]), int(self.inflow.ordinate[k]),
                                  True, float(self.inflow.weight[k]))

    def outflow_index(self, k: int) -> PhaseBoundaryIndex:
        return PhaseBoundaryIndex(self.facet(self.outflow.facet[k]), int(self.outflow.ordinate[k]),
                                  False, float(self.outflow.weight[k]))

    def facet_cell_ij(self, k) -> tuple[np.ndarray, np.ndarray]:
        """Grid cell adjacent to facet(s) k."""
        side = self.facet_side[k]
        cell = self.facet_cell[k]
        ix = np.where(side == LEFT, 0, np.where(side == RIGHT, self.nx - 1, cell))
        iy = np.where(side == BOTTOM, 0, np.where(side == TOP, self.ny - 1, cell))
        return ix, iy

    def sweep_maps(self) -> dict[str, np.ndarray]:
        """Per-ordinate gather/scatter maps between the boundary lists and the sweep's edges.

        ``xin[j, iy]`` is the inflow position feeding row ``iy`` through the x-side
        (left when cos > 0, right otherwise); ``yin[j, ix]`` likewise through the
        y-side. ``xout``/``yout`` are the outflow positions on the opposite sides.
        """
        nt = self.ntheta
        xin = np.empty((nt, self.ny), dtype=np.int64)
        xout = np.empty((nt, self.ny), dtype=np.int64)
        yin = np.empty((nt, self.nx), dtype=np.int64)
        yout = np.empty((nt, self.nx), dtype=np.int64)
        rows, cols = np.arange(self.ny), np.arange(self.nx)
        for j, (c, s) in enumerate(self.angular.directions()):
            x_in_side, x_out_side = (LEFT, RIGHT) if c > 0 else (RIGHT, LEFT)
            y_in_side, y_out_side = (BOTTOM, TOP) if s > 0 else (TOP, BOTTOM)
            xin[j] = self.in_lookup[self.facet_id(x_in_side, 0) + rows, j]
            xout[j] = self.out_lookup[self.facet_id(x_out_side, 0) + rows, j]
            yin[j] = self.in_lookup[self.facet_id(y_in_side, 0) + cols, j]
            yout[j] = self.out_lookup[self.facet_id(y_out_side, 0) + cols, j]
        return {"xin": xin, "xout": xout, "yin": yin, "yout": yout}


def build_grid(nx: int, ny: int, ntheta: int, extent=(0.6, 0.6)) -> PhaseSpaceGrid:
    """Discretize the box [0, Lx] x [0, Ly] with nx*ny cells and ntheta ordinates.

    >>> g = build_grid(24, 24, 24, (0.6, 0.6))
    >>> g.space.dx, g.nfacets, len(g.inflow)
    (0.025, 96, 1152)
    """
    if min(nx, ny, ntheta) < 2:
        raise GridError(f"nx, ny, ntheta must be >= 2, got {(nx, ny, ntheta)}")
    if ntheta % 2:
        raise GridError(f"ntheta must be even, got {ntheta}")
    ang = AngularGrid(ntheta)
    if np.any(np.abs(ang.cos) < GRAZING_TOL) or np.any(np.abs(ang.sin) < GRAZING_TOL):
        raise GridError(f"ntheta={ntheta} produces an ordinate parallel to a box side")
    lx, ly = float(extent[0]), float(extent[1])
    space = SpatialGrid(nx, ny, (lx, ly))
    dx, dy = space.dx, space.dy

    sides, cells, mids, lengths = [], [], [], []
    for side, n, h in ((LEFT, ny, dy), (RIGHT, ny, dy), (BOTTOM, nx, dx), (TOP, nx, dx)):
        k = np.arange(n)
        t = (k + 0.5) * h
        if side == LEFT:
            m = np.stack([np.zeros(n), t], axis=1)
        elif side == RIGHT:
            m = np.stack([np.full(n, lx), t], axis=1)
        elif side == BOTTOM:
            m = np.stack([t, np.zeros(n)], axis=1)
        else:
            m = np.stack([t, np.full(n, ly)], axis=1)
        sides.append(np.full(n, side))
        cells.append(k)
        mids.append(m)
        lengths.append(np.full(n, h))
    facet_side = np.concatenate(sides)
    facet_cell = np.concatenate(cells)
    facet_mid = np.concatenate(mids)
    facet_length = np.concatenate(lengths)
    facet_normal = _NORMALS[facet_side]

    ndotv = facet_normal @ ang.directions().T  # (nfacets, ntheta)
    weight = np.abs(ndotv) * facet_length[:, None] * ang.weights[None, :]

    def boundary_set(mask):
        f, j = np.nonzero(mask)  # row-major: facet then ordinate
        lookup = np.full(mask.shape, -1, dtype=np.int64)
        lookup[f, j] = np.arange(len(f))
        return BoundarySet(f, j, weight[f, j]), lookup

    inflow, in_lookup = boundary_set(ndotv < 0)
    outflow, out_lookup = boundary_set(ndotv > 0)
    for arr in (facet_side, facet_cell, facet_mid, facet_normal, facet_length,
                inflow.facet, inflow.ordinate, inflow.weight,
                outflow.facet, outflow.ordinate, outflow.weight, in_lookup, out_lookup):
        arr.setflags(write=False)
    return PhaseSpaceGrid(space, ang, facet_side, facet_cell, facet_mid, facet_normal,
                          facet_length, inflow, outflow, in_lookup, out_lookup)


def volume_quadrature(grid: PhaseSpaceGrid, f) -> float:
    """Sum of f(ordinate, cell) * dx * dy * w_j; f broadcasts against (ntheta, nx, ny)."""
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    w = grid.angular.weights
    return float(np.einsum("j,jxy->", w, f) * grid.space.cell_area)


def boundary_quadrature(values, bset: BoundarySet) -> float:
    """L1(d xi)-type sum over a boundary list: sum of values * weight."""
    return float(np.dot(np.asarray(values, dtype=float), bset.weight))


MEASURES = ("dxi", "dmu")


def measure_weights(grid: PhaseSpaceGrid, measure: str = "dxi") -> tuple[np.ndarray, np.ndarray]:
    """(inflow, outflow) boundary weights for the chosen measure.

    ``dxi`` is |n.v| h w_j; ``dmu`` drops the |n.v| factor (plain h w_j).
    """
    if measure == "dxi":
        return grid.inflow.weight, grid.outflow.weight
    if measure == "dmu":
        w = grid.angular.weights
        return (grid.facet_length[grid.inflow.facet] * w[grid.inflow.ordinate],
                grid.facet_length[grid.outflow.facet] * w[grid.outflow.ordinate])
    raise ValueError(f"unknown measure {measure!r}, expected one of {MEASURES}")
