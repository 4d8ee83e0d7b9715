"""Optical coefficients, Knudsen scaling and the benchmark media pair."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .grid import PhaseSpaceGrid, SpatialGrid

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]

BALL_CENTER = (0.3, 0.3)
BALL_RADIUS = 0.2


def constant(value: float) -> Field:
    return lambda x, y: np.full(np.broadcast(x, y).shape, float(value))


def ball_field(inside: float, outside: float, center=BALL_CENTER, radius=BALL_RADIUS) -> Field:
    """Piecewise constant: ``inside`` on the open disc, ``outside`` elsewhere."""
    cx, cy = center

    def f(x, y):
        r2 = (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2
        return np.where(r2 < radius * radius, float(inside), float(outside))

    return f


def bump(amplitude: float = 0.5, center=BALL_CENTER, width: float = 0.15, base: float = 1.0) -> Field:
    cx, cy = center

    def f(x, y):
        r2 = (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2
        return base + amplitude * np.exp(-r2 / (2 * width**2))

    return f


@dataclass(frozen=True)
class MediumField:
    """Scattering and absorption coefficients as closures over (x, y).

    ``margin`` > 0 zeroes both coefficients within that distance of the box
    boundary (the compact-support variant used by the stability checks).
    """

    sigma_s_fn: Field
    sigma_a_fn: Field = constant(0.0)
    name: str = "custom"
    margin: float = 0.0
    extent: tuple[float, float] = (0.6, 0.6)

    def _mask(self, x, y):
        if self.margin <= 0:
            return 1.0
        lx, ly = self.extent
        x, y = np.asarray(x), np.asarray(y)
        d = np.minimum(np.minimum(x, lx - x), np.minimum(y, ly - y))
        return (d >= self.margin).astype(float)

    def sigma_s(self, x, y) -> np.ndarray:
        return self.sigma_s_fn(x, y) * self._mask(x, y)

    def sigma_a(self, x, y) -> np.ndarray:
        return self.sigma_a_fn(x, y) * self._mask(x, y)

    def sample(self, space: SpatialGrid) -> tuple[np.ndarray, np.ndarray]:
        """(sigma_s, sigma_a) at cell centers, each (nx, ny)."""
        xc, yc = space.centers()
        s, a = np.asarray(self.sigma_s(xc, yc), float), np.asarray(self.sigma_a(xc, yc), float)
        if np.any(s < 0) or np.any(a < 0):
            raise ValueError(f"medium {self.name!r} has negative coefficients")
        return s, a

    def with_margin(self, margin: float) -> "MediumField":
        return MediumField(self.sigma_s_fn, self.sigma_a_fn, f"{self.name}+margin{margin:g}",
                           margin, self.extent)


@dataclass(frozen=True)
class ScaledMedium:
    """A medium in diffusion scaling: sigma_Kn = Kn*sigma_a + sigma_s/Kn, k = sigma_s/Kn."""

    base: MediumField
    kn: float

    def __post_init__(self):
        if not self.kn > 0:
            raise ValueError(f"Knudsen number must be positive, got {self.kn}")

    def sigma_kn(self, x, y) -> np.ndarray:
        return self.kn * self.base.sigma_a(x, y) + self.base.sigma_s(x, y) / self.kn

    def scattering(self, x, y) -> np.ndarray:
        return self.base.sigma_s(x, y) / self.kn

    def cell_coefficients(self, space: SpatialGrid) -> tuple[np.ndarray, np.ndarray]:
        """(total sigma_Kn, scattering strength k) sampled at cell centers."""
        s, a = self.base.sample(space)
        return self.kn * a + s / self.kn, s / self.kn

    def describe(self) -> str:
        return f"{self.base.name} kn={self.kn:g}"


@dataclass(frozen=True)
class MediaPair:
    reference: ScaledMedium
    perturbed: ScaledMedium
    z: float


def make_paper_pair(z: float, kn: float, margin: float = 0.0) -> MediaPair:
    """sigma_s = 1 against sigma_s = 1 inside B((0.3, 0.3), 0.2) and 1 + z outside; no absorption."""
    if z < 0:
        raise ValueError(f"contrast z must be >= 0, got {z}")
    ref = MediumField(constant(1.0), name="uniform", margin=margin)
    pert = MediumField(ball_field(1.0, 1.0 + z), name=f"ball-z{z:g}", margin=margin)
    return MediaPair(ScaledMedium(ref, kn), ScaledMedium(pert, kn), z)


def linf_diff(a: MediumField, b: MediumField, space: SpatialGrid) -> tuple[float, float]:
    """Max over cell centers of |a - b| for (sigma_s, sigma_a)."""
    sa, aa = a.sample(space)
    sb, ab = b.sample(space)
    return float(np.max(np.abs(sa - sb))), float(np.max(np.abs(aa - ab)))


def sup_norms(m: MediumField, space: SpatialGrid) -> tuple[float, float]:
    s, a = m.sample(space)
    return float(np.max(np.abs(s))), float(np.max(np.abs(a)))


def load_medium(path: str | Path) -> MediumField:
    """Piecewise-constant ball medium from a ``key = value`` text file.

    Keys: background, ball_center_x, ball_center_y, ball_radius, ball_value,
    and optionally sigma_a (constant absorption). ``#`` starts a comment.
    """
    vals: dict[str, float] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, _, value = line.partition(":")
        vals[key.strip()] = float(value)
    unknown = set(vals) - {"background", "ball_center_x", "ball_center_y", "ball_radius",
                           "ball_value", "sigma_a"}
    if unknown:
        raise ValueError(f"unknown medium keys: {sorted(unknown)}")
    bg = vals.get("background", 1.0)
    sigma_s = ball_field(vals.get("ball_value", bg), bg,
                         (vals.get("ball_center_x", BALL_CENTER[0]), vals.get("ball_center_y", BALL_CENTER[1])),
                         vals.get("ball_radius", BALL_RADIUS))
    return MediumField(sigma_s, constant(vals.get("sigma_a", 0.0)), name=Path(path).stem)


def check_grid_match(grid_a: PhaseSpaceGrid, grid_b: PhaseSpaceGrid) -> None:
    if grid_a.space != grid_b.space or grid_a.angular != grid_b.angular:
        raise ValueError("grid mismatch")
