"""Computable stability quantities: beta_Kn, the attenuated X-ray lower bound, log-linear fits."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .albedo import AlbedoMatrix, assemble_full, diff_norm
from .grid import PhaseSpaceGrid
from .media import MediaPair, sup_norms
from .raytrace import inflow_rays
from .transport import DEFAULT_MAX_ITERS, DEFAULT_TOL

DEFAULT_SLACK = 0.1


class NonPositiveData(ValueError):
    pass


@dataclass(frozen=True)
class Fit:
    slope: float
    intercept: float
    r2: float


@dataclass(frozen=True, eq=False)
class StabilityReport:
    kn: float
    z: float
    beta_kn: float
    diff_norm: float
    slack: float
    xray: np.ndarray  # X(sigma_Kn - sigma~_Kn) per inflow position
    lower_bound: np.ndarray  # exp(-beta) |X|

    @property
    def passed_rays(self) -> np.ndarray:
        return self.lower_bound <= (1 + self.slack) * self.diff_norm

    @property
    def passed(self) -> bool:
        return bool(self.passed_rays.all())

    @property
    def max_lower_bound(self) -> float:
        return float(self.lower_bound.max())

    @property
    def worst_slack_ratio(self) -> float:
        if self.diff_norm == 0:
            return 0.0 if self.max_lower_bound == 0 else float("inf")
        return self.max_lower_bound / self.diff_norm

    @property
    def envelope(self) -> float:
        """exp(beta_Kn) * ||A - A~||, the Kn-dependent factor of the upper bound."""
        return float(np.exp(self.beta_kn) * self.diff_norm)


def beta_kn(pair: MediaPair, grid: PhaseSpaceGrid, speed_min: float = 1.0) -> float:
    """diam(Omega)/M1 * (Kn (|sigma_a|+|sigma~_a|) + (|sigma_s|+|sigma~_s|)/Kn), sup norms over cells."""
    kn = pair.reference.kn
    s1, a1 = sup_norms(pair.reference.base, grid.space)
    s2, a2 = sup_norms(pair.perturbed.base, grid.space)
    return grid.space.diameter / speed_min * (kn * (a1 + a2) + (s1 + s2) / kn)


def attenuation_difference_xray(pair: MediaPair, grid: PhaseSpaceGrid) -> np.ndarray:
    sig_ref, _ = pair.reference.cell_coefficients(grid.space)
    sig_pert, _ = pair.perturbed.cell_coefficients(grid.space)
    depth, _ = inflow_rays(grid, sig_ref - sig_pert)
    return depth


def check_inequality(pair: MediaPair, grid: PhaseSpaceGrid, slack: float = DEFAULT_SLACK,
                     albedos: tuple[AlbedoMatrix, AlbedoMatrix] | None = None,
                     tol: float = DEFAULT_TOL, max_iters: int = DEFAULT_MAX_ITERS) -> StabilityReport:
    """Test ||A - A~|| >= exp(-beta_Kn) |X(sigma_Kn - sigma~_Kn)| on every discrete inflow ray."""
    if albedos is None:
        albedos = (assemble_full(grid, pair.reference, tol, max_iters),
                   assemble_full(grid, pair.perturbed, tol, max_iters))
    dn = diff_norm(*albedos)
    beta = beta_kn(pair, grid)
    x = attenuation_difference_xray(pair, grid)
    return StabilityReport(pair.reference.kn, pair.z, beta, dn, slack, x, np.exp(-beta) * np.abs(x))


def fit_linear(xs, ys) -> Fit:
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(xs) < 3:
        raise ValueError("need at least 3 points for a fit")
    slope, intercept = np.polyfit(xs, ys, 1)
    pred = slope * xs + intercept
    ss_res = float(np.sum((ys - pred) ** 2))
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return Fit(float(slope), float(intercept), r2)


def fit_loglinear(xs, ys) -> Fit:
    """Least-squares fit of ln(y) = slope * x + intercept."""
    ys = np.asarray(ys, float)
    if np.any(ys <= 0):
        raise NonPositiveData("log-linear fit needs strictly positive data")
    return fit_linear(xs, np.log(ys))
