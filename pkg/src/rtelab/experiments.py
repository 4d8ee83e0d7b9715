"""The numerical experiments: ballistic decay, Lipschitz in z, Kn blow-up, diffusion limit, stability."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .albedo import (AlbedoMatrix, assemble_ballistic, assemble_full, operator_norm_l1)
from .diffusion import limit_table
from .grid import PhaseSpaceGrid, build_grid, measure_weights
from .media import MediumField, ScaledMedium, bump, constant, make_paper_pair
from .raytrace import inflow_rays
from .stability import Fit, beta_kn, check_inequality, fit_linear, fit_loglinear
from .tables import Table
from .transport import DEFAULT_MAX_ITERS, DEFAULT_TOL, SCHEME_TAG

log = logging.getLogger(__name__)

EXPERIMENTS = ("ballistic-decay", "lipschitz", "kn-blowup", "diffusion-limit", "stability-check")
PAPER_KN = (2.0, 1.0, 0.5, 0.25, 0.125)
PAPER_Z = (0.1, 0.05, 0.025, 0.0125)
OK, NONCONVERGED = "ok", "nonconverged"


@dataclass
class ExperimentConfig:
    experiment: str = "ballistic-decay"
    nx: int = 24
    ny: int = 24
    ntheta: int = 24
    extent: tuple[float, float] = (0.6, 0.6)
    kn_list: tuple[float, ...] = PAPER_KN
    z_list: tuple[float, ...] = PAPER_Z
    z_fixed: float = 0.025
    kn_fixed: float = 1.0
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    measure: str = "dxi"
    slack: float = 0.1
    inflow: str = "linear-x"
    sigma: str = "constant:1"
    out: str | None = None
    chunk: int = 2048  # albedo columns per batch; affects speed only, never the CSV

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        self.kn_list = tuple(float(k) for k in self.kn_list)
        self.z_list = tuple(float(z) for z in self.z_list)
        if any(k <= 0 for k in self.kn_list):
            raise ValueError("Knudsen numbers must be positive")
        if any(z < 0 for z in self.z_list):
            raise ValueError("contrasts must be >= 0")

    def header(self) -> dict[str, str]:
        return {
            "experiment": self.experiment,
            "grid": f"nx={self.nx} ny={self.ny} ntheta={self.ntheta} extent={self.extent[0]:g}x{self.extent[1]:g}",
            "tol": f"{self.tol:g}",
            "max_iters": str(self.max_iters),
            "scheme": SCHEME_TAG,
            "measure": self.measure,
            "version": f"rtelab {__version__}",
        }


@dataclass
class Lab:
    """Grid plus a cache of assembled full albedo operators, shared across experiments."""

    cfg: ExperimentConfig
    grid: PhaseSpaceGrid = field(init=False)
    _full: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        c = self.cfg
        self.grid = build_grid(c.nx, c.ny, c.ntheta, c.extent)

    def weigh(self, M: AlbedoMatrix) -> AlbedoMatrix:
        return M.with_weights(*measure_weights(self.grid, self.cfg.measure))

    def norm(self, M: AlbedoMatrix) -> float:
        return operator_norm_l1(self.weigh(M))

    def full(self, medium: ScaledMedium) -> tuple[AlbedoMatrix, bool]:
        key = (medium.base.name, medium.kn, self.cfg.tol, self.cfg.max_iters)
        if key not in self._full:
            log.info("assembling full albedo for %s", medium.describe())
            M = assemble_full(self.grid, medium, self.cfg.tol, self.cfg.max_iters, chunk=self.cfg.chunk,
                              strict=False)
            self._full[key] = (M, bool(np.all(M.residuals <= self.cfg.tol)))
        return self._full[key]

    def table(self, name: str, columns: list[str]) -> Table:
        return Table(name, columns, header=self.cfg.header())


def _fit(fitter, xs, ys) -> Fit:
    """Fit over the usable rows; NaN coefficients when fewer than three remain."""
    if len(xs) < 3:
        log.warning("only %d usable rows, fit skipped", len(xs))
        return Fit(float("nan"), float("nan"), float("nan"))
    return fitter(xs, ys)


def minimal_ray_length(grid: PhaseSpaceGrid, field=None) -> float:
    depth, _ = inflow_rays(grid, field)
    return float(depth.min())


def run_ballistic_decay(lab: Lab) -> tuple[Table, Fit]:
    """||A1|| and ||A - A1|| for sigma_s = 1 over the Kn sweep; fit ln||A1|| against 1/Kn.

    A - A1 subtracts the scattering-free sweep so that both terms share the
    upwind discretization; A1 itself is the exact ray-traced operator.
    """
    t = lab.table("ballistic-decay", ["kn", "inv_kn", "norm_A1", "norm_A_minus_A1", "status"])
    ref_base = MediumField(constant(1.0), name="uniform")
    for kn in lab.cfg.kn_list:
        m = ScaledMedium(ref_base, kn)
        a1 = lab.norm(assemble_ballistic(lab.grid, m))
        full, ok = lab.full(m)
        rest = lab.norm(full - assemble_ballistic(lab.grid, m, method="sweep"))
        t.add(kn, 1.0 / kn, a1, rest, OK if ok else NONCONVERGED)
    fit = _fit(fit_loglinear, t.column("inv_kn"), t.column("norm_A1"))
    t.footer = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2,
                "l_min": minimal_ray_length(lab.grid)}
    return t, fit


def run_lipschitz(lab: Lab) -> tuple[Table, Fit]:
    """||A - A~|| against z at fixed Kn, with a z = 0 control row; plain linear fit."""
    t = lab.table("lipschitz", ["z", "diff_norm", "status"])
    kn = lab.cfg.kn_fixed
    for z in (0.0,) + lab.cfg.z_list:
        pair = make_paper_pair(z, kn)
        (ma, oka), (mb, okb) = lab.full(pair.reference), lab.full(pair.perturbed)
        t.add(z, lab.norm(ma - mb), OK if oka and okb else NONCONVERGED)
    good = [r for r in t.rows if r[0] > 0 and r[2] == OK]
    fit = _fit(fit_linear, [r[0] for r in good], [r[1] for r in good])
    t.footer = {"kn": kn, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    return t, fit


def run_kn_blowup(lab: Lab) -> tuple[Table, Fit]:
    """||A - A~|| against 1/Kn at fixed z; log-linear fit over converged rows."""
    t = lab.table("kn-blowup", ["kn", "inv_kn", "diff_norm", "ln_diff_norm", "exp_beta_diff_norm", "status"])
    z = lab.cfg.z_fixed
    for kn in lab.cfg.kn_list:
        pair = make_paper_pair(z, kn)
        (ma, oka), (mb, okb) = lab.full(pair.reference), lab.full(pair.perturbed)
        d = lab.norm(ma - mb)
        env = float(np.exp(beta_kn(pair, lab.grid)) * d)
        t.add(kn, 1.0 / kn, d, float(np.log(d)) if d > 0 else float("-inf"), env,
              OK if oka and okb else NONCONVERGED)
    good = [r for r in t.rows if r[5] == OK]
    fit = _fit(fit_loglinear, [r[1] for r in good], [r[2] for r in good])
    t.footer = {"z": z, "slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    return t, fit


def _boundary_data(name: str):
    if name == "linear-x":
        return lambda x, y: np.asarray(x, float)
    if name.startswith("constant:"):
        c = float(name.split(":", 1)[1])
        return lambda x, y: np.full(np.broadcast(x, y).shape, c)
    raise ValueError(f"unknown inflow {name!r}; ordinate-dependent inflow needs the boundary-layer "
                     "problem and is not supported")


def _sigma(name: str) -> MediumField:
    if name.startswith("constant:"):
        return MediumField(constant(float(name.split(":", 1)[1])), name=name)
    if name == "bump":
        return MediumField(bump(), name="bump")
    raise ValueError(f"unknown sigma {name!r}")


def run_diffusion_limit(lab: Lab) -> tuple[Table, None]:
    t = lab.table("diffusion-limit", ["kn", "err_linf", "dtn_disc", "iterations"])
    t.header["inflow"] = lab.cfg.inflow
    t.header["sigma"] = lab.cfg.sigma
    for r in limit_table(lab.grid, _sigma(lab.cfg.sigma), lab.cfg.kn_list, _boundary_data(lab.cfg.inflow),
                         lab.cfg.tol, lab.cfg.max_iters):
        t.add(r.kn, r.err_linf, r.dtn_disc, r.iterations)
    return t, None


def run_stability_check(lab: Lab) -> tuple[Table, None]:
    t = lab.table("stability-check", ["kn", "z", "beta_kn", "diff_norm", "max_lower_bound",
                                      "worst_slack_ratio", "pass"])
    t.header["slack"] = f"{lab.cfg.slack:g}"
    for z in lab.cfg.z_list:
        for kn in lab.cfg.kn_list:
            pair = make_paper_pair(z, kn)
            albedos = (lab.weigh(lab.full(pair.reference)[0]), lab.weigh(lab.full(pair.perturbed)[0]))
            rep = check_inequality(pair, lab.grid, lab.cfg.slack, albedos)
            t.add(kn, z, rep.beta_kn, rep.diff_norm, rep.max_lower_bound, rep.worst_slack_ratio, rep.passed)
    return t, None


RUNNERS = {
    "ballistic-decay": run_ballistic_decay,
    "lipschitz": run_lipschitz,
    "kn-blowup": run_kn_blowup,
    "diffusion-limit": run_diffusion_limit,
    "stability-check": run_stability_check,
}


def run(cfg: ExperimentConfig, lab: Lab | None = None):
    if lab is None:
        lab = Lab(cfg)
    elif (lab.grid.nx, lab.grid.ny, lab.grid.ntheta, lab.grid.space.extent) != (cfg.nx, cfg.ny, cfg.ntheta, cfg.extent):
        raise ValueError("lab grid does not match the experiment configuration")
    else:
        lab.cfg = cfg
    return RUNNERS[cfg.experiment](lab)


def has_nonconverged(t: Table) -> bool:
    return "status" in t.columns and NONCONVERGED in t.column("status")
