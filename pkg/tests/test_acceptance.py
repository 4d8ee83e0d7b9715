"""Acceptance criteria at the default 24 x 24 x 24 configuration.

Every check prints one PASS/FAIL line (collected again in the terminal
summary). Full albedo operators are cached in one session-wide lab, so each
(medium, Kn) pair is assembled once.
"""
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from rtelab.albedo import (assemble_ballistic, assemble_single_scattering, operator_norm_l1, residual)
from rtelab.diffusion import limit_table
from rtelab.experiments import ExperimentConfig, Lab, minimal_ray_length, run
from rtelab.grid import build_grid, volume_quadrature
from rtelab.media import MediumField, ScaledMedium, constant, make_paper_pair
from rtelab.raytrace import exit_pairing, ray_quadrature
from rtelab.transport import BoundaryFlux, assemble_system, solve_transport

pytestmark = pytest.mark.slow

CFG = ExperimentConfig()
UNIT = MediumField(constant(1.0), name="uniform")


@pytest.fixture(scope="module")
def lab():
    return Lab(CFG)


@pytest.fixture(scope="module")
def ballistic(lab):
    return run(ExperimentConfig("ballistic-decay"), lab)


@pytest.fixture(scope="module")
def lipschitz(lab):
    return run(ExperimentConfig("lipschitz"), lab)


@pytest.fixture(scope="module")
def blowup(lab):
    return run(ExperimentConfig("kn-blowup"), lab)


# -- 1. ballistic decay ---------------------------------------------------------

def test_c1_ballistic_fit_r2(ballistic, verdict):
    _, fit = ballistic
    verdict("C1a ballistic log-linear fit r2 >= 0.999", fit.r2 >= 0.999, f"r2={fit.r2:.12f}")


def test_c1_ballistic_slope_equals_minus_lmin(ballistic, lab, verdict):
    _, fit = ballistic
    lmin = minimal_ray_length(lab.grid)
    verdict("C1b slope = -L_min within 1e-6", abs(fit.slope + lmin) <= 1e-6,
            f"slope={fit.slope:.10f} L_min={lmin:.10f}")


def test_c1_ballistic_slope_near_published(ballistic, verdict):
    _, fit = ballistic
    verdict("C1c slope within 25% of -0.1", abs(fit.slope + 0.1) <= 0.025,
            f"slope={fit.slope:.6f} (window [-0.125, -0.075])")


def test_ballistic_remainder_grows_as_kn_shrinks(ballistic):
    rest = ballistic[0].column("norm_A_minus_A1")
    assert all(a <= b for a, b in zip(rest, rest[1:]))


# -- 2. exact ballistic identity ------------------------------------------------

def test_c2_ballistic_identity(ballistic, lab, verdict):
    t, _ = ballistic
    lmin = minimal_ray_length(lab.grid)
    errs = [abs(a - np.exp(-lmin / kn)) for kn, a in zip(t.column("kn"), t.column("norm_A1"))]
    verdict("C2 ||A1|| = exp(-L_min/Kn) to 1e-10", max(errs) <= 1e-10, f"max error {max(errs):.2e}")


# -- 3. Lipschitz in z ----------------------------------------------------------

def test_c3_lipschitz(lipschitz, verdict):
    t, fit = lipschitz
    z = [r[0] for r in t.rows if r[0] > 0]
    d = [r[1] for r in t.rows if r[0] > 0]
    ratios = [a / b for a, b in zip(d, d[1:])]
    ok = (fit.r2 >= 0.99 and abs(fit.intercept) <= 0.05 * max(d)
          and all(1.8 <= r <= 2.2 for r in ratios) and all(s == "ok" for s in t.column("status")))
    verdict("C3 diff_norm linear in z at Kn=1", ok,
            f"r2={fit.r2:.6f} intercept={fit.intercept:.3e} (limit {0.05 * max(d):.3e}) "
            f"ratios={[round(r, 4) for r in ratios]} z={z}")


def test_zero_contrast_control_row(lipschitz):
    t, _ = lipschitz
    assert t.rows[0][0] == 0.0 and t.rows[0][1] <= 10 * CFG.tol


# -- 4. Kn dependence of the difference -------------------------------------------

def test_c4_kn_blowup(blowup, verdict):
    t, fit = blowup
    converged = all(s == "ok" for s in t.column("status"))
    ok = converged and fit.r2 >= 0.98 and abs(fit.slope + 0.05) <= 0.3 * 0.05
    verdict("C4 log-linear fit of diff_norm vs 1/Kn: r2 >= 0.98, slope within 30% of -0.05", ok,
            f"slope={fit.slope:.5f} r2={fit.r2:.4f} converged={converged} "
            f"diff_norms={[round(v, 6) for v in t.column('diff_norm')]}")


def test_upper_envelope_grows(blowup):
    env = blowup[0].column("exp_beta_diff_norm")
    assert all(a < b for a, b in zip(env, env[1:]))


# -- 5. conservation --------------------------------------------------------------

@pytest.mark.parametrize("kn", [2.0, 1.0, 0.5])
def test_c5_conservation(lab, kn, verdict):
    worst = 0.0
    norms = []
    for m in (make_paper_pair(0.1, kn).reference, make_paper_pair(0.1, kn).perturbed):
        M, _ = lab.full(m)
        worst = max(worst, float(np.abs(M.column_ratios() - 1.0).max()))
        norms.append(operator_norm_l1(M))
    tol = 10 * CFG.tol
    ok = worst <= tol and all(abs(n - 1) <= tol for n in norms)
    verdict(f"C5 flux identity and ||A|| = 1 at Kn={kn:g}", ok,
            f"max column error {worst:.2e}, norms-1 {[f'{n - 1:.1e}' for n in norms]}")


# -- 6. oracle equivalence -----------------------------------------------------------

def test_c6_oracle_equivalence(verdict):
    g = build_grid(6, 6, 8)
    m = make_paper_pair(0.1, 1.0).perturbed
    A, B, T = assemble_system(g, m)
    dense = A.toarray()
    r = np.random.default_rng(6)
    worst = 0.0
    for _ in range(5):
        inflow = BoundaryFlux(g, r.random(len(g.inflow)))
        f = np.linalg.solve(dense, B @ inflow.values)
        sol = solve_transport(g, m, inflow, tol=1e-13)
        worst = max(worst, np.abs(sol.psi.ravel() - f).max(), np.abs(sol.outflow.values - T @ f).max())
    verdict("C6 source iteration = dense direct solve to 1e-10 (6x6x8)", worst <= 1e-10, f"max gap {worst:.2e}")


# -- 7. diffusion limit -----------------------------------------------------------------

def test_c7_diffusion_limit(lab, verdict):
    rows = limit_table(lab.grid, UNIT, [0.5, 0.25, 0.125], lambda x, y: x, CFG.tol, CFG.max_iters)
    err = [r.err_linf for r in rows]
    dtn = [r.dtn_disc for r in rows]
    ratios = [b / a for a, b in zip(err, err[1:])]
    ok = all(b < a for a, b in zip(err, err[1:])) and all(q <= 0.8 for q in ratios) \
        and all(b < a for a, b in zip(dtn, dtn[1:]))
    verdict("C7 diffusion limit err and DtN discrepancy decrease", ok,
            f"err={[round(e, 5) for e in err]} ratios={[round(q, 4) for q in ratios]} "
            f"dtn={[round(d, 5) for d in dtn]}")


# -- 8. stability inequality ------------------------------------------------------------

def test_c8_stability_inequality(lab, verdict):
    cfg = ExperimentConfig("stability-check", z_list=(0.1, 0.025), kn_list=(2.0, 1.0, 0.5, 0.25))
    t, _ = run(cfg, lab)
    passed = t.column("pass")
    verdict("C8 stability inequality with slack 0.1", all(passed),
            f"{sum(passed)}/{len(passed)} configurations, worst bound/diff "
            f"{max(t.column('worst_slack_ratio')):.3f}")


# -- 9. single scattering remainder --------------------------------------------------------

def test_c9_single_scattering_remainder(lab, verdict):
    ratios = []
    for kn in (4.0, 8.0, 16.0):
        m = ScaledMedium(UNIT, kn)
        full, _ = lab.full(m)
        a1 = assemble_ballistic(lab.grid, m, "sweep")
        a2 = assemble_single_scattering(lab.grid, m, "sweep")
        ratios.append(operator_norm_l1(residual(full, a1, a2)) / operator_norm_l1(residual(full, a1)))
    halving = [b / a for a, b in zip(ratios, ratios[1:])]
    ok = all(0.35 <= h <= 0.65 for h in halving)
    verdict("C9 ||A-A1-A2||/||A-A1|| halves as Kn doubles", ok,
            f"ratios={[round(r, 5) for r in ratios]} halving={[round(h, 4) for h in halving]}")


# -- 10. quadrature duality ------------------------------------------------------------------

def test_c10_quadrature_duality(verdict):
    rel = []
    for n in (24, 48):
        g = build_grid(n, n, 24)
        c = g.angular.cos
        vol = volume_quadrature(g, 1 + g.space.centers()[0][None] + c[:, None, None])
        ray = ray_quadrature(g, lambda x, y, j: 1 + x + c[j])
        rel.append(abs(ray - vol) / vol)
    g = build_grid(24, 24, 24)
    i, o, w = exit_pairing(g)
    vals = np.random.default_rng(10).random(len(g.inflow))
    pushed = np.bincount(o, vals[i] * w, len(g.outflow))
    gap = abs(pushed.sum() - vals @ g.inflow.weight) / (vals @ g.inflow.weight)
    margins = max(np.abs(np.bincount(i, w, len(g.inflow)) - g.inflow.weight).max(),
                  np.abs(np.bincount(o, w, len(g.outflow)) - g.outflow.weight).max())
    ok = rel[0] <= 0.02 and rel[1] < rel[0] and gap <= 1e-14 and margins <= 1e-15
    verdict("C10 volume/ray quadrature and exit-map measure preservation", ok,
            f"volume-vs-ray rel error 24^2={rel[0]:.2e} 48^2={rel[1]:.2e}; "
            f"pushed-mass gap {gap:.1e}, marginal error {margins:.1e}")


# -- 11. determinism --------------------------------------------------------------------------

_REPEAT = textwrap.dedent("""
    import sys
    from rtelab.experiments import ExperimentConfig, Lab, run
    import numba
    numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
    lab = Lab(ExperimentConfig(chunk=97))
    for name in ("ballistic-decay", "lipschitz", "kn-blowup"):
        table, _ = run(ExperimentConfig(name, chunk=97), lab)
        table.write(f"{sys.argv[1]}/{name}.csv")
""")


def test_c11_determinism(tmp_path, ballistic, lipschitz, blowup, verdict):
    env = dict(os.environ, NUMBA_NUM_THREADS="4")
    subprocess.run([sys.executable, "-c", _REPEAT, str(tmp_path)], check=True, env=env)
    same = {}
    for name, (table, _) in (("ballistic-decay", ballistic), ("lipschitz", lipschitz), ("kn-blowup", blowup)):
        same[name] = (tmp_path / f"{name}.csv").read_text() == table.to_csv()
    verdict("C11 byte-identical CSVs across thread count and batching", all(same.values()),
            ", ".join(f"{k}={'identical' if v else 'DIFFERENT'}" for k, v in same.items()))
