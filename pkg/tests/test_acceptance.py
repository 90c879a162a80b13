"""Acceptance suite: ten quantitative criteria, one verdict line each.

Each test prints "criterion N (name): PASS/FAIL" directly to the terminal
and asserts the stated tolerance.  Criteria 3, 4 and 5 compare whole-space
Monte Carlo estimates for a single planted trap against the Dirichlet-box
eigensolver; on the whole of H^d that trap does not bind (paths escape and
the decay rate is zero), while the box ground energy is pinned near the
free bottom by the wall, so those comparisons fail for a real reason.
tests/test_mechanism.py verifies the same estimators against the correct
whole-space limit object (the survival harmonic) and passes.  Criterion 1
demands the box eigenvalue land within 1% of the continuum bottom at
R_max=30, where the wall penalty pi^2/(2 R_max^2) ~ 5.5e-3 alone exceeds
the allowance; the same solver meets the 1% band at R_max=100 (see
test_mechanism.py).  Criterion 2 asks for mean r_T/T within 3 standard
errors of the limit (d-1)/2 at T=50 with 10^3 paths, but the mean carries
a positive O(1/T) transient of about +1.5/T (coth(r) > 1 along the early
path) that does not shrink with h and is 4 to 7 standard errors wide at
those parameters; the independent radial SDE oracle shows the identical
offset, so the sampler is vindicated and the tolerance is what fails (see
tests/test_diffusion.py for the corrected finite-T assertion).
"""

import sys

import conftest
import numpy as np
import pytest

from hyptrap import cli, diffusion, feynman_kac, fock, geometry, spectral, stats
from hyptrap.feynman_kac import canonical_axis_point
from hyptrap.geometry import origin
from hyptrap.ppp import (
    Configuration,
    ConstantPotential,
    FactorPotential,
    PotentialSpec,
    ball_volume,
    sample_configuration,
)

SPEC = PotentialSpec(1.0, 1.0, 0.1, 1.0)


def verdict(num, name, ok, detail):
    line = f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} -- {detail}"
    conftest.record_verdict(line)
    print(line, file=sys.__stdout__, flush=True)
    assert ok, line


def trap_radial(r):
    return np.minimum(SPEC.v_max, SPEC.profile(r))


def planted_trap(d=2):
    config = Configuration(origin(d).z[None, :], 60.0, 0.0, d)
    return FactorPotential(SPEC, config)


@pytest.fixture(scope="module")
def oracle():
    op = spectral.build_radial_operator(2, 30.0, 3000, trap_radial)
    return op, spectral.solve_ground_state(op)


def test_criterion_1_free_spectral_bottom():
    details = []
    ok = True
    for d, lo, hi in ((2, 0.125, 0.12625), (3, 0.5, 0.505)):
        op = spectral.build_radial_operator(d, 30.0, 3000, lambda r: np.zeros_like(r))
        rho = spectral.solve_ground_state(op).rho
        details.append(f"d={d}: rho={rho:.6f}, required [{lo}, {hi}]")
        ok = ok and lo <= rho <= hi
    verdict(1, "free spectral bottom", ok, "; ".join(details))


def test_criterion_2_radial_drift():
    details = []
    ok = True
    T, h, n = 50.0, 1e-3, 1000
    for d, target in ((2, 0.5), (3, 1.0)):
        rng = np.random.default_rng(100 + d)
        r0 = np.zeros(n)
        u0 = np.zeros((n, d))
        u0[:, 0] = 1.0
        res = diffusion.ensemble_walk(r0, u0, int(T / h), h, rng)
        speed = res.r / T
        se = speed.std(ddof=1) / np.sqrt(n)
        dev = abs(speed.mean() - target)
        details.append(f"d={d}: mean r_T/T={speed.mean():.4f} target {target} (3se={3*se:.4f})")
        ok = ok and dev < 3 * se
    verdict(2, "radial drift", ok, "; ".join(details))


def test_criterion_3_quenched_survival_vs_oracle(oracle):
    op, spec_out = oracle
    est = feynman_kac.estimate_rho(origin(2), planted_trap(), [10.0, 20.0, 40.0],
                                   0.01, 10_000, 7)
    within = abs(est.rho_hat - spec_out.rho) < 3 * est.rho_stderr
    bounded = 0.0 <= est.rho_hat <= 0.1
    ok = within and bounded
    verdict(3, "quenched survival vs oracle", ok,
            f"rho_hat={est.rho_hat:.5f} +- {est.rho_stderr:.5f}, "
            f"oracle rho={spec_out.rho:.5f}, bound check={bounded}")


def test_criterion_4_eigenfunction_ratio(oracle):
    from scipy.interpolate import PchipInterpolator

    op, spec_out = oracle
    interp = PchipInterpolator(op.grid, spec_out.phi)
    phi0 = float(interp(1e-9))
    config = Configuration(origin(2).z[None, :], 60.0, 0.0, 2)
    probes = [canonical_axis_point(2, r) for r in (0.5, 1.0, 2.0, 4.0)]
    table = feynman_kac.estimate_phi_ratio(probes, SPEC, config, 40.0, 0.01,
                                           10_000, 7)
    ok = True
    details = []
    for r, ratio, se in table:
        target = float(interp(r)) / phi0
        details.append(f"r={r:g}: mc={ratio:.4f} oracle={target:.4f} (3se={3*se:.4f})")
        ok = ok and abs(ratio - target) < 3 * se
    verdict(4, "eigenfunction ratio", ok, "; ".join(details))


def test_criterion_5_q_process_mechanism(oracle):
    op, spec_out = oracle
    qm = feynman_kac.q_marginal(origin(2), planted_trap(), 1.0,
                                [10.0, 20.0, 40.0], 0.01, 10_000, 7)
    doob_r = feynman_kac.doob_final_radii(origin(2), op.grid, spec_out.phi,
                                          1.0, 0.01, 10_000, 8)
    _, p = stats.weighted_ks_2samp(qm.radii, qm.weights_by_T[40.0],
                                   doob_r, np.ones(len(doob_r)))
    ok = p > 0.01
    verdict(5, "Q-process mechanism", ok, f"KS p={p:.4g} (need > 0.01)")


def test_criterion_6_constant_potential_identities():
    c, T = 0.2, 4.0
    z = feynman_kac.estimate_Z(origin(2), ConstantPotential(c), T, 0.01, 1000, 0)
    z_exact = abs(z.z_hat - np.exp(-c * T)) < 1e-12 and z.stderr < 1e-14
    est = feynman_kac.estimate_rho(origin(2), ConstantPotential(c),
                                   [2.0, 4.0, 8.0], 0.01, 1000, 0)
    rho_exact = abs(est.rho_hat - c) < 1e-12
    qm = feynman_kac.q_marginal(origin(2), ConstantPotential(c), 1.0,
                                [4.0, 8.0], 0.01, 10_000, 1)
    rng = np.random.default_rng(2)
    r0 = np.zeros(10_000)
    u0 = np.tile([1.0, 0.0], (10_000, 1))
    free = diffusion.ensemble_walk(r0, u0, 100, 0.01, rng)
    _, p = stats.weighted_ks_2samp(qm.radii, qm.weights_by_T[8.0],
                                   free.r, np.ones(10_000))
    ok = z_exact and rho_exact and p > 0.01
    verdict(6, "constant-potential identities", ok,
            f"Z exact={z_exact}, rho exact={rho_exact}, free-marginal KS p={p:.4g}")


def test_criterion_7_born_and_contour(oracle):
    op, spec_out = oracle
    z = spec_out.rho + 0.15j
    w = np.ones(op.m)
    born, _ = spectral.born_resolvent_apply(op, z, w, 60)
    direct = spectral.direct_resolvent_solve(op, z, w)
    diff = born - direct
    born_rel = np.sqrt(op.weighted_dot(diff, diff) / op.weighted_dot(direct, direct))
    vec, rayleigh = spectral.contour_projector(op, spec_out.rho,
                                               spec_out.gap / 2.0, 64)
    vec_err = op.weighted_norm(vec - spec_out.phi)
    ray_err = abs(rayleigh - spec_out.rho)
    big = spectral.build_radial_operator(2, 30.0, 3000,
                                         lambda r: 100.0 * trap_radial(r))
    try:
        spectral.born_resolvent_apply(big, z, w, 60)
        diverged = False
    except spectral.BornDivergenceError:
        diverged = True
    ok = born_rel < 1e-8 and vec_err < 1e-8 and ray_err < 1e-10 and diverged
    verdict(7, "Born series and contour projector", ok,
            f"born rel={born_rel:.2e}, vec err={vec_err:.2e}, "
            f"rayleigh err={ray_err:.2e}, 100x diverges={diverged}")


def test_criterion_8_fock_isometry():
    ok = True
    details = []
    for v in (0.5, 1.0, 2.0):
        radius = fock.radius_for_volume(2, v)
        region = fock.BallRegion(origin(2), radius)
        for name in ("count", "void"):
            rep = fock.isometry_check(name, region, 2, mc_samples=100_000,
                                      seed=0)
            details.append(f"{name}@v={v:g}: rel={rep['rel_error']:.4f}")
            ok = ok and rep["rel_error"] < 0.02
    verdict(8, "Fock isometry", ok, "; ".join(details))


def test_criterion_9_ppp_law():
    rng = np.random.default_rng(9)
    n = 10_000
    mean = ball_volume(2, 2.0)
    counts = np.empty(n, dtype=int)
    inner = np.empty(n)
    outer = np.empty(n)
    for i in range(n):
        config = sample_configuration(2, 2.0, 1.0, rng)
        counts[i] = len(config)
        r = geometry.radius_batch(config.points)
        inner[i] = np.sum(r < 1.0)
        outer[i] = np.sum(r >= 1.0)
    _, p = stats.chisquare_poisson(counts, mean)
    corr = np.corrcoef(inner, outer)[0, 1]
    ok = p > 0.01 and abs(corr) < 3.0 / np.sqrt(n)
    verdict(9, "PPP law", ok,
            f"chi-square p={p:.4g}, annuli corr={corr:.4f} (3/sqrt(n)={3/np.sqrt(n):.4f})")


def test_criterion_10_determinism(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n_paths = 200\nt_grid = 2,4,8\nT = 8\nmarginal_time = 0.5\n"
                   "m_cells = 600\nh = 0.01\n")
    outs = []
    for name, workers in (("w1", "1"), ("w4", "4")):
        out = tmp_path / name
        code = cli.main(["full-pipeline", "--config", str(cfg), "--seed", "3",
                         "--workers", workers, "--out", str(out)])
        assert code == 0
        outs.append(out)
    diffs = []
    for f in sorted(outs[0].iterdir()):
        if f.name == "timing.txt":
            continue
        if f.read_bytes() != (outs[1] / f.name).read_bytes():
            diffs.append(f.name)
    ok = not diffs
    verdict(10, "determinism", ok,
            "all artifacts byte-identical across worker counts" if ok
            else f"differing artifacts: {diffs}")
