"""Estimators for the tilted path measure exp(-int_0^T V(X_s) ds).

Survival constants Z_T^x, decay-rate extraction, eigenfunction ratios,
Q-process marginals, a sequential Monte Carlo variant with resampling, and
Doob-transformed path simulation.

Randomness is organized as a fixed fan-out of NUM_STREAMS child streams per
seed; the worker count only sets the thread pool size, so results are
byte-identical for any number of workers, and rerunning with the same seed
gives common random numbers for pairwise comparisons.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from hyptrap import diffusion, geometry, spectral
from hyptrap.geometry import HPoint
from hyptrap.ppp import Configuration, FactorPotential, PotentialField, PotentialSpec
from hyptrap.stats import effective_sample_size

NUM_STREAMS = 16


def _chunk_sizes(n, k=NUM_STREAMS):
    k = min(n, k)
    base = n // k
    sizes = [base + (1 if i < n % k else 0) for i in range(k)]
    return sizes


def _chunk_rngs(seed, k):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _run_chunks(fn, sizes, rngs, workers=1):
    if workers <= 1:
        return [fn(n, rng) for n, rng in zip(sizes, rngs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, n, rng) for n, rng in zip(sizes, rngs)]
        return [f.result() for f in futs]


@dataclass
class PathEnsemble:
    """Sufficient statistics of N tilted paths from a common start."""

    log_weights: np.ndarray           # -int_0^T V per path, in [-T*v_max, 0]
    final_radii: np.ndarray           # geodesic radius of X_T per path
    final_dirs: np.ndarray            # unit directions in T_o H^d
    snapshots: dict                   # step -> (radii, directions, integrals)
    chunk_slices: list                # slices delimiting the independent streams
    meta: dict

    @property
    def n_paths(self):
        return len(self.log_weights)

    @property
    def weights(self):
        return np.exp(self.log_weights)

    @property
    def ess(self):
        return effective_sample_size(self.weights)


@dataclass
class ZEstimate:
    z_hat: float
    stderr: float
    ensemble: PathEnsemble

    @property
    def log_z(self):
        return float(np.log(self.z_hat))


@dataclass
class GroundStateEstimate:
    """Decay rate from the tail of -log Z_T plus optional eigenfunction ratios."""

    rho_hat: float
    rho_stderr: float
    phi_ratio: list = field(default_factory=list)  # (radius, ratio, stderr)
    diagnostics: dict = field(default_factory=dict)


def simulate_tilted_ensemble(x0: HPoint, potential: PotentialField, T, h, N, seed,
                             snapshot_times=(), drift_fn=None, workers=1) -> PathEnsemble:
    """N independent walks from x0 with streaming trapezoid potential integrals."""
    n_steps = int(round(T / h))
    if abs(n_steps * h - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integral number of steps")
    snap_steps = sorted({int(round(t / h)) for t in snapshot_times})
    for t, k in zip(sorted(snapshot_times), snap_steps):
        if abs(k * h - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"snapshot time {t} not on the step grid")
    sizes = _chunk_sizes(N)
    rngs = _chunk_rngs(seed, len(sizes))

    r_start, u_start = diffusion.polar_from_ambient(x0.z[None, :])

    def job(n, rng):
        r0 = np.full(n, r_start[0])
        u0 = np.tile(u_start[0], (n, 1))
        return diffusion.ensemble_walk(r0, u0, n_steps, h, rng, potential=potential,
                                       snapshot_steps=snap_steps, drift_fn=drift_fn)

    results = _run_chunks(job, sizes, rngs, workers=workers)
    radii = np.concatenate([r.r for r in results])
    dirs = np.concatenate([r.u for r in results])
    integrals = np.concatenate([r.integrals for r in results])
    snapshots = {
        k: tuple(
            np.concatenate([r.snapshots[k][j] for r in results]) for j in range(3)
        )
        for k in snap_steps
    }
    bounds = np.cumsum([0] + sizes)
    slices = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    meta = {"T": T, "h": h, "N": N, "seed": seed, "start": x0.z.tolist()}
    return PathEnsemble(-integrals, radii, dirs, snapshots, slices, meta)


def path_potential_integral(path: diffusion.PathSample, potential: PotentialField):
    """Trapezoid rule for int_0^T V(X_s) ds along a stored path."""
    v = potential.evaluate(path.points)
    hgrid = np.diff(path.times)
    return float(np.sum(0.5 * hgrid * (v[:-1] + v[1:])))


def _mean_stderr(weights):
    n = len(weights)
    m = float(np.mean(weights))
    s = float(np.std(weights, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return m, s


def estimate_Z(x: HPoint, potential: PotentialField, T, h, N, seed, workers=1) -> ZEstimate:
    """Plain Monte Carlo for Z_T^x = E^x[exp(-int_0^T V(X_s) ds)]."""
    if N < 2:
        raise ValueError("need at least two paths")
    ens = simulate_tilted_ensemble(x, potential, T, h, N, seed, workers=workers)
    z, se = _mean_stderr(ens.weights)
    return ZEstimate(z, se, ens)


# ---------------------------------------------------------------------------
# sequential Monte Carlo variant
# ---------------------------------------------------------------------------


@dataclass
class SMCResult:
    z_hat: float
    stderr: float
    ess_traces: list    # one ESS trace per independent particle system
    n_resamples: int


def smc_estimate_Z(x: HPoint, potential: PotentialField, T, h, N, resample_period,
                   seed, workers=1) -> SMCResult:
    """Particle-system estimator of the same functional as estimate_Z.

    N particles split into NUM_STREAMS independent systems; each system
    resamples multinomially whenever its ESS drops below half its size at a
    checkpoint, and contributes the unbiased product-of-mean-weights
    estimator.  The returned value is the mean over systems.
    """
    period_steps = int(round(resample_period / h))
    if period_steps < 1 or abs(period_steps * h - resample_period) > 1e-9:
        raise ValueError("resample_period must be a positive multiple of h")
    n_steps = int(round(T / h))
    sizes = _chunk_sizes(N)
    rngs = _chunk_rngs(seed, len(sizes))
    counters = {"resamples": 0}

    r_start, u_start = diffusion.polar_from_ambient(x.z[None, :])

    def job(n, rng):
        r = np.full(n, r_start[0])
        u = np.tile(u_start[0], (n, 1))
        log_inc = np.zeros(n)
        log_factor = 0.0
        v_prev = potential.evaluate_polar(r, u)
        trace = []
        k = 0
        while k < n_steps:
            r, u = diffusion.step_polar(r, u, h, rng)
            v_cur = potential.evaluate_polar(r, u)
            log_inc -= 0.5 * h * (v_prev + v_cur)
            v_prev = v_cur
            k += 1
            if k % period_steps == 0 or k == n_steps:
                w = np.exp(log_inc)
                assert np.all(np.isfinite(w)) and w.sum() > 0
                ess = effective_sample_size(w)
                trace.append(ess)
                if ess < n / 2.0 and k < n_steps:
                    log_factor += np.log(np.mean(w))
                    idx = rng.choice(n, size=n, p=w / w.sum())
                    idx.sort()  # fixed ordering for reproducibility
                    r = r[idx]
                    u = u[idx]
                    v_prev = v_prev[idx]
                    log_inc[:] = 0.0
                    counters["resamples"] += 1
        return float(np.exp(log_factor) * np.mean(np.exp(log_inc))), trace

    results = _run_chunks(job, sizes, rngs, workers=workers)
    z_per_system = np.array([z for z, _ in results])
    traces = [t for _, t in results]
    z = float(np.mean(z_per_system))
    se = float(np.std(z_per_system, ddof=1) / np.sqrt(len(z_per_system)))
    return SMCResult(z, se, traces, counters["resamples"])


# ---------------------------------------------------------------------------
# decay rate and eigenfunction ratios
# ---------------------------------------------------------------------------


def _chunk_log_z(ensemble: PathEnsemble, step):
    integrals = ensemble.snapshots[step][2]
    return np.array([np.log(np.mean(np.exp(-integrals[s]))) for s in ensemble.chunk_slices])


def _wls_slope(ts, ys, sigmas):
    sig = np.where(np.asarray(sigmas) > 0, sigmas, np.max(sigmas) if np.max(sigmas) > 0 else 1.0)
    w = 1.0 / sig**2
    W = np.sum(w)
    tbar = np.sum(w * ts) / W
    ybar = np.sum(w * ys) / W
    denom = np.sum(w * (ts - tbar) ** 2)
    return float(np.sum(w * (ts - tbar) * (ys - ybar)) / denom)


def estimate_rho(x: HPoint, potential: PotentialField, T_grid, h, N, seed,
                 workers=1) -> GroundStateEstimate:
    """Decay rate of Z_T by weighted least squares on -log Z_T vs T.

    Slope uncertainty comes from a drop-one-stream jackknife, which respects
    the correlation of the Z_T estimates across horizons (common paths).
    Nested-window slopes are reported as the convergence diagnostic.
    """
    T_grid = sorted(T_grid)
    if len(T_grid) < 3:
        raise ValueError("need at least three horizons")
    ens = simulate_tilted_ensemble(x, potential, max(T_grid), h, N, seed,
                                   snapshot_times=T_grid, workers=workers)
    steps = [int(round(t / h)) for t in T_grid]
    ts = np.asarray(T_grid, dtype=float)
    log_z = np.empty(len(steps))
    sigmas = np.empty(len(steps))
    per_chunk = np.empty((len(ens.chunk_slices), len(steps)))
    for j, k in enumerate(steps):
        integrals = ens.snapshots[k][2]
        w = np.exp(-integrals)
        m, se = _mean_stderr(w)
        log_z[j] = np.log(m)
        sigmas[j] = se / m
        per_chunk[:, j] = _chunk_log_z(ens, k)
    rho_hat = _wls_slope(ts, -log_z, sigmas)
    # drop-one-stream jackknife on the slope
    n_c = per_chunk.shape[0]
    jack = np.empty(n_c)
    counts = np.array([s.stop - s.start for s in ens.chunk_slices], dtype=float)
    for c in range(n_c):
        keep = np.arange(n_c) != c
        # recombine chunk means into drop-one log Z
        zs = np.exp(per_chunk[keep])
        wts = counts[keep] / counts[keep].sum()
        jack[c] = _wls_slope(ts, -np.log(np.sum(zs * wts[:, None], axis=0)), sigmas)
    rho_se = float(np.sqrt((n_c - 1) / n_c * np.sum((jack - np.mean(jack)) ** 2)))
    # nested tail windows: slope over T_grid[k:] for each admissible k
    window_slopes = [
        _wls_slope(ts[k:], -log_z[k:], sigmas[k:]) for k in range(len(ts) - 1)
    ]
    spread = max(window_slopes) - min(window_slopes)
    flagged = spread > 3.0 * max(rho_se, 1e-15) + 1e-12
    diag = {
        "window_slopes": window_slopes,
        "slope_spread": spread,
        "flagged": bool(flagged),
        "log_z": log_z.tolist(),
        "T_grid": list(ts),
    }
    return GroundStateEstimate(rho_hat, rho_se, diagnostics=diag)


def canonical_axis_point(d, r):
    z = np.zeros(d + 1)
    z[0] = np.cosh(r)
    z[1] = np.sinh(r)
    return HPoint(z)


def estimate_phi_ratio(probes, spec: PotentialSpec, config: Configuration, T, h, N,
                       seed, workers=1):
    """Ratios Z_T^{x_j} / Z_T^o as generalized-eigenfunction ratios.

    Each probe is canonicalized: a K-rotation takes it to the e_1 axis and is
    applied to the configuration instead, so probe sets differing by a common
    rotation give literally identical estimates.  All probes share the same
    seed (common random numbers).
    """
    table = []
    base = estimate_Z(geometry.origin(config.d), FactorPotential(spec, config),
                      T, h, N, seed, workers=workers)
    base_chunks = np.array([
        np.mean(base.ensemble.weights[s]) for s in base.ensemble.chunk_slices
    ])
    for probe in probes:
        r = geometry.distance(geometry.origin(config.d), probe)
        k = geometry.rotation_to_axis(probe)
        rot_config = config.rotate(k)
        start = canonical_axis_point(config.d, r)
        est = estimate_Z(start, FactorPotential(spec, rot_config), T, h, N, seed,
                         workers=workers)
        chunks = np.array([
            np.mean(est.ensemble.weights[s]) for s in est.ensemble.chunk_slices
        ])
        ratio = est.z_hat / base.z_hat
        # paired jackknife over the common streams
        n_c = len(chunks)
        jack = np.empty(n_c)
        for c in range(n_c):
            keep = np.arange(n_c) != c
            jack[c] = np.mean(chunks[keep]) / np.mean(base_chunks[keep])
        se = float(np.sqrt((n_c - 1) / n_c * np.sum((jack - jack.mean()) ** 2)))
        if ratio <= 0:
            raise RuntimeError("eigenfunction ratio must be positive")
        table.append((float(r), float(ratio), se))
    return table


# ---------------------------------------------------------------------------
# Q-process marginals and Doob simulation
# ---------------------------------------------------------------------------


@dataclass
class QMarginal:
    """Radial time-t marginal of the tilted measure at several horizons."""

    t: float
    radii: np.ndarray              # radius of X_t per path
    weights_by_T: dict             # horizon -> normalized weights
    sup_distances: list            # between consecutive-horizon weighted CDFs

    def weights(self, T):
        return self.weights_by_T[T]


def q_marginal(x: HPoint, potential: PotentialField, t, T_grid, h, N, seed,
               workers=1) -> QMarginal:
    """Weighted X_t marginal for each horizon T, with a stabilization record."""
    T_grid = sorted(T_grid)
    if t >= min(T_grid):
        raise ValueError("marginal time must precede every horizon")
    ens = simulate_tilted_ensemble(x, potential, max(T_grid), h, N, seed,
                                   snapshot_times=[t] + list(T_grid), workers=workers)
    step_t = int(round(t / h))
    radii = ens.snapshots[step_t][0]
    weights_by_T = {}
    for T in T_grid:
        integ = ens.snapshots[int(round(T / h))][2]
        w = np.exp(-integ)
        weights_by_T[T] = w / w.sum()
    from hyptrap.stats import weighted_cdf

    sup_d = []
    for T1, T2 in zip(T_grid[:-1], T_grid[1:]):
        grid = np.sort(radii)
        c1 = weighted_cdf(radii, weights_by_T[T1], grid)
        c2 = weighted_cdf(radii, weights_by_T[T2], grid)
        sup_d.append(float(np.max(np.abs(c1 - c2))))
    return QMarginal(t, radii, weights_by_T, sup_d)


def doob_simulate(x0: HPoint, grid, phi, rho, T, h, rng) -> diffusion.PathSample:
    """One path of the Doob-transformed diffusion (1/2)Lap + (log phi)' d_r.

    `phi` is a positive radial eigenfunction tabulated on `grid` (from the
    spectral oracle); `rho` is carried along for bookkeeping only, since the
    transformed generator depends on the eigenfunction alone.
    """
    drift = spectral.log_derivative_interpolant(grid, phi)
    return diffusion.simulate_path(x0, T, h, rng, drift_fn=drift)


def doob_final_radii(x0: HPoint, grid, phi, T, h, N, seed, workers=1):
    """Terminal radii of N Doob-transformed paths (no potential weighting)."""
    drift = spectral.log_derivative_interpolant(grid, phi)
    ens = simulate_tilted_ensemble(x0, None, T, h, N, seed, drift_fn=drift,
                                   workers=workers)
    return ens.final_radii
