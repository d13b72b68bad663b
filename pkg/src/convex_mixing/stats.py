"""Statistical verdicts for the simulation experiments.

Raw coupling or exit times become survival curves with distribution-free
Dvoretzky-Kiefer-Wolfowitz bands; a bound claim becomes a
VerificationReport whose verdict is PASS exactly when the empirical
curve stays below the bound plus the band at every grid time.  Because
the band is uniform over the whole curve, one experiment yields one
verdict with no multiplicity correction.

Every verification is re-run with the coupling threshold halved and the
verdict only counts as stable if it survives that re-run with a curve
shift inside the band; this guards against threshold-induced false
passes.

The histogram total-variation estimator is deliberately quarantined: it
carries an upward bias of order sqrt(n_bins / N) and is reported as an
estimate with that caveat, never used as a pass/fail bound.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .bounds import BoundCurve, evaluate_bound_curve, tv_bound_stationary
from .coupling import (outcome_times, run_comparison_Z_replicates,
                       run_coupling_replicates, simulate_reflected_paths)
from .geometry import ConvexBody
from .streams import as_noise

NOISE_FLOOR_SIGMAS = 3.0   # drop decay points with |mean| < 3 stderr
_GRID_MATCH_TOL = 1e-12


def dkw_halfwidth(alpha, n):
    """Uniform empirical-CDF band half-width sqrt(ln(2/alpha) / (2 n))."""
    if not 0.0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 0.5)")
    if n < 1:
        raise ValueError("n must be positive")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


@dataclass(frozen=True)
class SurvivalCurve:
    """Empirical survival on a time grid with a DKW band.

    Censored samples (still alive at their horizon) count as exceeding
    every grid time, so they inflate, never deflate, the survival
    estimate; the grid is rejected when it pokes past the censoring
    horizon, where that accounting would stop being an upper estimate.
    """

    t_grid: np.ndarray
    survival: np.ndarray
    band_halfwidth: float
    n_samples: int
    n_censored: int
    alpha: float

    def display_survival(self):
        """Isotonic (non-increasing) projection for plots and tables.

        The raw counting estimate is already monotone; this exists so
        downstream rounding or post-processing cannot reintroduce
        wiggles.  Tests use the raw field.
        """
        return np.minimum.accumulate(self.survival)


def survival_curve(times, censored, t_grid, alpha=0.01) -> SurvivalCurve:
    """Empirical P(tau > t) on t_grid from samples with censoring flags."""
    times = np.asarray(times, dtype=float)
    censored = np.asarray(censored, dtype=bool)
    if times.shape != censored.shape or times.ndim != 1:
        raise ValueError("times and censored must be matching vectors")
    n = times.size
    if n < 100:
        raise ValueError("need at least 100 samples")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending and nonempty")
    if censored.any():
        horizon = float(times[censored].min())
        if t_grid[-1] > horizon * (1.0 + 1e-12):
            raise ValueError(
                f"t_grid reaches {t_grid[-1]:g} beyond the censoring "
                f"horizon {horizon:g}; the band is invalid there")
    alive = (times[None, :] > t_grid[:, None]) | censored[None, :]
    surv = alive.mean(axis=1)
    return SurvivalCurve(t_grid=t_grid, survival=surv,
                         band_halfwidth=dkw_halfwidth(alpha, n),
                         n_samples=int(n), n_censored=int(censored.sum()),
                         alpha=float(alpha))


@dataclass(frozen=True)
class VerificationReport:
    """The executable form of a bound claim.

    margin[i] = bound[i] + band - empirical[i]; verdict is PASS iff the
    margin is nonnegative on the whole grid.  sensitivity_verdict is
    filled by experiment runners that re-run at half the coupling
    threshold; None means no sensitivity protocol applied.
    """

    experiment_id: str
    bound_curve: BoundCurve
    empirical: SurvivalCurve
    margin: np.ndarray
    verdict: str
    sensitivity_verdict: Optional[str] = None


def verify_bound(empirical: SurvivalCurve, bound: BoundCurve,
                 experiment_id="") -> VerificationReport:
    """PASS iff empirical - band <= bound at every grid point."""
    if empirical.t_grid.shape != bound.t_grid.shape or np.any(
            np.abs(empirical.t_grid - bound.t_grid)
            > _GRID_MATCH_TOL * np.maximum(1.0, np.abs(bound.t_grid))):
        raise ValueError("empirical and bound curves use different grids")
    margin = bound.values + empirical.band_halfwidth - empirical.survival
    verdict = "PASS" if bool(np.all(margin >= 0.0)) else "FAIL"
    return VerificationReport(experiment_id=experiment_id, bound_curve=bound,
                              empirical=empirical, margin=margin,
                              verdict=verdict)


def curve_shift(a: SurvivalCurve, b: SurvivalCurve):
    """Largest pointwise survival difference between two curves."""
    if a.t_grid.shape != b.t_grid.shape or np.any(
            np.abs(a.t_grid - b.t_grid) > _GRID_MATCH_TOL):
        raise ValueError("curves use different grids")
    return float(np.abs(a.survival - b.survival).max())


def verification_report_json(report: VerificationReport, *, params,
                             seed) -> str:
    """Canonical JSON for a report: stable key order, shortest-roundtrip
    floats, LF newline; identical inputs give identical bytes."""
    payload = {
        "schema_version": "1",
        "id": report.experiment_id,
        "params": params,
        "t_grid": [float(t) for t in report.empirical.t_grid],
        "bound": [float(v) for v in report.bound_curve.values],
        "empirical": [float(v) for v in report.empirical.survival],
        "band": float(report.empirical.band_halfwidth),
        "margin": [float(v) for v in report.margin],
        "verdict": report.verdict,
        "sensitivity_verdict": report.sensitivity_verdict,
        "seed": seed,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# Verification experiments (simulation + verdict + sensitivity re-run)

@dataclass(frozen=True)
class PairVerification:
    """A pairwise coupling-bound verification with its sensitivity re-run."""

    report: VerificationReport
    outcomes: list
    outcomes_half_eps: list
    curve: SurvivalCurve
    curve_half_eps: SurvivalCurve
    epsilon_couple: float
    shift: float


def run_pair_verification(body: ConvexBody, x, y, *, n_replicates, h, t_grid,
                          t_max=None, alpha=0.01, rng, epsilon_couple=None,
                          drift=None, threads=None,
                          experiment_id="pair") -> PairVerification:
    """Check empirical coupling survival against the pairwise TV bound.

    Runs the mirror coupling, compares P(tau > t) with F_d(4t, d - |x-y|)
    plus the DKW band, then repeats with epsilon_couple halved; the
    sensitivity verdict is PASS when the halved run also passes and the
    survival curve moved by at most the band.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_max is None:
        t_max = float(t_grid[-1])
    outcomes = run_coupling_replicates(
        body, x, y, n_replicates, h=h, epsilon_couple=epsilon_couple,
        t_max=t_max, rng=rng, drift=drift, threads=threads)
    eps = outcomes[0].epsilon_couple
    curve = survival_curve(*outcome_times(outcomes), t_grid, alpha)
    dist = float(np.linalg.norm(x - y))
    bound = evaluate_bound_curve("F_pair", body.diameter, t_grid,
                                 dist_xy=min(dist, body.diameter))
    report = verify_bound(curve, bound, experiment_id)

    outcomes_half = run_coupling_replicates(
        body, x, y, n_replicates, h=h, epsilon_couple=eps / 2.0,
        t_max=t_max, rng=rng, drift=drift, threads=threads)
    curve_half = survival_curve(*outcome_times(outcomes_half), t_grid, alpha)
    half_verdict = verify_bound(curve_half, bound, experiment_id).verdict
    shift = curve_shift(curve, curve_half)
    stable = half_verdict == "PASS" and shift <= curve.band_halfwidth
    report = replace(report,
                     sensitivity_verdict="PASS" if stable else "FAIL")
    return PairVerification(report=report, outcomes=outcomes,
                            outcomes_half_eps=outcomes_half, curve=curve,
                            curve_half_eps=curve_half, epsilon_couple=eps,
                            shift=shift)


@dataclass(frozen=True)
class ZDominationReport:
    """Coupling-time survival against the 1D comparison process.

    verdict is PASS iff coupling survival <= Z survival plus both bands
    at every grid time; the sensitivity re-run halves the coupling
    threshold only (Z has no threshold).
    """

    experiment_id: str
    coupling_curve: SurvivalCurve
    z_curve: SurvivalCurve
    margin: np.ndarray
    verdict: str
    sensitivity_verdict: Optional[str]
    r0: float
    epsilon_couple: float
    shift: float


def run_z_domination(body: ConvexBody, x, y, drift, *, n_replicates, h,
                     t_grid, t_max=None, alpha=0.01, rng, epsilon_couple=None,
                     threads=None, experiment_id="z_domination"):
    """Statistically check that the separation dies no later than Z.

    The coupled pair and the comparison process share the master seed
    but occupy disjoint replicate ranges of the counter stream, so the
    two samples are independent.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_max is None:
        t_max = float(t_grid[-1])
    r0 = float(np.linalg.norm(x - y))
    if not r0 > 0:
        raise ValueError("x and y must be distinct")
    outcomes = run_coupling_replicates(
        body, x, y, n_replicates, h=h, epsilon_couple=epsilon_couple,
        t_max=t_max, rng=rng, drift=drift, threads=threads)
    eps = outcomes[0].epsilon_couple
    curve = survival_curve(*outcome_times(outcomes), t_grid, alpha)
    z_times, z_cens = run_comparison_Z_replicates(
        drift.gamma, r0, n_replicates, h=h, t_max=t_max, rng=rng,
        threads=threads, replicate_start=int(n_replicates))
    z_curve = survival_curve(z_times, z_cens, t_grid, alpha)
    margin = (z_curve.survival + z_curve.band_halfwidth
              + curve.band_halfwidth - curve.survival)
    verdict = "PASS" if bool(np.all(margin >= 0.0)) else "FAIL"

    outcomes_half = run_coupling_replicates(
        body, x, y, n_replicates, h=h, epsilon_couple=eps / 2.0,
        t_max=t_max, rng=rng, drift=drift, threads=threads)
    curve_half = survival_curve(*outcome_times(outcomes_half), t_grid, alpha)
    margin_half = (z_curve.survival + z_curve.band_halfwidth
                   + curve_half.band_halfwidth - curve_half.survival)
    shift = curve_shift(curve, curve_half)
    stable = bool(np.all(margin_half >= 0.0)) and shift <= curve.band_halfwidth
    return ZDominationReport(
        experiment_id=experiment_id, coupling_curve=curve, z_curve=z_curve,
        margin=margin, verdict=verdict,
        sensitivity_verdict="PASS" if stable else "FAIL", r0=r0,
        epsilon_couple=eps, shift=shift), outcomes, (z_times, z_cens)


def z_domination_json(report: ZDominationReport, *, params, seed) -> str:
    payload = {
        "schema_version": "1",
        "id": report.experiment_id,
        "params": params,
        "t_grid": [float(t) for t in report.coupling_curve.t_grid],
        "coupling_survival": [float(v) for v in
                              report.coupling_curve.survival],
        "z_survival": [float(v) for v in report.z_curve.survival],
        "coupling_band": float(report.coupling_curve.band_halfwidth),
        "z_band": float(report.z_curve.band_halfwidth),
        "margin": [float(v) for v in report.margin],
        "verdict": report.verdict,
        "sensitivity_verdict": report.sensitivity_verdict,
        "seed": seed,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


def hitprob_report_json(report, *, params, seed) -> str:
    payload = {
        "schema_version": "1",
        "id": "hitprob",
        "params": params,
        "u_estimate": float(report.u_estimate),
        "u_stderr": float(report.u_stderr),
        "stationary_average_estimate":
            float(report.stationary_average_estimate),
        "stationary_stderr": float(report.stationary_stderr),
        "bound_at_t_free_avg": float(report.bound_at_t_free_avg),
        "bound_at_t_free_worst": float(report.bound_at_t_free_worst),
        "bound_stderr": float(report.bound_stderr),
        "censored_mass_x": float(report.censored_mass_x),
        "censored_mass_stationary": float(report.censored_mass_stationary),
        "t_free": float(report.t_free),
        "n_paths": int(report.n_paths),
        "seed": seed,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"


# ---------------------------------------------------------------------------
# Histogram total variation

def empirical_tv_1d(samples_a, samples_b=None, *, uniform_d=None,
                    n_bins=None):
    """Histogram TV estimate between samples and a reference.

    The reference is either a second sample or the exact uniform law on
    [0, d] (pass uniform_d=d).  Returns (estimate, bias_note); the note
    spells out the upward bias of order sqrt(n_bins / N), which is why
    this value must be treated as an estimate and never as a bound.
    """
    a = np.asarray(samples_a, dtype=float).ravel()
    if (samples_b is None) == (uniform_d is None):
        raise ValueError("pass exactly one of samples_b or uniform_d")
    if a.size < 1000:
        raise ValueError("need at least 1e3 samples per side")
    if samples_b is not None:
        b = np.asarray(samples_b, dtype=float).ravel()
        if b.size < 1000:
            raise ValueError("need at least 1e3 samples per side")
        n_eff = min(a.size, b.size)
        bins = int(n_bins) if n_bins else math.ceil(n_eff ** (1.0 / 3.0))
        lo = min(a.min(), b.min())
        hi = max(a.max(), b.max())
        if hi <= lo:
            hi = lo + 1.0
        edges = np.linspace(lo, hi, bins + 1)
        pa = np.histogram(a, bins=edges)[0] / a.size
        pb = np.histogram(b, bins=edges)[0] / b.size
    else:
        d = float(uniform_d)
        if not d > 0:
            raise ValueError("uniform_d must be positive")
        if a.min() < 0.0 or a.max() > d:
            raise ValueError("samples leave [0, d]")
        n_eff = a.size
        bins = int(n_bins) if n_bins else math.ceil(n_eff ** (1.0 / 3.0))
        edges = np.linspace(0.0, d, bins + 1)
        pa = np.histogram(a, bins=edges)[0] / a.size
        pb = np.full(bins, 1.0 / bins)
    est = 0.5 * float(np.abs(pa - pb).sum())
    note = (f"histogram TV on {bins} bins from N={n_eff}: upward bias of "
            f"order sqrt(bins/N) ~ {math.sqrt(bins / n_eff):.3f}; "
            "treat as an estimate, not a bound")
    return est, note


# ---------------------------------------------------------------------------
# Correlation-decay rate experiment

@dataclass(frozen=True)
class L2DecayResult:
    slope: float
    intercept: float
    t_grid: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    used: np.ndarray          # mask of grid points above the noise floor
    n_paths: int


def _sample_tilted_starts(d, n_paths, noise):
    """Starts with density (1 + cos(pi x / d)) / d on [0, d].

    Inverse-CDF sampling by bisection on
    G(x) = (x + (d/pi) sin(pi x / d)) / d, one uniform per replicate
    (step 0, slot 1, clear of the increment slot 0).
    """
    u = noise.uniforms(0, np.arange(n_paths), [1])[:, 0]
    lo = np.zeros(n_paths)
    hi = np.full(n_paths, d)
    for _ in range(60):  # 2^-60 d resolution
        mid = 0.5 * (lo + hi)
        g = (mid + (d / math.pi) * np.sin(math.pi * mid / d)) / d
        high = g > u
        hi = np.where(high, mid, hi)
        lo = np.where(high, lo, mid)
    return 0.5 * (lo + hi)


def l2_decay_experiment(d, t_grid, n_paths, h, rng) -> L2DecayResult:
    """Fit the decay rate of E cos(pi X_t / d) for reflected paths on [0, d].

    Starts are drawn from the density proportional to 1 + cos(pi x / d),
    which loads the slowest mode, so the observable decays at exactly
    half the squared spectral gap: E f(X_t) = (1/2) e^{-pi^2 t / (2 d^2)}
    and the fitted slope should be -pi^2 / (2 d^2).  Grid points whose
    mean is within 3 standard errors of zero are dropped from the fit
    (they measure noise, not decay); the surviving points enter a
    weighted least-squares fit with weights (mean/stderr)^2, the inverse
    variance of log|mean|, so the late, noisy end of the curve cannot
    swamp the slope.
    """
    from .geometry import Interval

    if not d > 0:
        raise ValueError("d must be positive")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be ascending with at least 2 points")
    rate = math.pi ** 2 / (2.0 * d * d)
    if rate * (t_grid[-1] - t_grid[0]) < math.log(10.0):
        raise ValueError("t_grid must span at least one decade of decay")
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    noise = as_noise(rng)
    starts = _sample_tilted_starts(d, int(n_paths), noise)[:, None]
    body = Interval(0.0, d)
    paths = simulate_reflected_paths(body, starts, t_grid, h, noise)
    f = np.cos(math.pi * paths[:, :, 0] / d)
    means = f.mean(axis=0)
    stderrs = f.std(axis=0, ddof=1) / math.sqrt(n_paths)
    used = np.abs(means) >= NOISE_FLOOR_SIGMAS * stderrs
    if used.sum() < 2:
        raise ValueError("decay is below the noise floor almost everywhere; "
                         "increase n_paths")
    weights = (means[used] / stderrs[used]) ** 2
    slope, intercept = np.polyfit(t_grid[used], np.log(np.abs(means[used])),
                                  1, w=np.sqrt(weights))
    return L2DecayResult(slope=float(slope), intercept=float(intercept),
                         t_grid=t_grid, means=means, stderrs=stderrs,
                         used=used, n_paths=int(n_paths))


# ---------------------------------------------------------------------------
# Hitting-probability demonstration

@dataclass(frozen=True)
class HitProbReport:
    u_estimate: float
    u_stderr: float
    stationary_average_estimate: float
    stationary_stderr: float
    bound_at_t_free_avg: float
    bound_at_t_free_worst: float
    bound_stderr: float
    censored_mass_x: float
    censored_mass_stationary: float
    t_free: float
    n_paths: int


def _min_distance(body_a: ConvexBody, body_b: ConvexBody, iters=256):
    """Distance between two convex bodies by alternating projections."""
    p = np.asarray(body_a.center(), dtype=float)
    for _ in range(iters):
        q = body_b.project(p)
        p = body_a.project(q)
    return float(np.linalg.norm(p - body_b.project(p)))


def _first_hit_fractions(body, set_a, set_b, starts, h, t_cap, noise,
                         replicate_start=0):
    """(frac_a, frac_b, frac_censored) of first entry into A vs B."""
    pos = np.array(starts, dtype=float)
    n, dim = pos.shape
    idx = np.arange(replicate_start, replicate_start + n)
    slots = np.arange(dim)
    sqrt_h = math.sqrt(h)
    n_steps = int(math.ceil(t_cap / h - 1e-9))
    hit_a = np.zeros(n, dtype=bool)
    hit_b = np.zeros(n, dtype=bool)
    alive = np.arange(n)
    # starts already inside a target count as immediate hits
    in_a = set_a.contains(pos)
    in_b = set_b.contains(pos)
    hit_a[in_a] = True
    hit_b[in_b] = True
    alive = alive[~(in_a | in_b)]
    for step in range(n_steps):
        if alive.size == 0:
            break
        dw = noise.normals(step, idx[alive], slots) * sqrt_h
        pos[alive] = body.project(pos[alive] + dw)
        in_a = set_a.contains(pos[alive])
        in_b = set_b.contains(pos[alive])
        hit_a[alive[in_a]] = True
        hit_b[alive[in_b]] = True
        alive = alive[~(in_a | in_b)]
    return hit_a.mean(), hit_b.mean(), alive.size / n


def hitprob_experiment(body: ConvexBody, set_a: ConvexBody,
                       set_b: ConvexBody, x, t_free, n_paths, h, rng,
                       t_cap=None, n_bound_samples=2000) -> HitProbReport:
    """Estimate u(x) = P(first entry into A u B lands in A) and compare
    it with its stationary average.

    The stationary average is estimated by launching the same number of
    paths from uniform starts; tv_bound_stationary(t_free) is reported
    alongside, since u(x) ~ integral of u d(sigma) is only certified
    once the law at t_free is close to uniform.  Paths that never enter
    A u B before t_cap are reported as censored mass, not dropped
    silently.
    """
    x = np.asarray(x, dtype=float)
    if not body.contains(x):
        raise ValueError("x must lie in the closed body")
    if set_a.contains(x) or set_b.contains(x):
        raise ValueError("x must start outside both target sets")
    d = body.diameter
    scale = max(d, 1.0)
    if _min_distance(set_a, set_b) <= 1e-12 * scale:
        raise ValueError("target sets must be disjoint")
    for name, s in (("set_a", set_a), ("set_b", set_b)):
        if not body.contains(s.center()):
            raise ValueError(f"{name} must lie inside the body")
    if not t_free > 0:
        raise ValueError("t_free must be positive")
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    if t_cap is None:
        t_cap = 50.0 * max(float(t_free), d * d)
    seed_int = rng if isinstance(rng, (int, np.integer)) else None
    noise = as_noise(rng)
    # geometry sampling keeps its own generator so rejection loops can
    # draw freely without disturbing the counter stream
    geom_rng = np.random.default_rng(
        noise.seed if seed_int is None else int(seed_int))

    starts_x = np.tile(x, (int(n_paths), 1))
    fa, fb, cens_x = _first_hit_fractions(body, set_a, set_b, starts_x, h,
                                          t_cap, noise)
    decided = fa + fb
    u_est = fa / decided if decided > 0 else math.nan
    u_se = (math.sqrt(u_est * (1.0 - u_est) / (decided * n_paths))
            if decided > 0 else math.nan)

    starts_u, _ = body.sample_uniform_many(int(n_paths), geom_rng)
    fa_s, fb_s, cens_s = _first_hit_fractions(
        body, set_a, set_b, starts_u, h, t_cap, noise,
        replicate_start=int(n_paths))
    decided_s = fa_s + fb_s
    s_est = fa_s / decided_s if decided_s > 0 else math.nan
    s_se = (math.sqrt(s_est * (1.0 - s_est) / (decided_s * n_paths))
            if decided_s > 0 else math.nan)

    avg, worst, bse = tv_bound_stationary(body, float(t_free), x,
                                          n_bound_samples, geom_rng)
    return HitProbReport(
        u_estimate=float(u_est), u_stderr=float(u_se),
        stationary_average_estimate=float(s_est), stationary_stderr=float(s_se),
        bound_at_t_free_avg=float(avg), bound_at_t_free_worst=float(worst),
        bound_stderr=float(bse), censored_mass_x=float(cens_x),
        censored_mass_stationary=float(cens_s), t_free=float(t_free),
        n_paths=int(n_paths))
