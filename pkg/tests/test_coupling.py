import math

import numpy as np
import pytest
from scipy.special import ndtr

from convex_mixing.bounds import survival_F
from convex_mixing.coupling import (CoupledState, DriftEnvelopeError,
                                    DriftModel, PathState, couple_states,
                                    fold_reflect_1d, mirror_step, ou_drift,
                                    outcome_times, run_comparison_Z_replicates,
                                    run_coupling_replicates,
                                    simulate_comparison_Z,
                                    simulate_coupling_time,
                                    simulate_reflected_paths, step_reflected,
                                    write_outcomes_csv)
from convex_mixing.geometry import Ball, Interval
from convex_mixing.stats import dkw_halfwidth, survival_curve
from convex_mixing.streams import CounterNoise

BIG = Ball([0.0, 0.0], 100.0)  # boundary effectively unreachable
SEG = Interval(0.0, 1.0)


def test_mirror_is_householder_flip():
    cs = couple_states(BIG, [1.0, 0.0], [-1.0, 0.0], epsilon_couple=1e-6)
    assert np.array_equal(cs.eta, [1.0, 0.0])
    g = np.array([0.3, -0.7]) * math.sqrt(1e-3)
    out = mirror_step(BIG, cs, None, 1e-3, g)
    assert np.allclose(out.x_path.position, cs.x_path.position + g, atol=1e-15)
    # component along eta flips, orthogonal component is shared
    expect_y = cs.y_path.position + np.array([-g[0], g[1]])
    assert np.allclose(out.y_path.position, expect_y, atol=1e-15)
    assert out.r == pytest.approx(2.0 + 2.0 * g[0], abs=1e-12)
    assert out.qv_clock == pytest.approx(4.0 * g[0] ** 2, abs=1e-18)
    assert out.phi == pytest.approx(0.0, abs=1e-12)
    assert out.x_path.time == pytest.approx(1e-3)


def test_mirror_orthogonal_noise_preserves_separation():
    cs = couple_states(BIG, [1.0, 0.0], [-1.0, 0.0], epsilon_couple=1e-6)
    g = np.array([0.0, 0.9]) * math.sqrt(1e-3)
    out = mirror_step(BIG, cs, None, 1e-3, g)
    assert np.allclose(out.y_path.position - cs.y_path.position, g)
    assert out.r == pytest.approx(2.0, abs=1e-14)
    assert out.qv_clock == 0.0


def test_mirror_1d_doubles_relative_motion():
    cs = couple_states(SEG, [0.3], [0.7], epsilon_couple=1e-9)
    g = np.array([0.01])
    out = mirror_step(SEG, cs, None, 1e-3, g)
    # eta = (x-y)/r = -1, so Y receives -g and the gap shrinks by 2|g|
    assert out.x_path.position[0] == pytest.approx(0.31)
    assert out.y_path.position[0] == pytest.approx(0.69)
    assert out.r == pytest.approx(0.4 - 0.02, abs=1e-15)


def test_coupling_glue_and_interpolation():
    cs = couple_states(BIG, [0.3, 0.0], [-0.3, 0.0], epsilon_couple=0.5)
    g = np.array([-0.2, 0.0])
    out = mirror_step(BIG, cs, None, 1e-3, g)
    assert out.coupled_at is not None
    # s = 0.6 + 2<eta, g> = 0.2 crosses eps = 0.5 at u = 0.1/0.4
    assert out.coupled_at == pytest.approx(0.25e-3, rel=1e-9)
    assert np.array_equal(out.y_path.position, out.x_path.position)
    assert out.r == 0.0 and out.eta is None
    with pytest.raises(ValueError):
        mirror_step(BIG, out, None, 1e-3, g)


def test_starts_inside_epsilon_couple_immediately():
    cs = couple_states(SEG, [0.45], [0.55], epsilon_couple=0.2)
    assert cs.coupled_at == 0.0
    assert cs.r == 0.0 and cs.eta is None
    out = simulate_coupling_time(SEG, [0.45], [0.55], h=1e-4,
                                 epsilon_couple=0.2, t_max=1.0, rng=3)
    assert not out.censored
    assert out.tau == 0.0 and out.steps == 0


def test_step_reflected_projects_and_counts_pushes():
    st = PathState(position=np.array([0.98]))
    moved = step_reflected(SEG, st, None, 1e-3, np.array([0.05]))
    assert moved.position[0] == 1.0  # candidate 1.03 clips to the wall
    assert moved.local_pushes == pytest.approx(0.03, abs=1e-12)
    inside = step_reflected(SEG, st, None, 1e-3, np.array([-0.05]))
    assert inside.local_pushes == 0.0
    assert inside.position[0] == pytest.approx(0.93)


def test_interval_run_invariants_and_bound():
    outs = run_coupling_replicates(SEG, [0.0], [1.0], 1200, h=5e-4,
                                   t_max=1.6, rng=31)
    assert len(outs) == 1200
    assert [o.replicate for o in outs] == list(range(1200))
    grid = np.array([0.3, 0.6, 1.0, 1.4])
    curve = survival_curve(*outcome_times(outs), grid, 0.01)
    bound = np.array([survival_F(1.0, 4.0 * t, 0.0).value for t in grid])
    band = dkw_halfwidth(0.01, 1200)
    assert np.all(curve.survival <= bound + band)
    tol_phi = 5.0 * math.sqrt(5e-4)
    for o in outs:
        dg = o.diagnostics
        assert dg.max_r <= 1.0 + 1e-9
        assert dg.max_phi_increment <= tol_phi
        assert dg.max_eta_dot_n_m <= 1e-9
        assert dg.min_eta_dot_n_l >= -1e-9
    assert sum(o.diagnostics.boundary_events > 0 for o in outs) > 1000


def test_quadratic_variation_runs_at_rate_four():
    # before boundary interference the separation is a BM at rate 4:
    # track qv via one long uncoupled stretch in a huge ball
    noise = CounterNoise(12)
    h = 1e-3
    qv_over_t = []
    for rep in range(200):
        cs = couple_states(BIG, [5.0, 0.0], [-5.0, 0.0], epsilon_couple=1e-9)
        for step in range(200):
            g = noise.normals(step, [rep], [0, 1])[0] * math.sqrt(h)
            cs = mirror_step(BIG, cs, None, h, g)
            if cs.coupled_at is not None:
                break
        if cs.coupled_at is None:
            qv_over_t.append(cs.qv_clock / cs.x_path.time)
    mean = np.mean(qv_over_t)
    assert abs(mean - 4.0) < 0.15 * 4.0


def test_determinism_single_vs_batch_vs_threads():
    kw = dict(h=5e-4, epsilon_couple=0.02, t_max=1.0, rng=7)
    batch = run_coupling_replicates(SEG, [0.1], [0.9], 6, **kw)
    singles = [simulate_coupling_time(SEG, [0.1], [0.9], replicate=i, **kw)
               for i in range(6)]
    for a, b in zip(batch, singles):
        assert a.tau == b.tau
        assert a.censored == b.censored
        assert a.steps == b.steps
    threaded = run_coupling_replicates(SEG, [0.1], [0.9], 6, threads=3, **kw)
    assert [o.tau for o in threaded] == [o.tau for o in batch]


def test_censored_tau_is_exactly_horizon():
    outs = run_coupling_replicates(SEG, [0.0], [1.0], 40, h=1e-3,
                                   epsilon_couple=1e-4, t_max=0.05, rng=13)
    horizon = float(50) * 1e-3
    censored = [o for o in outs if o.censored]
    assert censored, "expected censoring at this tiny horizon"
    assert all(o.tau == horizon for o in censored)


def test_trace_file(tmp_path):
    path = tmp_path / "trace.csv"
    out = simulate_coupling_time(SEG, [0.0], [1.0], h=1e-3,
                                 epsilon_couple=0.05, t_max=3.0, rng=21,
                                 trace_path=str(path))
    lines = path.read_text().strip().split("\n")
    head = lines[0].split(",")
    assert head[:2] == ["step", "t"] and "phi" in head and "r" in head
    assert len(lines) == out.steps + 2  # header + initial row + steps
    last = lines[-1].split(",")
    r_col = head.index("r")
    assert float(last[r_col]) == 0.0  # final row records the glue
    x_col, y_col = head.index("x0"), head.index("y0")
    assert last[x_col] == last[y_col]


def test_replicate_index_changes_the_draw():
    a = simulate_coupling_time(SEG, [0.0], [1.0], h=1e-3, t_max=3.0, rng=5,
                               replicate=0)
    b = simulate_coupling_time(SEG, [0.0], [1.0], h=1e-3, t_max=3.0, rng=5,
                               replicate=1)
    assert a.tau != b.tau


def test_parameter_validation():
    with pytest.raises(ValueError):
        run_coupling_replicates(SEG, [0.0], [2.0], 10, h=1e-3, t_max=1.0,
                                rng=0)  # y outside
    with pytest.raises(ValueError):
        run_coupling_replicates(SEG, [0.0], [1.0], 10, h=0.1, t_max=1.0,
                                rng=0)  # h too coarse for d^2
    with pytest.raises(ValueError):
        run_coupling_replicates(SEG, [0.0], [1.0], 10, h=1e-3,
                                epsilon_couple=1e-6, t_max=1.0, rng=0)
        # eps far below sqrt(h) resolution


def test_ou_drift_audit():
    drift = ou_drift(1.0)
    assert drift.label == "ou(theta=1)"
    assert drift.audit_envelope(SEG) >= -1e-12
    lying = DriftModel(mu=lambda p: -p, gamma=lambda r: -2.0 * r * r,
                       label="too-fast")
    with pytest.raises(DriftEnvelopeError):
        lying.audit_envelope(SEG)


def test_drifted_coupling_still_couples():
    outs = run_coupling_replicates(Interval(-1.0, 1.0), [-1.0], [1.0], 300,
                                   h=1e-3, t_max=6.0, rng=9,
                                   drift=ou_drift(1.0))
    frac = np.mean([not o.censored for o in outs])
    assert frac > 0.95


def test_fold_reflect_matches_projection_law():
    assert np.allclose(fold_reflect_1d(1.0, np.array([0.3, 1.5, -0.3, 2.2, -1.7])),
                       [0.3, 0.5, 0.3, 0.2, 0.3])
    # distributional agreement: folded free BM vs projected Euler chain
    n, h, t = 2000, 1e-3, 0.5
    noise = CounterNoise(44)
    steps = int(round(t / h))
    w = np.zeros(n)
    for step in range(steps):
        w += noise.normals(step, np.arange(n), [0])[:, 0] * math.sqrt(h)
    folded = fold_reflect_1d(1.0, w)
    paths = simulate_reflected_paths(SEG, np.zeros((n, 1)), [t], h, rng=44)
    proj = paths[:, 0, 0]
    # same driving noise, same step: KS distance only from the scheme gap
    grid = np.linspace(0.0, 1.0, 101)
    ks = np.abs((folded[:, None] <= grid).mean(0)
                - (proj[:, None] <= grid).mean(0)).max()
    assert ks < 3.0 * math.sqrt(h)


def test_simulate_reflected_paths_contract():
    starts = np.full((50, 1), 0.25)
    t_grid = [0.1, 0.2, 0.4]
    paths = simulate_reflected_paths(SEG, starts, t_grid, 1e-3, rng=2)
    assert paths.shape == (50, 3, 1)
    assert paths.min() >= 0.0 and paths.max() <= 1.0
    again = simulate_reflected_paths(SEG, starts, t_grid, 1e-3, rng=2)
    assert np.array_equal(paths, again)
    with pytest.raises(ValueError):
        simulate_reflected_paths(SEG, starts, [0.1, 0.15050001], 1e-3, rng=2)


def test_comparison_Z_free_case_matches_first_passage_law():
    r0, t_max, h, n = 2.0, 0.5, 1e-3, 4000
    times, cens = run_comparison_Z_replicates(lambda r: 0.0 * r, r0, n,
                                              h=h, t_max=t_max, rng=4)
    for t in (0.25, 0.5):
        emp = np.mean((times > t - 1e-12) | cens)
        law = 1.0 - 2.0 * ndtr(-r0 / math.sqrt(4.0 * t))
        assert abs(emp - law) < dkw_halfwidth(0.01, n) + 2.0 * math.sqrt(h)
    # a negative drift envelope absorbs strictly faster
    times2, cens2 = run_comparison_Z_replicates(ou_drift(1.0).gamma, r0, n,
                                                h=h, t_max=t_max, rng=4)
    assert (np.mean((times2 > 0.25) | cens2)
            < np.mean((times > 0.25) | cens) - 0.01)
    tau, was_censored = simulate_comparison_Z(lambda r: 0.0 * r, r0, h,
                                              t_max, rng=4, replicate=0)
    assert (times[0], cens[0]) == (tau, was_censored)


def test_outcomes_csv(tmp_path):
    outs = run_coupling_replicates(SEG, [0.2], [0.8], 5, h=1e-3, t_max=0.5,
                                   rng=1)
    p = tmp_path / "o.csv"
    write_outcomes_csv(outs, p, preamble=("seed=1",))
    lines = p.read_text().strip().split("\n")
    assert lines[0] == "# seed=1"
    assert lines[1] == "replicate,tau,censored,steps,boundary_events"
    assert len(lines) == 7
    assert [int(line.split(",")[0]) for line in lines[2:]] == [0, 1, 2, 3, 4]
