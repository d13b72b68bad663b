import numpy as np
import pytest
from scipy.integrate import quad

from convex_mixing.bounds import survival_F
from convex_mixing.oracle1d import (Heat1D, cdf_V, exact_tv,
                                    exit_time_survival_mc, neumann_kernel,
                                    tightness_rows, tv_lower_witness,
                                    write_tightness_csv)
from convex_mixing.stats import dkw_halfwidth

HEAT = Heat1D(1.0)

# pinned evaluator output at d=1, t=1/2, x=y=0; agrees with the
# eigenseries summed at 40-digit precision to the last bit
KERNEL_HALF_00 = 1.1697133917683906


def test_kernel_reference_value():
    assert neumann_kernel(HEAT, 0.5, 0.0, 0.0) == KERNEL_HALF_00


def test_kernel_representations_agree():
    xs = np.linspace(0.0, 1.0, 9)
    for t in (0.01, 0.05, 0.1249, 0.125, 0.3, 1.0):
        a = np.asarray(neumann_kernel(HEAT, t, xs[:, None], xs[None, :],
                                      representation="spectral"))
        b = np.asarray(neumann_kernel(HEAT, t, xs[:, None], xs[None, :],
                                      representation="images"))
        assert np.abs(a - b).max() < 2e-10


def test_kernel_symmetric_bitwise():
    rng = np.random.default_rng(2)
    xs = rng.uniform(0.0, 1.0, 60)
    ys = rng.uniform(0.0, 1.0, 60)
    for t in (0.03, 0.4):  # one per representation
        p = neumann_kernel(HEAT, t, xs, ys)
        q = neumann_kernel(HEAT, t, ys, xs)
        assert np.array_equal(p, q)


def test_kernel_is_a_transition_density():
    # mass one from any start, positivity, and Chapman-Kolmogorov
    for t in (0.01, 0.2, 1.5):
        for x in (0.0, 0.37, 1.0):
            val, _ = quad(lambda y: neumann_kernel(HEAT, t, x, y), 0.0, 1.0,
                          limit=200, epsabs=1e-11)
            assert abs(val - 1.0) < 1e-9
    ys = np.linspace(0.0, 1.0, 33)
    assert np.all(np.asarray(neumann_kernel(HEAT, 0.05, 0.3, ys)) > 0.0)
    for s, t, x, y in [(0.05, 0.1, 0.2, 0.8), (0.02, 0.02, 0.5, 0.5)]:
        lhs = neumann_kernel(HEAT, s + t, x, y)
        rhs, _ = quad(lambda z: neumann_kernel(HEAT, s, x, z)
                      * neumann_kernel(HEAT, t, z, y), 0.0, 1.0,
                      limit=400, epsabs=1e-11, epsrel=1e-11)
        assert abs(lhs - rhs) < 5e-10


def test_kernel_long_time_uniform():
    ys = np.linspace(0.0, 1.0, 7)
    p = np.asarray(neumann_kernel(HEAT, 6.0, 0.0, ys))
    assert np.abs(p - 1.0).max() < 1e-12


def test_kernel_validation():
    with pytest.raises(ValueError):
        neumann_kernel(HEAT, 0.0, 0.2, 0.3)
    with pytest.raises(ValueError):
        neumann_kernel(HEAT, 0.5, -0.1, 0.3)
    with pytest.raises(ValueError):
        neumann_kernel(HEAT, 0.5, 0.2, 0.3, representation="banana")
    with pytest.raises(ValueError):
        Heat1D(0.0)


def test_cdf_V_identity_and_initial_condition():
    # the series shortcut must equal direct quadrature of the kernel
    for t in (0.01, 0.25, 1.0):
        for x in (0.0, 0.25, 0.77, 1.0):
            ref, _ = quad(lambda y: neumann_kernel(HEAT, t, x, y), 0.0, 0.5,
                          limit=200, epsabs=1e-11)
            assert abs(cdf_V(HEAT, t, x) - ref) < 1e-9
    assert cdf_V(HEAT, 0.0, 0.3) == 1.0
    assert cdf_V(HEAT, 0.0, 0.51) == 0.0
    assert abs(cdf_V(HEAT, 0.25, 0.0)
               - (0.5 + 0.5 * survival_F(1.0, 1.0, 0.0).value)) == 0.0


def test_exact_tv_against_witness_and_limits():
    for t in (0.1, 0.25, 1.0):
        tv = exact_tv(HEAT, t, 0.0)
        assert tv_lower_witness(HEAT, t, 0.0) <= tv + 1e-12
        assert 0.0 <= tv <= 1.0
    # late-time TV collapses onto the half-series lower edge
    tv1 = exact_tv(HEAT, 1.0, 0.0)
    half = 0.5 * survival_F(1.0, 4.0, 0.0).value
    assert abs(tv1 - half) < 1e-9
    # TV from the center start is far below the worst case at equal t
    assert exact_tv(HEAT, 0.25, 0.5) < 0.1 * exact_tv(HEAT, 0.25, 0.0)


def test_tightness_sandwich_rows():
    rows = tightness_rows(HEAT, [0.05, 0.25, 1.0])
    assert [r[0] for r in rows] == [0.05, 0.25, 1.0]
    for t, x, tv, half, full, ok in rows:
        assert ok
        assert half - 1e-6 <= tv <= full + 1e-6
        assert full == pytest.approx(2.0 * half, rel=1e-12)


def test_tightness_csv(tmp_path):
    path = tmp_path / "tight.csv"
    write_tightness_csv(HEAT, [0.25, 1.0], path, preamble=("seed=0",))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "# seed=0"
    assert lines[1] == "t,x,exact_tv,F_half,F_full,pass"
    assert len(lines) == 4
    assert all(line.endswith(",1") for line in lines[2:])
    write_tightness_csv(HEAT, [0.25, 1.0], tmp_path / "again.csv",
                        preamble=("seed=0",))
    assert path.read_bytes() == (tmp_path / "again.csv").read_bytes()


def test_exit_time_mc_matches_series():
    grid = np.array([0.25, 0.5, 1.0, 2.0])
    curve = exit_time_survival_mc(1.0, 0.0, grid, 4000, 1e-3, rng=77)
    band = dkw_halfwidth(0.01, 4000)
    exact = np.array([survival_F(1.0, t, 0.0).value for t in grid])
    assert np.abs(curve.survival - exact).max() < band
    assert curve.n_samples == 4000
    # off-center start
    curve2 = exit_time_survival_mc(1.0, 0.6, grid, 4000, 1e-3, rng=78)
    exact2 = np.array([survival_F(1.0, t, 0.6).value for t in grid])
    assert np.abs(curve2.survival - exact2).max() < band
    # starts nearer the barrier exit faster
    assert np.all(curve2.survival <= curve.survival + band)


def test_exit_time_mc_deterministic_and_validated():
    grid = np.array([0.5, 1.0])
    a = exit_time_survival_mc(1.0, 0.0, grid, 500, 1e-3, rng=5)
    b = exit_time_survival_mc(1.0, 0.0, grid, 500, 1e-3, rng=5)
    assert np.array_equal(a.survival, b.survival)
    assert a.n_censored == b.n_censored
    with pytest.raises(ValueError):
        exit_time_survival_mc(1.0, 1.0, grid, 500, 1e-3, rng=5)
    with pytest.raises(ValueError):
        exit_time_survival_mc(1.0, 0.0, grid, 500, 0.1, rng=5)
    with pytest.raises(ValueError):
        exit_time_survival_mc(1.0, 0.0, grid, 50, 1e-3, rng=5)
