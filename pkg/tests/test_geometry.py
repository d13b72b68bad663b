import numpy as np
import pytest

from convex_mixing.geometry import (Ball, Box, Interval, Polytope,
                                    antipodal_points, parse_domain_spec)


def simplex(n):
    # x_i >= 0, sum x <= 1
    a = np.vstack([-np.eye(n), np.ones(n)])
    b = np.concatenate([np.zeros(n), [1.0]])
    return Polytope(a, b)


BODIES = [
    Interval(0.0, 1.0),
    Box([-1.0, 0.0], [1.0, 0.5]),
    Ball([0.3, -0.2], 0.7),
    simplex(2),
    simplex(3),
]


@pytest.mark.parametrize("body", BODIES, ids=lambda b: type(b).__name__ + str(b.dimension))
def test_projection_lands_inside_and_fixes_interior(body):
    rng = np.random.default_rng(11)
    inside, _ = body.sample_uniform_many(50, rng)
    assert np.array_equal(body.project(inside), inside)
    lo, hi = body.bounding_box()
    far = rng.uniform(lo - 2.0, hi + 2.0, size=(200, body.dimension))
    proj = body.project(far)
    assert body.contains(proj).all()


@pytest.mark.parametrize("body", BODIES, ids=lambda b: type(b).__name__ + str(b.dimension))
def test_projection_is_nearest_point(body):
    # variational characterization: <q - p, x - p> <= 0 for all q in the body
    rng = np.random.default_rng(4)
    lo, hi = body.bounding_box()
    x = rng.uniform(lo - 1.5, hi + 1.5, size=(40, body.dimension))
    p = body.project(x)
    qs, _ = body.sample_uniform_many(300, rng)
    inner = np.einsum("kqj,kj->kq", qs[None, :, :] - p[:, None, :], x - p)
    assert inner.max() <= 1e-9


@pytest.mark.parametrize("body", BODIES, ids=lambda b: type(b).__name__ + str(b.dimension))
def test_projection_batch_matches_single(body):
    rng = np.random.default_rng(7)
    lo, hi = body.bounding_box()
    x = rng.uniform(lo - 2.0, hi + 2.0, size=(64, body.dimension))
    batch = body.project(x)
    rows = np.vstack([body.project(x[i]) for i in range(64)])
    assert np.array_equal(batch, rows)
    shuffled = body.project(x[::-1])[::-1]
    assert np.array_equal(batch, shuffled)


@pytest.mark.parametrize("body", BODIES, ids=lambda b: type(b).__name__ + str(b.dimension))
def test_supporting_normal_points_inward(body):
    rng = np.random.default_rng(3)
    lo, hi = body.bounding_box()
    x = rng.uniform(lo - 2.0, hi + 2.0, size=(120, body.dimension))
    x = x[~body.contains(x)][:40]
    assert x.shape[0] >= 10
    p = body.project(x)
    qs, _ = body.sample_uniform_many(200, rng)
    for i in range(p.shape[0]):
        n = body.supporting_normal(p[i])
        assert abs(np.linalg.norm(n) - 1.0) < 1e-12
        # supporting hyperplane: the whole body on the inward side
        assert ((qs - p[i]) @ n).min() >= -1e-9


@pytest.mark.parametrize("body", BODIES, ids=lambda b: type(b).__name__ + str(b.dimension))
def test_uniform_sampling_inside_and_deterministic(body):
    pts, method = body.sample_uniform_many(500, np.random.default_rng(123))
    assert body.contains(pts).all()
    assert method in ("exact", "rejection", "hit_and_run")
    again, _ = body.sample_uniform_many(500, np.random.default_rng(123))
    assert np.array_equal(pts, again)


def test_ball_sampling_is_uniform_in_radius():
    body = Ball([0.0, 0.0], 1.0)
    pts, _ = body.sample_uniform_many(40_000, np.random.default_rng(5))
    r = np.linalg.norm(pts, axis=1)
    # area fraction inside radius r is r^2
    assert abs(np.mean(r < 0.5) - 0.25) < 0.01
    assert abs(np.mean(r < 0.9) - 0.81) < 0.01


def test_diameters():
    assert Interval(0.0, 1.0).diameter == 1.0
    assert Box([0.0, 0.0], [3.0, 4.0]).diameter == 5.0
    assert Ball([1.0, 1.0], 0.5).diameter == 1.0
    assert abs(simplex(2).diameter - np.sqrt(2.0)) < 1e-9


def test_antipodal_points_realize_diameter():
    for body in BODIES[:4]:
        p, q = antipodal_points(body)
        assert abs(np.linalg.norm(p - q) - body.diameter) < 1e-9
        assert body.contains(p) and body.contains(q)


def test_interval_exposes_endpoints():
    seg = Interval(-1.0, 2.5)
    assert seg.lo == -1.0 and seg.hi == 2.5
    assert seg.dimension == 1
    assert np.array_equal(seg.center(), [0.75])


def test_polytope_center_is_interior():
    body = simplex(3)
    c = body.center()
    assert body.contains(c)
    # Chebyshev center of the simplex sits strictly inside
    assert (body.b - body.a @ c).min() > 0.05


def test_degenerate_rejected():
    with pytest.raises(ValueError):
        Interval(1.0, 1.0)
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)
    with pytest.raises(ValueError):
        Box([0.0, 0.0], [1.0, 0.0])
    with pytest.raises(ValueError):
        # empty: x <= -1 and x >= 1
        Polytope(np.array([[1.0], [-1.0]]), np.array([-1.0, -1.0]))


def test_parse_domain_spec_inline_and_errors():
    seg = parse_domain_spec('{"kind": "interval", "lo": 0, "hi": 2}')
    assert isinstance(seg, Interval) and seg.hi == 2.0
    ball = parse_domain_spec({"kind": "ball", "center": [0, 0], "radius": 1})
    assert isinstance(ball, Ball)
    box = parse_domain_spec({"kind": "box", "lo": [0], "hi": [2]})
    assert isinstance(box, Box)
    poly = parse_domain_spec(
        {"kind": "polytope",
         "halfspaces": [{"a": [1.0, 0.0], "b": 1.0}, {"a": [-1.0, 0.0], "b": 0.0},
                        {"a": [0.0, 1.0], "b": 1.0}, {"a": [0.0, -1.0], "b": 0.0}]})
    assert isinstance(poly, Polytope)
    with pytest.raises(ValueError, match="kind"):
        parse_domain_spec({"lo": 0, "hi": 1})
    with pytest.raises(ValueError, match="radius"):
        parse_domain_spec({"kind": "ball", "center": [0, 0]})
    with pytest.raises(ValueError, match="hi"):
        parse_domain_spec({"kind": "box", "lo": [0, 0], "hi": [1]})


def test_parse_domain_spec_file(tmp_path):
    path = tmp_path / "dom.json"
    path.write_text('{"kind": "ball", "center": [0.0, 0.0], "radius": 0.5}')
    body = parse_domain_spec(str(path))
    assert isinstance(body, Ball) and body.diameter == 1.0
