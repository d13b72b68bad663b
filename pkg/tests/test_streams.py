import numpy as np
import pytest

from convex_mixing.streams import MAX_SLOTS, CounterNoise, as_noise


def test_same_address_same_draw():
    a = CounterNoise(42)
    b = CounterNoise(42)
    u1 = a.uniforms(3, [0, 1, 2], [0, 1])
    u2 = b.uniforms(3, [0, 1, 2], [0, 1])
    assert np.array_equal(u1, u2)
    n1 = a.normals(7, [5], [0])
    n2 = b.normals(7, [5], [0])
    assert np.array_equal(n1, n2)


def test_addresses_are_independent_of_batching():
    noise = CounterNoise(9)
    full = noise.normals(11, [0, 1, 2, 3], [0, 1])
    parts = np.vstack([noise.normals(11, [i], [0, 1]) for i in range(4)])
    assert np.array_equal(full, parts)


def test_different_seeds_differ():
    u1 = CounterNoise(1).uniforms(0, [0], [0])
    u2 = CounterNoise(2).uniforms(0, [0], [0])
    assert u1 != u2


def test_different_axes_differ():
    noise = CounterNoise(5)
    base = noise.uniforms(0, [0], [0])
    assert noise.uniforms(1, [0], [0]) != base
    assert noise.uniforms(0, [1], [0]) != base
    assert noise.uniforms(0, [0], [1]) != base


def test_uniforms_in_open_unit_interval():
    u = CounterNoise(3).uniforms(0, np.arange(20_000), [0, 1])
    assert u.min() > 0.0 and u.max() < 1.0


def test_normals_moments():
    z = CounterNoise(17).normals(0, np.arange(200_000), [0])
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01


def test_as_noise_coercion():
    noise = CounterNoise(8)
    assert as_noise(noise) is noise
    assert as_noise(8).seed == noise.seed
    with pytest.raises(TypeError):
        as_noise(1.5)
    with pytest.raises(TypeError):
        as_noise(np.random.default_rng(0))


def test_slot_budget_enforced():
    noise = CounterNoise(0)
    with pytest.raises(ValueError):
        noise.uniforms(0, [0], [MAX_SLOTS])
