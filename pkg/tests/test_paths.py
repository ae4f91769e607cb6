"""Path containers and path surgery: periodization, translation, mollifier."""

import numpy as np
import pytest
from scipy.integrate import quad

from fwlab.errors import InvalidArgumentError
from fwlab.paths import (
    DiscretePath,
    PeriodicPath,
    TimeGrid,
    affine_bridge,
    continuity_modulus,
    mollify,
    path_from_csv,
    path_to_csv,
    periodize,
    random_periodic_path,
    translate,
)


def ramp_path(n=100):
    grid = TimeGrid(1.0, n)
    return DiscretePath(grid=grid, nodes=grid.times())


def test_periodize_wraps_forward():
    value, jump = periodize(ramp_path(), 1.5)
    assert np.allclose(value, [0.5])
    assert np.allclose(jump, [-1.0])


def test_periodize_closed_path_has_no_jump():
    t = np.linspace(0.0, 1.0, 65)
    path = DiscretePath(grid=TimeGrid(1.0, 64), nodes=np.sin(2 * np.pi * t))
    _, jump = periodize(path, 0.3)
    assert np.allclose(jump, 0.0)


def test_periodize_negative_time():
    value, _ = periodize(ramp_path(), -0.25)
    assert np.allclose(value, [0.75])


def test_periodize_is_periodic_at_random_times():
    path = ramp_path(50)
    rng = np.random.default_rng(0)
    for t in rng.uniform(-5, 5, size=1000):
        v1, _ = periodize(path, t)
        v2, _ = periodize(path, t + 1.0)
        assert np.allclose(v1, v2, atol=1e-12)


def loop(n=64, seed=0):
    return random_periodic_path(2.0, n, 2, scale=1.0, seed=seed)


def test_translate_identity_and_full_period():
    p = loop()
    assert np.allclose(translate(p, 0.0).nodes, p.nodes)
    assert np.allclose(translate(p, p.period).nodes, p.nodes)


def test_translate_composes():
    p = loop()
    half = p.period / 2
    twice = translate(translate(p, half), half)
    assert np.allclose(twice.nodes, translate(p, p.period).nodes)
    rng = np.random.default_rng(1)
    for _ in range(10):
        s1 = rng.integers(0, 64) * p.dt
        s2 = rng.integers(0, 64) * p.dt
        a = translate(p, s1 + s2)
        b = translate(translate(p, s1), s2)
        assert np.allclose(a.nodes, b.nodes)


def test_mollify_constant_path():
    p = PeriodicPath(period=2.0, nodes=np.full((64, 2), 1.7))
    sm, dv = mollify(p, 0.3)
    assert np.allclose(sm.nodes, 1.7, atol=1e-12)
    assert np.allclose(dv.nodes, 0.0, atol=1e-12)


def _bump_moment(delta):
    # first moment of the normalized bump on (0, delta), by quadrature
    norm, _ = quad(lambda u: (4 * u * (1 - u)) ** 3, 0.0, 1.0)
    mom, _ = quad(lambda u: u * (4 * u * (1 - u)) ** 3, 0.0, 1.0)
    return delta * mom / norm


def test_mollify_linear_path_shift_matches_quadrature():
    grid = TimeGrid(4.0, 400)
    path = DiscretePath(grid=grid, nodes=grid.times())
    delta = 0.5
    sm, dv = mollify(path, delta)
    shift = _bump_moment(delta)
    mid = slice(100, 380)  # away from the left edge
    assert np.allclose(sm.nodes[mid, 0], grid.times()[mid] - shift, atol=2e-4)
    assert np.allclose(dv.nodes[mid, 0], 1.0, atol=1e-10)


def test_mollify_derivative_matches_finite_difference_of_smoothed():
    p = loop(256, seed=3)
    sm, dv = mollify(p, 0.25)
    fd = (np.roll(sm.nodes, -1, axis=0) - np.roll(sm.nodes, 1, axis=0)) / (2 * p.dt)
    err = np.max(np.abs(fd - dv.nodes))
    # halving dt should cut the disagreement by about four
    p2 = random_periodic_path(2.0, 512, 2, scale=1.0, seed=3)
    sm2, dv2 = mollify(p2, 0.25)
    fd2 = (np.roll(sm2.nodes, -1, axis=0) - np.roll(sm2.nodes, 1, axis=0)) / (2 * p2.dt)
    err2 = np.max(np.abs(fd2 - dv2.nodes))
    assert err2 < err


def test_mollify_preserves_mean_and_commutes_with_translate():
    p = loop(128, seed=5)
    sm, _ = mollify(p, 0.3)
    assert np.allclose(sm.nodes.mean(axis=0), p.nodes.mean(axis=0), atol=1e-10)
    shift = 17 * p.dt
    a, _ = mollify(translate(p, shift), 0.3)
    b = translate(mollify(p, 0.3)[0], shift)
    assert np.allclose(a.nodes, b.nodes, atol=1e-12)


def test_mollify_width_validation():
    p = loop()
    with pytest.raises(InvalidArgumentError):
        mollify(p, 0.0)
    with pytest.raises(InvalidArgumentError):
        mollify(p, p.period)


def test_continuity_modulus_constant_path_is_zero():
    p = DiscretePath(grid=TimeGrid(1.0, 50), nodes=np.full((51, 2), 0.4))
    assert continuity_modulus(p, 0.2) == 0.0


def test_continuity_modulus_ramp():
    value = continuity_modulus(ramp_path(100), 0.1)
    assert abs(value - 0.1) <= 0.01 + 1e-12


def test_continuity_modulus_cauchy_schwarz_bound():
    rng = np.random.default_rng(7)
    for seed in range(5):
        p = random_periodic_path(1.0, 128, 2, scale=1.0, seed=seed).one_period()
        delta = rng.uniform(0.05, 0.4)
        omega = continuity_modulus(p, delta)
        dsq = np.sum(np.diff(p.nodes, axis=0) ** 2)
        assert omega <= np.sqrt(delta * dsq / p.grid.dt) + 1e-12


def test_continuity_modulus_monotone_and_subadditive():
    p = random_periodic_path(1.0, 200, 1, scale=1.0, seed=9).one_period()
    vals = [continuity_modulus(p, d) for d in (0.05, 0.1, 0.2, 0.4)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    whole = continuity_modulus(p, 0.1, (0.0, 1.0))
    left = continuity_modulus(p, 0.1, (0.0, 0.6))
    right = continuity_modulus(p, 0.1, (0.6, 1.0))
    assert whole <= left + right + 1e-12


def test_continuity_modulus_bad_window():
    with pytest.raises(InvalidArgumentError):
        continuity_modulus(ramp_path(), 0.1, (0.9, 0.2))


def test_affine_bridge():
    b = affine_bridge([0.0], [1.0], n_steps=10)
    assert np.allclose(b.nodes[0], [0.0])
    assert np.allclose(b.nodes[-1], [1.0])
    assert np.allclose(b.nodes[5], [0.5])
    same = affine_bridge([0.3, -1.0], [0.3, -1.0])
    assert np.allclose(same.nodes, same.nodes[0])


def test_periodic_path_requires_closure():
    path = DiscretePath(grid=TimeGrid(1.0, 4), nodes=np.array([0.0, 1.0, 2.0, 1.0, 0.5]))
    with pytest.raises(InvalidArgumentError):
        PeriodicPath.from_closed(path)


def test_csv_round_trip():
    p = random_periodic_path(3.0, 32, 2, scale=0.7, seed=11).one_period()
    text = path_to_csv(p)
    assert text.splitlines()[0] == "t,x1,x2"
    back = path_from_csv(text)
    assert np.allclose(back.nodes, p.nodes, atol=0.0)
    assert back.grid.n_steps == p.grid.n_steps


def test_csv_rejects_nonuniform_grid():
    bad = "t,x1\n0.0,0.0\n0.1,0.2\n0.35,0.4\n"
    with pytest.raises(InvalidArgumentError):
        path_from_csv(bad)


def test_periodize_rejects_nonfinite_time():
    with pytest.raises(InvalidArgumentError):
        periodize(ramp_path(), float("inf"))
