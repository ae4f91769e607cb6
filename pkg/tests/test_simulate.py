"""SDE integration, stream determinism, tilted dynamics, Girsanov weights."""

import numpy as np
import pytest
import scipy.linalg

from fwlab.errors import ExplosionError, InvalidArgumentError
from fwlab.models import make_model, scalar_ou
from fwlab.paths import PeriodicPath, TimeGrid
from fwlab.simulate import (
    SimConfig,
    batch_simulate,
    build_tilt,
    euler_maruyama,
    girsanov_log_weight,
    simulate_tilted,
    trajectory_rng,
)


def orbit(radius=0.5, omega=np.sqrt(2.0), n=128):
    period = 2 * np.pi / omega
    theta = 2 * np.pi * np.arange(n) / n
    nodes = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return PeriodicPath(period=period, nodes=nodes)


def test_noiseless_flow_matches_matrix_exponential():
    m = make_model("rotational-ou", gamma=1.0)
    cfg = SimConfig(eps=1e-6, grid=TimeGrid(2.0, 20000), seed=0)
    path = euler_maruyama(m, cfg, [1.0, 0.0], zero_noise=True)
    flow = scipy.linalg.expm(2.0 * np.array([[-1.0, -1.0], [1.0, -1.0]]))
    exact = flow @ np.array([1.0, 0.0])
    assert np.linalg.norm(path.nodes[-1] - exact) <= 1e-4


def test_same_seed_is_bit_identical():
    m = scalar_ou()
    cfg = SimConfig(eps=0.1, grid=TimeGrid(5.0, 500), seed=123)
    a = euler_maruyama(m, cfg, [1.0])
    b = euler_maruyama(m, cfg, [1.0])
    assert np.array_equal(a.nodes, b.nodes)


def test_batch_of_one_equals_single_call():
    m = scalar_ou()
    cfg = SimConfig(eps=0.1, grid=TimeGrid(5.0, 500), seed=7, batch=1)
    single = euler_maruyama(m, cfg, [0.5])
    batch = batch_simulate(m, cfg, [0.5], keep_paths=True)
    assert np.array_equal(batch.paths[0].nodes, single.nodes)


def test_doubling_batch_reproduces_prefix():
    m = scalar_ou()
    cfg8 = SimConfig(eps=0.1, grid=TimeGrid(2.0, 200), seed=9, batch=8)
    cfg16 = SimConfig(eps=0.1, grid=TimeGrid(2.0, 200), seed=9, batch=16)
    first = batch_simulate(m, cfg8, [0.0]).summaries
    second = batch_simulate(m, cfg16, [0.0]).summaries[:8]
    assert [s.endpoint for s in first] == [s.endpoint for s in second]
    assert [s.w_strat for s in first] == [s.w_strat for s in second]


def test_thread_count_and_chunking_do_not_change_results():
    m = make_model("rotational-ou")
    cfg = SimConfig(eps=0.2, grid=TimeGrid(2.0, 200), seed=11, batch=64)
    base = batch_simulate(m, cfg, [1.0, 0.0], threads=1, chunk_size=64)
    for threads, chunk in ((4, 16), (8, 7), (1, 5)):
        other = batch_simulate(m, cfg, [1.0, 0.0], threads=threads, chunk_size=chunk)
        assert [s.endpoint for s in other.summaries] == [s.endpoint for s in base.summaries]
        assert [s.w_strat for s in other.summaries] == [s.w_strat for s in base.summaries]


def test_streams_are_independent_of_history():
    g1 = trajectory_rng(5, 3)
    g1.standard_normal(10)
    fresh = trajectory_rng(5, 4).standard_normal(4)
    assert np.array_equal(fresh, trajectory_rng(5, 4).standard_normal(4))


def test_ou_stationary_moment():
    m = scalar_ou()
    eps = 0.1
    cfg = SimConfig(eps=eps, grid=TimeGrid(30.0, 12000), seed=1, batch=2000)
    res = batch_simulate(m, cfg, [1.0], f=lambda x: x[:, 0] ** 2, burn_in=10.0)
    vals = np.array([s.f_avg for s in res.alive])
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - eps) <= 3 * se


def test_weak_order_endpoint_mean():
    m = scalar_ou()
    x0, T = 1.0, 2.0
    means, cis = [], []
    for steps in (400, 800):
        cfg = SimConfig(eps=0.1, grid=TimeGrid(T, steps), seed=3, batch=4000)
        ends = np.array(
            [s.endpoint[0] for s in batch_simulate(m, cfg, [x0]).alive]
        )
        means.append(ends.mean())
        cis.append(3 * ends.std(ddof=1) / np.sqrt(len(ends)))
    assert abs(means[0] - np.exp(-T) * x0) <= cis[0]
    assert abs(means[0] - means[1]) <= cis[0] + cis[1]


def test_explosion_raises_with_step_index():
    m = make_model("double-well")
    cfg = SimConfig(eps=0.5, grid=TimeGrid(10.0, 20), seed=2, r_max=5.0)
    with pytest.raises(ExplosionError) as err:
        euler_maruyama(m, cfg, [4.9])
    assert err.value.step >= 1


def test_batch_tallies_explosions_without_raising():
    m = make_model("double-well")
    cfg = SimConfig(eps=2.0, grid=TimeGrid(10.0, 25), seed=2, r_max=3.0, batch=32)
    res = batch_simulate(m, cfg, [2.9])
    assert res.n_exploded > 0
    assert len(res.summaries) == 32
    assert any(s.exploded for s in res.summaries)


def test_tilted_drift_formula_constant_a():
    m = make_model("rotational-ou", gamma=1.0)
    tilt = build_tilt(m, orbit())
    t, x = 0.37, np.array([[0.2, -0.1]])
    y = tilt.path.value(t)
    ydot = tilt.reference_velocity(t)
    manual = -(x - y) + ydot  # a = I, U = V = |x|^2/2, div a = 0
    assert np.allclose(tilt.drift(t, x, eps=0.1), manual)


def test_tilted_with_zero_reference_reduces_to_base_dynamics():
    m = scalar_ou()
    still = PeriodicPath(period=1.0, nodes=np.zeros((16, 1)))
    tilt = build_tilt(m, still)
    cfg = SimConfig(eps=0.15, grid=TimeGrid(3.0, 300), seed=4)
    a = simulate_tilted(m, tilt, cfg, [0.8])
    b = euler_maruyama(m, cfg, [0.8])
    assert np.array_equal(a.nodes, b.nodes)


def test_tilted_concentrates_on_reference_as_eps_shrinks():
    m = make_model("rotational-ou", gamma=1.0)
    ref = orbit(radius=0.8)
    tilt = build_tilt(m, ref)
    medians = []
    for eps in (0.1, 0.05, 0.01):
        cfg = SimConfig(eps=eps, grid=TimeGrid(6.0, 1200), seed=5, batch=64)
        res = batch_simulate(m, cfg, ref.value(0.0), tilt=tilt, keep_paths=True)
        sups = []
        for p in res.paths:
            ref_vals = ref.value(p.times())
            sups.append(np.max(np.linalg.norm(p.nodes - ref_vals, axis=1)))
        medians.append(np.median(sups))
    assert medians[0] > medians[1] > medians[2]


def test_girsanov_weight_zero_when_drifts_match():
    m = scalar_ou()
    still = PeriodicPath(period=1.0, nodes=np.zeros((16, 1)))
    tilt = build_tilt(m, still)
    cfg = SimConfig(eps=0.2, grid=TimeGrid(2.0, 200), seed=6)
    path = simulate_tilted(m, tilt, cfg, [0.3])
    assert girsanov_log_weight(m, tilt, 0.2, path) == 0.0


def test_girsanov_engine_matches_posthoc_evaluation():
    m = make_model("rotational-ou", gamma=1.0)
    tilt = build_tilt(m, orbit())
    cfg = SimConfig(eps=0.2, grid=TimeGrid(4.0, 800), seed=7, batch=4)
    res = batch_simulate(m, cfg, [0.5, 0.0], tilt=tilt, keep_paths=True)
    for s, p in zip(res.summaries, res.paths):
        posthoc = girsanov_log_weight(m, tilt, 0.2, p)
        assert abs(s.log_weight - posthoc) <= 1e-10 * max(1.0, abs(posthoc))


def test_girsanov_weights_average_to_one():
    m = make_model("rotational-ou", gamma=1.0)
    tilt = build_tilt(m, orbit(radius=0.4))
    period = tilt.path.period
    cfg = SimConfig(eps=0.2, grid=TimeGrid(period, 900), seed=8, batch=4000)
    res = batch_simulate(m, cfg, tilt.path.value(0.0), tilt=tilt)
    w = np.exp([s.log_weight for s in res.alive])
    se = w.std(ddof=1) / np.sqrt(len(w))
    assert abs(w.mean() - 1.0) <= 3 * se


def test_girsanov_mean_negative_log_weight_nonnegative():
    # relative entropy of tilted vs base law is nonnegative
    m = make_model("rotational-ou", gamma=1.0)
    tilt = build_tilt(m, orbit(radius=0.4))
    cfg = SimConfig(eps=0.2, grid=TimeGrid(3.0, 600), seed=9, batch=2000)
    res = batch_simulate(m, cfg, tilt.path.value(0.0), tilt=tilt)
    neg_logw = -np.array([s.log_weight for s in res.alive])
    se = neg_logw.std(ddof=1) / np.sqrt(len(neg_logw))
    assert neg_logw.mean() >= -3 * se


def test_tilt_potential_contract():
    m = make_model("rotational-ou", gamma=1.0)
    plain = build_tilt(m, orbit())
    assert plain.stiffness is None  # V qualifies, U = V
    capped = build_tilt(m, orbit(), stiffness=2.0)
    rng = np.random.default_rng(0)
    far = rng.standard_normal((32, 2))
    far = 7.0 * far / np.linalg.norm(far, axis=1, keepdims=True)
    assert np.allclose(capped.potential.value(far), m.potential.value(far), atol=1e-12)
    assert np.linalg.norm(capped.potential.grad(np.zeros(2))) <= 1e-12
    assert np.min(np.linalg.eigvalsh(capped.potential.hess(np.zeros(2)))) > 0


def test_double_well_gets_capped_potential_automatically():
    m = make_model("double-well")
    tilt = build_tilt(m, PeriodicPath(period=1.0, nodes=np.zeros((16, 1))))
    assert tilt.stiffness is not None  # V has minima away from 0
    assert np.linalg.norm(tilt.potential.grad(np.zeros(1))) <= 1e-12


def test_overly_stiff_cap_rejected():
    m = make_model("rotational-ou")
    with pytest.raises(InvalidArgumentError):
        build_tilt(m, orbit(), stiffness=2.0, blend=(2.0, 3.0))


def test_sim_config_validation():
    grid = TimeGrid(1.0, 10)
    with pytest.raises(InvalidArgumentError):
        SimConfig(eps=0.0, grid=grid, seed=0)
    with pytest.raises(InvalidArgumentError):
        SimConfig(eps=0.1, grid=grid, seed=0, batch=0)


def test_girsanov_dimension_mismatch_rejected():
    from fwlab.errors import GridMismatchError
    from fwlab.paths import DiscretePath

    m = make_model("rotational-ou")
    tilt = build_tilt(m, orbit())
    path_1d = DiscretePath(grid=TimeGrid(1.0, 10), nodes=np.zeros(11))
    with pytest.raises(GridMismatchError):
        girsanov_log_weight(m, tilt, 0.1, path_1d)
