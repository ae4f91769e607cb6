"""Action quadrature, work observable, reversal identity."""

import numpy as np
from scipy.integrate import quad

from fwlab.action import (
    fw_action,
    gc_observable,
    lower_bound_calibration,
    rate_I,
    reversal_gap,
    time_reversed,
)
from fwlab.models import make_model, scalar_ou
from fwlab.paths import (
    DiscretePath,
    HolonomicMeasure,
    PeriodicPath,
    TimeGrid,
    random_periodic_path,
)
from fwlab.simulate import SimConfig, batch_simulate


def circle(radius, omega, n, dim_sign=1.0):
    period = 2 * np.pi / abs(omega)
    theta = 2 * np.pi * np.arange(n) / n * np.sign(omega)
    nodes = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    return PeriodicPath(period=period, nodes=nodes)


def test_flow_path_has_negligible_action():
    grid = TimeGrid(5.0, 5000)
    path = DiscretePath(grid=grid, nodes=np.exp(-grid.times()))
    assert fw_action(scalar_ou(), path).total <= 1e-8


def test_constant_path_at_equilibrium_is_exactly_zero():
    m = make_model("double-well")
    path = DiscretePath(grid=TimeGrid(2.0, 64), nodes=np.ones(65))
    assert fw_action(m, path).total == 0.0
    m2 = make_model("rotational-ou")
    path2 = DiscretePath(grid=TimeGrid(2.0, 64), nodes=np.zeros((65, 2)))
    assert fw_action(m2, path2).total == 0.0


def _circle_rate_by_quadrature(model, radius, omega):
    """Continuum action rate of the circular orbit by direct quadrature."""

    def integrand(t):
        y = radius * np.array([np.cos(omega * t), np.sin(omega * t)])
        ydot = radius * omega * np.array([-np.sin(omega * t), np.cos(omega * t)])
        u = ydot - model.drift(y)
        ainv = model.a_inv(y)
        return 0.25 * float(u @ ainv @ u)

    period = 2 * np.pi / abs(omega)
    total, _ = quad(integrand, 0.0, period, limit=200)
    return total / period


def test_circular_orbit_action_matches_quadrature_and_closed_form():
    gamma, radius, omega = 1.0, 1.2, 1.4
    m = make_model("rotational-ou", gamma=gamma)
    hm = HolonomicMeasure(path=circle(radius, omega, 4096))
    value = rate_I(m, hm)
    oracle = _circle_rate_by_quadrature(m, radius, omega)
    closed = radius**2 * (1 + (omega - gamma) ** 2) / 4
    assert abs(oracle - closed) <= 1e-10 * closed
    assert abs(value - closed) <= 1e-4 * closed


def test_rate_of_constant_path_at_drift_zero():
    m = make_model("rotational-ou")
    hm = HolonomicMeasure(path=PeriodicPath(period=1.0, nodes=np.zeros((32, 2))))
    assert rate_I(m, hm) == 0.0


def test_action_grid_refinement_second_order():
    m = make_model("rotational-ou", gamma=1.0)

    def smooth_loop(n):
        t = np.linspace(0.0, 1.0, n + 1)[:-1]
        nodes = np.column_stack(
            [np.cos(2 * np.pi * t) + 0.3 * np.cos(4 * np.pi * t),
             np.sin(2 * np.pi * t) - 0.2 * np.sin(4 * np.pi * t)]
        )
        return HolonomicMeasure(path=PeriodicPath(period=3.0, nodes=nodes))

    vals = [rate_I(m, smooth_loop(n)) for n in (128, 256, 512)]
    # Richardson: error ratio ~ 4 for a second-order quadrature
    e1 = abs(vals[0] - vals[2])
    e2 = abs(vals[1] - vals[2])
    assert e1 / e2 > 3.0


def test_gc_zero_circulation():
    m = make_model("double-well")
    path = random_periodic_path(2.0, 64, 1, scale=0.5, seed=1).one_period()
    gc = gc_observable(m, path, eps=0.3)
    assert gc.stratonovich == 0.0
    assert gc.ito == 0.0
    assert gc.correction == 0.0
    assert gc.periodization_jump_term == 0.0


def test_gc_circular_orbit_work_rate():
    gamma, radius, omega = 1.0, 0.9, 1.7
    m = make_model("rotational-ou", gamma=gamma)
    gc = gc_observable(m, circle(radius, omega, 4096).one_period(), eps=0.0)
    target = gamma * omega * radius**2
    assert abs(gc.stratonovich - target) <= 1e-4 * abs(target)
    assert gc.periodization_jump_term == 0.0


def test_gc_jump_term_for_open_path():
    m = make_model("rotational-ou", gamma=1.0)
    grid = TimeGrid(1.0, 32)
    nodes = np.column_stack([grid.times(), 0.5 * grid.times()])
    gc = gc_observable(m, DiscretePath(grid=grid, nodes=nodes), eps=0.0)
    xN = nodes[-1]
    expected = float(m.gc_vector(xN) @ (nodes[0] - xN))
    assert np.isclose(gc.periodization_jump_term, expected)


def test_stratonovich_ito_gap_first_order_on_smooth_paths():
    # with eps = 0 the correction vanishes and the two readings agree at O(dt);
    # bounded-rotation has a genuinely nonlinear work integrand
    m = make_model("bounded-rotation", gamma=1.0)

    def gap(n):
        t = np.linspace(0.0, 1.0, n + 1)
        nodes = np.column_stack(
            [1.0 + np.cos(2 * np.pi * t), np.sin(2 * np.pi * t)]
        )
        gc = gc_observable(m, DiscretePath(grid=TimeGrid(2.0, n), nodes=nodes), 0.0)
        return abs(gc.stratonovich - gc.ito)

    g1, g2 = gap(256), gap(512)
    assert g2 <= 0.6 * g1


def test_ito_correction_matches_simulated_gap():
    # the derived trace formula is validated against the brute midpoint vs
    # left-point difference on simulated diffusive paths
    m = make_model("rotational-ou", gamma=1.0)
    eps = 0.2
    cfg = SimConfig(eps=eps, grid=TimeGrid(20.0, 8000), seed=21, batch=64)
    res = batch_simulate(m, cfg, [0.5, 0.0], keep_paths=True)
    gaps, corrections = [], []
    for path in res.paths:
        gc = gc_observable(m, path, eps)
        gaps.append(gc.stratonovich - gc.ito)
        corrections.append(gc.correction)
    gaps = np.asarray(gaps)
    se = gaps.std(ddof=1) / np.sqrt(len(gaps))
    assert abs(gaps.mean() - np.mean(corrections)) <= 3 * se


def test_time_reversal_is_involution():
    p = random_periodic_path(2.0, 64, 2, scale=1.0, seed=2)
    assert np.allclose(time_reversed(time_reversed(p)).nodes, p.nodes)
    assert np.allclose(time_reversed(p).nodes[0], p.nodes[0])


def test_reversal_gap_gradient_model():
    m = make_model("double-well")
    hm = HolonomicMeasure(path=random_periodic_path(2.0, 2000, 1, scale=0.5, seed=3))
    gap, mean_w = reversal_gap(m, hm)
    assert mean_w == 0.0
    assert abs(gap) <= 1e-6


def test_reversal_gap_constant_path():
    m = make_model("rotational-ou")
    hm = HolonomicMeasure(path=PeriodicPath(period=1.0, nodes=np.zeros((32, 2))))
    assert reversal_gap(m, hm) == (0.0, 0.0)


def test_reversal_gap_circular_orbit_closed_form():
    gamma, radius, omega = 1.0, 1.1, 1.3
    m = make_model("rotational-ou", gamma=gamma)
    target = gamma * omega * radius**2
    errs = []
    for n in (512, 2048):
        gap, mean_w = reversal_gap(m, HolonomicMeasure(path=circle(radius, omega, n)))
        errs.append(abs(gap - target))
        assert abs(gap - mean_w) <= 1e-12  # quadratic V: defect is roundoff
    assert errs[1] < errs[0]
    assert errs[1] <= 1e-4 * target


def test_reversal_identity_defect_order():
    # common smooth loop sampled at dt and dt/2: defect at least halves
    for family in ("rotational-ou", "double-well", "anisotropic-ou"):
        m = make_model(family)
        fine = random_periodic_path(2.0, 4000, m.dim, scale=0.6, seed=4)
        coarse = PeriodicPath(period=2.0, nodes=fine.nodes[::2])
        d_coarse = abs(np.subtract(*reversal_gap(m, HolonomicMeasure(path=coarse))))
        d_fine = abs(np.subtract(*reversal_gap(m, HolonomicMeasure(path=fine))))
        assert d_fine <= 0.6 * d_coarse + 1e-12


def test_lower_bound_calibration_diagnostic():
    for family in ("rotational-ou", "double-well"):
        rows = lower_bound_calibration(make_model(family), n_paths=10, seed=8)
        assert len(rows) == 3
        # the calibrated offset should essentially hold on fresh samples
        assert min(r.fresh_max_defect for r in rows) <= 1e-2


def test_action_value_per_unit_time_consistency():
    m = make_model("rotational-ou")
    path = random_periodic_path(3.0, 64, 2, scale=0.5, seed=6).one_period()
    av = fw_action(m, path)
    assert np.isclose(av.per_unit_time, av.total / 3.0)
    assert av.total >= 0.0


def test_exact_midpoint_flow_has_exactly_zero_action():
    # implicit-midpoint flow of the scalar OU drift solves v_k = b(m_k)
    # exactly, so the quadrature sees a true zero of the integrand
    n, dt = 200, 0.01
    nodes = np.empty(n + 1)
    nodes[0] = 1.0
    for k in range(n):
        nodes[k + 1] = nodes[k] * (1 - dt / 2) / (1 + dt / 2)
    path = DiscretePath(grid=TimeGrid(n * dt, n), nodes=nodes)
    assert fw_action(scalar_ou(), path).total <= 1e-25  # roundoff only
