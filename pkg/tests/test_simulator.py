from __future__ import annotations

import numpy as np
import pytest

from rigidform.control import GRADIENT, MISMATCHED, ControllerConfig
from rigidform.errors import DivergenceError, IntegrationError, InvalidInputError
from rigidform.graph import FormationGraph, ShapeSpec
from rigidform.simulator import (
    InitialSpec,
    SimConfig,
    Trajectory,
    detect_steady_state,
    initial_state,
    random_ball,
    random_velocities,
    rk4_step,
    simulate,
    window_variation,
)


def test_rk4_exponential_decay():
    x = np.array([1.0])
    h = 1e-3
    for k in range(1000):
        x = rk4_step(lambda t, y: -y, x, h, k * h)
    assert abs(x[0] - np.exp(-1.0)) < 1e-9


def _oscillator_error(h, t_end=10.0):
    x = np.array([1.0, 0.0])
    f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
    steps = int(round(t_end / h))
    for k in range(steps):
        x = rk4_step(f, x, h, k * h)
    return np.hypot(x[0] - np.cos(t_end), x[1] + np.sin(t_end))


def test_rk4_oscillator_energy_drift():
    x = np.array([1.0, 0.0])
    f = lambda t, y: np.array([y[1], -y[0]])  # noqa: E731
    for k in range(10000):
        x = rk4_step(f, x, 1e-3, k * 1e-3)
    assert abs(x @ x - 1.0) < 1e-8


def test_rk4_fourth_order():
    errs = [_oscillator_error(h) for h in (0.1, 0.05, 0.025)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 4.0) < 0.15), orders


def test_rk4_time_argument_is_used():
    # x' = t has x(1) = 1/2 exactly under RK4
    x = np.array([0.0])
    for k in range(10):
        x = rk4_step(lambda t, y: np.array([t]), x, 0.1, k * 0.1)
    assert x[0] == pytest.approx(0.5, abs=1e-14)


def test_rk4_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        rk4_step(lambda t, y: y, np.ones(1), 0.0)
    with pytest.raises(IntegrationError):
        rk4_step(lambda t, y: np.array([np.inf]), np.ones(1), 0.1)


def _tri_cfg(tri_graph, unit_triangle, **kw):
    base = dict(
        graph=tri_graph, shape=unit_triangle, controller=ControllerConfig(GRADIENT),
        initial=InitialSpec("box", box_size=2.0, speed_cap=0.5), h=1e-3, t_end=2.0, seed=3,
    )
    base.update(kw)
    return SimConfig(**base)


def test_equilibrium_is_preserved(tri_graph, unit_triangle):
    cfg = _tri_cfg(tri_graph, unit_triangle, initial=InitialSpec("explicit", p=unit_triangle.positions))
    traj = simulate(cfg)
    assert np.abs(traj.p - unit_triangle.positions).max() < 1e-12
    assert np.abs(traj.v).max() < 1e-12


def test_simulation_is_deterministic(tri_graph, unit_triangle):
    a = simulate(_tri_cfg(tri_graph, unit_triangle))
    b = simulate(_tri_cfg(tri_graph, unit_triangle))
    assert np.array_equal(a.p, b.p) and np.array_equal(a.v, b.v)
    c = simulate(_tri_cfg(tri_graph, unit_triangle, seed=4))
    assert not np.array_equal(a.p[0], c.p[0])


def test_recording_grid(tri_graph, unit_triangle):
    traj = simulate(_tri_cfg(tri_graph, unit_triangle, t_end=0.105, record_every=10))
    assert traj.times[0] == 0.0 and traj.times[-1] == pytest.approx(0.105)
    assert np.allclose(np.diff(traj.times[:-1]), 0.01)
    z = traj.p[:, tri_graph.tails] - traj.p[:, tri_graph.heads]
    assert np.allclose(traj.e, (z**2).sum(axis=2) - 1.0)


def test_explicit_state_override(tri_graph, unit_triangle):
    cfg = _tri_cfg(tri_graph, unit_triangle, t_end=0.01)
    x0 = np.concatenate([unit_triangle.positions.ravel(), np.zeros(6)])
    assert np.abs(simulate(cfg, x0).v).max() < 1e-12
    with pytest.raises(InvalidInputError):
        simulate(cfg, np.zeros(5))


def test_estimator_state_starts_at_mu_hat0(tetra_graph, tetra70):
    mu = np.arange(6.0)
    cfg = SimConfig(
        tetra_graph, tetra70, ControllerConfig("estimator1", mu=mu, mu_hat0=np.ones(6)),
        InitialSpec("explicit", p=tetra70.positions), t_end=0.01,
    )
    traj = simulate(cfg)
    assert np.array_equal(traj.mu_hat[0], np.ones(6))


def test_divergence_guard(tri_graph, unit_triangle):
    v = np.zeros((3, 2))
    v[:, 0] = 3e6  # rigid translation: no restoring force, travel about 3e6
    cfg = _tri_cfg(tri_graph, unit_triangle, initial=InitialSpec("explicit", p=unit_triangle.positions, v=v), t_end=5.0)
    with pytest.raises(DivergenceError) as ei:
        simulate(cfg)
    assert 0 < ei.value.time < 5.0


def test_config_validation(tri_graph, unit_triangle):
    with pytest.raises(InvalidInputError):
        _tri_cfg(tri_graph, unit_triangle, h=0.0)
    with pytest.raises(InvalidInputError):
        _tri_cfg(tri_graph, unit_triangle, t_end=1e-4)
    with pytest.raises(InvalidInputError):
        _tri_cfg(tri_graph, unit_triangle, record_every=0)
    with pytest.raises(InvalidInputError):
        InitialSpec("grid")
    with pytest.raises(InvalidInputError):
        InitialSpec("explicit")


def test_initial_box_and_caps(tetra_graph, tetra70):
    spec = InitialSpec("box", box_size=100.0, box_min=-10.0, speed_cap=2.0)
    for seed in range(20):
        p, v = initial_state(spec, tetra_graph, tetra70, seed)
        assert np.all(p >= -10.0) and np.all(p <= 90.0)
        assert np.linalg.norm(v.reshape(4, 3), axis=1).max() < 2.0


def test_initial_perturbed_ball(hex_graph, hex50):
    spec = InitialSpec("perturbed", fraction=0.1, speed_cap=1.0)
    for seed in range(20):
        p, _ = initial_state(spec, hex_graph, hex50, seed)
        off = np.linalg.norm(p.reshape(6, 2) - hex50.positions, axis=1)
        assert off.max() <= 5.0


def test_random_ball_fills_uniformly():
    rng = np.random.default_rng(0)
    pts = random_ball(rng, 20000, 2, 1.0)
    r = np.linalg.norm(pts, axis=1)
    assert r.max() <= 1.0
    # area fraction inside radius 1/2 is 1/4
    assert np.mean(r < 0.5) == pytest.approx(0.25, abs=0.01)
    assert np.all(random_velocities(rng, 3, 2, 0.0) == 0)


def _synthetic(times, speed, err=None):
    G = FormationGraph(2, ((0, 1),))
    shape = ShapeSpec.from_positions(G, [[0.0, 0.0], [1.0, 0.0]])
    N = times.size
    P = np.zeros((N, 2, 2))
    P[:, 1, 0] = 1.0
    V = np.zeros((N, 2, 2))
    V[:, 0, 0] = speed
    e = np.zeros((N, 1)) if err is None else err.reshape(N, 1)
    return Trajectory(G, shape, ControllerConfig(GRADIENT), times, P, V, e)


def test_steady_state_exponential_oracle():
    t = np.linspace(0.0, 20.0, 20001)
    traj = _synthetic(t, np.exp(-t))
    W, tol = 1.0, 1e-3
    ok, t_ss = detect_steady_state(traj, W, tol)
    expected = np.log((1.0 - np.exp(-W)) / tol) + W
    assert ok
    assert t_ss == pytest.approx(expected, abs=2e-3)
    assert t_ss == pytest.approx(7.449, abs=2e-3)


def test_steady_state_constant_and_never():
    t = np.linspace(0.0, 10.0, 1001)
    ok, t_ss = detect_steady_state(_synthetic(t, np.full_like(t, 3.0)), 1.0, 1e-3)
    assert ok and t_ss == pytest.approx(1.0)
    ok, t_ss = detect_steady_state(_synthetic(t, 2.0 + np.sin(t)), 1.0, 1e-3)
    assert not ok and t_ss is None
    with pytest.raises(InvalidInputError):
        detect_steady_state(_synthetic(t, t), 20.0, 1e-3)


def test_window_variation_floor():
    vals = np.array([[1e-6, 100.0], [2e-6, 101.0]])
    var = window_variation(vals)
    assert var[0] == pytest.approx(1e-6)
    assert var[1] == pytest.approx(1.0 / 100.5)


def test_gradient_run_converges(tri_graph, unit_triangle):
    traj = simulate(_tri_cfg(tri_graph, unit_triangle, t_end=40.0, record_every=100))
    assert np.abs(traj.e[-1]).max() < 1e-6
    assert traj.speeds[-1].max() < 1e-6


def test_mismatch_run_reaches_constant_speed(tetra_graph, tetra70):
    mu = np.array([12.14, -41.12, -16.64, -5.91, 0.45, 18.41]) * 1e-2
    cfg = SimConfig(
        tetra_graph, tetra70, ControllerConfig(MISMATCHED, mu=mu),
        InitialSpec("perturbed", fraction=0.05), t_end=40.0, record_every=100,
    )
    traj = simulate(cfg)
    ok, _ = detect_steady_state(traj, 5.0, 1e-4)
    assert ok
    assert traj.speeds[-1].min() > 1e-3
