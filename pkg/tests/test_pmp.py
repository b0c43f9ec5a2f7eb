"""Feedback solver, Hamilton-equation integration, conservation, action functional."""

import numpy as np
import pytest

from pontrylie.errors import (
    ConvergenceError,
    DimensionMismatchError,
    PontrylieError,
    RegularityError,
    TrajectoryFormatError,
)
from pontrylie.heisenberg import (
    full_state_closed_form,
    unit_cylinder_costate,
)
from pontrylie.ocp import ControlProblem, PontryaginPoint, ProblemJacobians
from pontrylie.pmp import (
    PmpSolverConfig,
    Trajectory,
    _newton_feedback,
    consistency_residual,
    dirac_membership_residuals,
    integrate_pmp,
    lagrange_pontryagin_action,
    momentum_map,
    optimal_feedback,
    regularity_check,
    time_grid,
)

TWO_PI = 2.0 * np.pi


def body_momentum(problem, x, p):
    return np.asarray(problem.symmetry.body_frame(x), dtype=float).T @ p


def degenerate_problem():
    """L and f both linear in u: the control Hessian vanishes identically."""
    return ControlProblem(
        n=2,
        r=2,
        dynamics=lambda x, u: np.array([u[0] + x[0], u[1]]),
        lagrangian=lambda x, u: u[0] + u[1],
        jacobians=ProblemJacobians(
            df_dx=lambda x, u: np.array([[1.0, 0.0], [0.0, 0.0]]),
            df_du=lambda x, u: np.eye(2),
            dL_dx=lambda x, u: np.zeros(2),
            dL_du=lambda x, u: np.ones(2),
        ),
    )


def test_consistency_residual_vanishes_at_feedback(heis_problem):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x, p = rng.normal(size=(2, 3))
        u = body_momentum(heis_problem, x, p)[:2]  # u_a = <lambda, Gamma_a>
        res = consistency_residual(heis_problem, PontryaginPoint(x, p, u))
        assert np.max(np.abs(res)) <= 1e-12


def test_consistency_residual_zero_costate(heis_problem):
    res = consistency_residual(heis_problem, PontryaginPoint(np.zeros(3), np.zeros(3), [1.0, 1.0]))
    assert np.allclose(res, [-1.0, -1.0])


def test_consistency_residual_at_newton_point(heis_problem, default_config):
    x = np.array([0.3, -0.7, 2.0])
    p = np.array([1.0, 0.5, -0.25])
    u = optimal_feedback(heis_problem, x, p, np.zeros(2), default_config)
    res = consistency_residual(heis_problem, PontryaginPoint(x, p, u))
    assert np.max(np.abs(res)) <= default_config.newton_tol


def test_regularity_heisenberg(heis_problem, default_config):
    rng = np.random.default_rng(1)
    for _ in range(5):
        pt = PontryaginPoint(rng.normal(size=3), rng.normal(size=3), rng.normal(size=2))
        assert regularity_check(heis_problem, pt, default_config)


def test_regularity_degenerate_problem(default_config):
    pt = PontryaginPoint([0.1, 0.2], [1.0, -1.0], [0.3, 0.4])
    assert not regularity_check(degenerate_problem(), pt, default_config)


def test_regularity_no_controls(default_config):
    problem = ControlProblem(n=1, r=0, dynamics=lambda x, u: -x, lagrangian=lambda x, u: 0.0)
    assert regularity_check(problem, PontryaginPoint([1.0], [1.0], []), default_config)


def test_feedback_single_newton_step(heis_problem, default_config):
    # phi is affine in u with unit Hessian, so one update lands exactly
    theta, k = 0.93, 0.4
    u, iterations, residual, _ = _newton_feedback(
        heis_problem, np.zeros(3), unit_cylinder_costate(theta, k), np.zeros(2), default_config
    )
    assert iterations == 1
    assert residual <= default_config.newton_tol
    assert np.allclose(u, [np.cos(theta), np.sin(theta)], atol=1e-14)


def test_feedback_fixed_point(heis_problem, default_config):
    x = np.array([0.4, 0.6, -1.0])
    p = np.array([0.3, -0.2, 0.9])
    u_star = body_momentum(heis_problem, x, p)[:2]
    u, iterations, _, _ = _newton_feedback(heis_problem, x, p, u_star, default_config)
    assert iterations == 0
    assert np.array_equal(u, u_star)


def test_feedback_zero_momentum(heis_problem, default_config):
    u = optimal_feedback(heis_problem, np.zeros(3), np.zeros(3), np.zeros(2), default_config)
    assert np.array_equal(u, np.zeros(2))


def test_feedback_nonconvergence_reports_residual():
    # phi = p * exp(u) has no root; a small budget must fail loudly
    problem = ControlProblem(
        n=1, r=1, dynamics=lambda x, u: np.array([np.exp(u[0])]), lagrangian=lambda x, u: 0.0
    )
    config = PmpSolverConfig(newton_max_iter=5)
    with pytest.raises(ConvergenceError) as err:
        optimal_feedback(problem, [0.0], [2.0], [0.0], config)
    assert np.isfinite(err.value.residual)


def test_feedback_singular_hessian_raises(default_config):
    # p = (2, -1) keeps the (constant) stationarity residual nonzero, so the
    # solver must inspect the vanishing Hessian and refuse
    with pytest.raises(RegularityError):
        optimal_feedback(degenerate_problem(), [0.0, 0.0], [2.0, -1.0], [0.0, 0.0], default_config)


def test_integrate_conserves_hamiltonian(heis_problem):
    config = PmpSolverConfig(rk_step=1e-3)
    traj = integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0, 1.0], TWO_PI, config)
    h = traj.channel("H")
    assert np.max(np.abs(h - 0.5)) <= 1e-6
    # observed drift obeys the C * step^4 * T bound with C < 10
    assert np.max(np.abs(h - h[0])) <= 10.0 * config.rk_step**4 * TWO_PI


def test_integrate_zero_duration(heis_problem, default_config):
    traj = integrate_pmp(heis_problem, [0.1, 0.2, 0.3], [1.0, 0.0, 0.5], 0.0, default_config)
    assert len(traj) == 1
    assert np.allclose(traj.block("x")[0], [0.1, 0.2, 0.3])
    assert np.allclose(traj.block("p")[0], [1.0, 0.0, 0.5])


def test_integrate_casimir_exact(heis_problem):
    config = PmpSolverConfig(rk_step=2e-3)
    for k in (0.5, 2.0):
        traj = integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0, k], TWO_PI, config)
        lam3 = np.array(
            [body_momentum(heis_problem, x, p)[2] for x, p in zip(traj.block("x"), traj.block("p"))]
        )
        assert np.max(np.abs(lam3 - k)) <= 1e-9


def test_integrate_rows_satisfy_stationarity(heis_problem):
    config = PmpSolverConfig(rk_step=5e-3)
    traj = integrate_pmp(heis_problem, np.zeros(3), [0.6, -0.8, 1.0], 1.0, config)
    for x, p, u in zip(traj.block("x"), traj.block("p"), traj.block("u")):
        res = consistency_residual(heis_problem, PontryaginPoint(x, p, u))
        assert np.max(np.abs(res)) <= 10.0 * config.newton_tol


def test_momentum_channels_conserved(heis_problem):
    config = PmpSolverConfig(rk_step=1e-3)
    traj = integrate_pmp(heis_problem, np.zeros(3), unit_cylinder_costate(0.2, 1.0), TWO_PI, config)
    for name in ("J1", "J2", "J3"):
        values = traj.channel(name)
        assert np.max(np.abs(values - values[0])) <= 1e-8, name


def test_rk4_order_against_closed_form(heis_problem):
    theta, k = 0.0, 1.0

    def endpoint_error(step):
        traj = integrate_pmp(
            heis_problem, np.zeros(3), unit_cylinder_costate(theta, k), TWO_PI,
            PmpSolverConfig(rk_step=step),
        )
        exact = full_state_closed_form(theta, k, traj.times[-1])
        state = np.concatenate([traj.block("x")[-1], traj.block("p")[-1]])
        return np.max(np.abs(state - exact))

    coarse = endpoint_error(TWO_PI / 128)
    fine = endpoint_error(TWO_PI / 256)
    ratio = coarse / fine
    assert 12.0 <= ratio <= 20.0, f"expected 4th-order halving ratio, got {ratio}"


def test_integrate_validates_shapes(heis_problem, default_config):
    with pytest.raises(DimensionMismatchError):
        integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0], 1.0, default_config)
    with pytest.raises(DimensionMismatchError):
        integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0, 1.0], -1.0, default_config)


def test_feedback_failure_reports_time(heis_problem):
    problem = ControlProblem(
        n=1, r=1, dynamics=lambda x, u: np.array([np.exp(u[0])]), lagrangian=lambda x, u: 0.0
    )
    with pytest.raises(ConvergenceError) as err:
        integrate_pmp(problem, [0.0], [1.0], 0.5, PmpSolverConfig(newton_max_iter=4, rk_step=0.1))
    assert "t=" in str(err.value)


def test_action_along_geodesic(heis_problem):
    config = PmpSolverConfig(rk_step=1e-3)
    traj = integrate_pmp(heis_problem, np.zeros(3), unit_cylinder_costate(0.3, 1.0), 1.0, config)
    action = lagrange_pontryagin_action(heis_problem, traj)
    # L = |u|^2/2 = 1/2 along the unit cylinder; the pairing term is tiny
    assert abs(action - 0.5) <= 1e-4


def test_action_zero_curve(heis_problem):
    traj = Trajectory(
        times=np.linspace(0.0, 1.0, 11),
        columns=("x1", "x2", "x3", "p1", "p2", "p3", "u1", "u2"),
        states=np.zeros((11, 8)),
    )
    assert lagrange_pontryagin_action(heis_problem, traj) == 0.0


def test_action_sampling_density(heis_problem):
    def action_at(step):
        traj = integrate_pmp(
            heis_problem, np.zeros(3), unit_cylinder_costate(0.0, 1.0), 1.0,
            PmpSolverConfig(rk_step=step),
        )
        return lagrange_pontryagin_action(heis_problem, traj)

    coarse, fine = action_at(2e-2), action_at(1e-2)
    assert abs(coarse - fine) <= 10.0 * (2e-2) ** 2


def test_action_needs_two_samples(heis_problem, default_config):
    traj = integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0, 1.0], 0.0, default_config)
    with pytest.raises(TrajectoryFormatError):
        lagrange_pontryagin_action(heis_problem, traj)


def test_momentum_map_values(heis_problem):
    # at the identity-chart origin the generators reduce to the basis vectors
    p = np.array([0.4, -1.1, 2.2])
    assert np.allclose(momentum_map(heis_problem, np.zeros(3), p).coeffs, p)
    assert np.allclose(momentum_map(heis_problem, [1.0, 2.0, 3.0], np.zeros(3)).coeffs, 0.0)


def test_momentum_map_requires_symmetry():
    problem = ControlProblem(n=1, r=0, dynamics=lambda x, u: -x, lagrangian=lambda x, u: 0.0)
    with pytest.raises(PontrylieError):
        momentum_map(problem, [0.0], [1.0])


def test_dirac_membership_residuals_small(heis_problem):
    config = PmpSolverConfig(rk_step=5e-3)
    traj = integrate_pmp(heis_problem, np.zeros(3), [0.8, 0.6, -0.5], 2.0, config)
    residuals = dirac_membership_residuals(heis_problem, traj, config)
    assert residuals.shape == (len(traj),)
    assert np.max(residuals) <= 1e-10


def test_time_grid_edges():
    assert np.array_equal(time_grid(0.0, 0.1), [0.0])
    grid = time_grid(0.05, 0.1)  # duration shorter than one step
    assert np.allclose(grid, [0.0, 0.05])
    grid = time_grid(6.2832, 1e-3)  # non-divisible duration closes with a partial step
    assert grid[-1] == 6.2832
    assert len(grid) == 6285
    with pytest.raises(DimensionMismatchError):
        time_grid(-1.0, 0.1)
    with pytest.raises(DimensionMismatchError):
        time_grid(1.0, 0.0)


def test_trajectory_roundtrip(tmp_path, heis_problem, default_config):
    traj = integrate_pmp(heis_problem, np.zeros(3), [1.0, 0.0, 1.0], 0.02, default_config)
    csv_path = tmp_path / "traj.csv"
    json_path = tmp_path / "traj.json"
    traj.to_csv(csv_path)
    traj.to_json(json_path)
    back_csv = Trajectory.from_csv(csv_path)
    back_json = Trajectory.from_json(json_path)
    for back in (back_csv, back_json):
        assert back.columns == traj.columns
        assert np.array_equal(back.states, traj.states)
        assert np.array_equal(back.times, traj.times)
        assert set(back.channels) == set(traj.channels)
        assert np.array_equal(back.channel("H"), traj.channel("H"))


def test_trajectory_validation():
    with pytest.raises(TrajectoryFormatError):
        Trajectory(times=[0.0, 0.0], columns=("x1",), states=np.zeros((2, 1)))
    with pytest.raises(TrajectoryFormatError):
        Trajectory(times=[0.0, 1.0], columns=("x1", "x2"), states=np.zeros((2, 1)))
    with pytest.raises(TrajectoryFormatError):
        Trajectory(
            times=[0.0, 1.0],
            columns=("x1",),
            states=np.zeros((2, 1)),
            channels={"H": np.zeros(3)},
        )
    with pytest.raises(TrajectoryFormatError):
        Trajectory(
            times=[0.0, 1.0],
            columns=("x1",),
            states=np.zeros((2, 1)),
            channels={"x1": np.zeros(2)},
        )


def test_trajectory_block_orders_numerically():
    columns = tuple(f"x{i}" for i in (2, 10, 1))
    states = np.array([[2.0, 10.0, 1.0]])
    traj = Trajectory(times=[0.0], columns=columns, states=states)
    assert np.array_equal(traj.block("x")[0], [1.0, 2.0, 10.0])
