"""Symmetry-reduced maximum-principle dynamics.

A reduced problem lives on (base point z, base costate p_z, coalgebra point
mu, control u) with reduced Hamiltonian

    h(z, p_z, mu, u) = <p_z, base_dynamics(z, u)> + <mu, fiber_dynamics(z, u)> - l(z, u)

and evolves by

    z_dot   = dh/dp_z
    pz_dot  = -dh/dz - curvature coupling (coordinate form, zero by default)
    mu_dot  = sign * ad*_xi(mu),   xi = dh/dmu
    dh/du   = 0                     (controls eliminated by Newton)

The default sign is +1, which together with the package's ad* convention
reproduces the closed-form Heisenberg flow; ``PmpSolverConfig.coadjoint_sign``
flips it for the opposite convention.  When the base is zero-dimensional
(state space = symmetry group) this is the pure Lie-Poisson system on the
coalgebra.  Covariant derivatives are represented as plain coordinate
derivatives in the caller's trivialization.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, NamedTuple, Optional

import numpy as np

from . import dirac
from ._fd import fd_gradient, fd_hessian_direct, fd_hessian_from_gradient
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    EvaluationError,
    RegularityError,
    ReductionUnsupportedError,
    TrajectoryFormatError,
)
from .lie import LieAlgebraSpec, coadjoint
from .ocp import ControlProblem, PontryaginPoint
from .pmp import PmpSolverConfig, Trajectory, _rk4_dae, time_grid


@dataclass(frozen=True)
class ReducedJacobians:
    """Optional analytic derivatives of the reduced data (same spirit as ocp)."""

    dl_dz: Optional[Callable] = None
    dl_du: Optional[Callable] = None
    dbase_dz: Optional[Callable] = None
    dbase_du: Optional[Callable] = None
    dfiber_dz: Optional[Callable] = None
    dfiber_du: Optional[Callable] = None
    d2l_du2: Optional[Callable] = None
    d2base_du2: Optional[Callable] = None
    d2fiber_du2: Optional[Callable] = None


@dataclass(frozen=True)
class ReducedProblem:
    """Reduced dynamics data on base (+) coalgebra (+) controls.

    ``base_dynamics(z, u)`` returns the base velocity (length base_dim) and
    ``fiber_dynamics(z, u)`` the algebra coefficients of the vertical part.
    ``curvature(z, mu, v, w)``, when given, is the scalar curvature coupling
    evaluated on two base vectors (antisymmetric in v, w); it enters the p_z
    equation as the covector -curvature(z, mu, z_dot, e_i).  Casimirs are
    monitored, never discovered: a dict of name -> function of mu.
    """

    base_dim: int
    algebra: LieAlgebraSpec
    control_dim: int
    lagrangian: Callable
    base_dynamics: Callable
    fiber_dynamics: Callable
    curvature: Optional[Callable] = None
    jacobians: Optional[ReducedJacobians] = None
    casimirs: Dict[str, Callable] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.base_dim < 0 or self.control_dim < 0:
            raise DimensionMismatchError("base_dim and control_dim must be nonnegative")


@dataclass(frozen=True)
class ReducedState:
    """A reduced bundle point (z, p_z, mu, u)."""

    z: np.ndarray
    p_z: np.ndarray
    mu: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        for name in ("z", "p_z", "mu", "u"):
            value = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, value)

    def conform(self, problem: ReducedProblem) -> "ReducedState":
        ok = (
            self.z.shape == (problem.base_dim,)
            and self.p_z.shape == (problem.base_dim,)
            and self.mu.shape == (problem.algebra.dim,)
            and self.u.shape == (problem.control_dim,)
        )
        if not ok:
            raise DimensionMismatchError(
                f"reduced state shapes {self.z.shape}/{self.p_z.shape}/{self.mu.shape}/{self.u.shape} "
                f"do not match s={problem.base_dim}, dim={problem.algebra.dim}, r={problem.control_dim}"
            )
        return self


def _base(problem: ReducedProblem, z, u) -> np.ndarray:
    v = np.atleast_1d(np.asarray(problem.base_dynamics(z, u), dtype=float))
    if v.shape != (problem.base_dim,):
        raise DimensionMismatchError(f"base dynamics returned shape {v.shape}")
    return v


def _fiber(problem: ReducedProblem, z, u) -> np.ndarray:
    v = np.atleast_1d(np.asarray(problem.fiber_dynamics(z, u), dtype=float))
    if v.shape != (problem.algebra.dim,):
        raise DimensionMismatchError(f"fiber dynamics returned shape {v.shape}")
    return v


def reduced_hamiltonian(problem: ReducedProblem, state: ReducedState) -> float:
    """h = <p_z, base> + <mu, fiber> - l, evaluated literally."""
    state.conform(problem)
    value = (
        float(state.p_z @ _base(problem, state.z, state.u))
        + float(state.mu @ _fiber(problem, state.z, state.u))
        - float(problem.lagrangian(state.z, state.u))
    )
    if not np.isfinite(value):
        raise EvaluationError("reduced Hamiltonian is non-finite", point=state)
    return value


class ReducedPartials(NamedTuple):
    dh_dz: np.ndarray
    dh_dpz: np.ndarray
    dh_dmu: np.ndarray
    dh_du: np.ndarray
    d2h_du2: np.ndarray


def reduced_partials(
    problem: ReducedProblem, z, p_z, mu, u, fd_step: float = 1e-6
) -> ReducedPartials:
    """Partials of the reduced Hamiltonian; dh/dp_z and dh/dmu are always exact."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    p_z = np.atleast_1d(np.asarray(p_z, dtype=float))
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    jac = problem.jacobians

    def h_at(z_, u_):
        return (
            float(p_z @ _base(problem, z_, u_))
            + float(mu @ _fiber(problem, z_, u_))
            - float(problem.lagrangian(z_, u_))
        )

    dh_dpz = _base(problem, z, u)
    dh_dmu = _fiber(problem, z, u)

    have_first_dz = jac is not None and (
        problem.base_dim == 0
        or (jac.dbase_dz is not None and jac.dfiber_dz is not None and jac.dl_dz is not None)
    )
    if problem.base_dim == 0:
        dh_dz = np.zeros(0)
    elif have_first_dz:
        dh_dz = (
            np.asarray(jac.dbase_dz(z, u), dtype=float).T @ p_z
            + np.asarray(jac.dfiber_dz(z, u), dtype=float).T @ mu
            - np.asarray(jac.dl_dz(z, u), dtype=float)
        )
    else:
        dh_dz = fd_gradient(lambda z_: h_at(z_, u), z, fd_step)

    have_first_du = jac is not None and jac.dfiber_du is not None and jac.dl_du is not None

    def dh_du_at(u_):
        if have_first_du:
            out = np.asarray(jac.dfiber_du(z, u_), dtype=float).T @ mu - np.asarray(
                jac.dl_du(z, u_), dtype=float
            )
            if problem.base_dim and jac.dbase_du is not None:
                out = out + np.asarray(jac.dbase_du(z, u_), dtype=float).T @ p_z
            return out
        return fd_gradient(lambda v: h_at(z, v), u_, fd_step)

    dh_du = dh_du_at(u)

    if jac is not None and jac.d2l_du2 is not None and jac.d2fiber_du2 is not None:
        w = np.tensordot(mu, np.asarray(jac.d2fiber_du2(z, u), dtype=float), axes=1) - np.asarray(
            jac.d2l_du2(z, u), dtype=float
        )
        if problem.base_dim and jac.d2base_du2 is not None:
            w = w + np.tensordot(p_z, np.asarray(jac.d2base_du2(z, u), dtype=float), axes=1)
    elif have_first_du:
        w = fd_hessian_from_gradient(dh_du_at, u, fd_step)
    else:
        w = fd_hessian_direct(lambda v: h_at(z, v), u, fd_step)

    parts = ReducedPartials(dh_dz, dh_dpz, dh_dmu, np.asarray(dh_du, dtype=float), 0.5 * (w + w.T))
    for arr in parts:
        if not np.all(np.isfinite(arr)):
            raise EvaluationError("non-finite reduced Hamiltonian partial")
    return parts


def eliminate_controls_reduced(
    problem: ReducedProblem, z, p_z, mu, u_guess, config: PmpSolverConfig = PmpSolverConfig()
) -> np.ndarray:
    """Newton solve of dh/du = 0 from ``u_guess`` (reduced optimal feedback)."""
    u, _, _, _ = _newton_eliminate(problem, z, p_z, mu, u_guess, config)
    return u


def _newton_eliminate(problem, z, p_z, mu, u_guess, config):
    """Returns (u*, iterations, residual, partials-at-u*)."""
    u = np.atleast_1d(np.asarray(u_guess, dtype=float)).copy()
    for iteration in range(config.newton_max_iter + 1):
        parts = reduced_partials(problem, z, p_z, mu, u, fd_step=config.fd_step)
        if problem.control_dim == 0:
            return u, 0, 0.0, parts
        residual = float(np.max(np.abs(parts.dh_du)))
        if residual <= config.newton_tol:
            return u, iteration, residual, parts
        if iteration == config.newton_max_iter:
            raise ConvergenceError(
                f"reduced control elimination exhausted {config.newton_max_iter} iterations",
                residual=residual,
            )
        w = parts.d2h_du2
        if float(np.linalg.svd(w, compute_uv=False)[-1]) <= config.regularity_rank_tol:
            raise RegularityError("reduced control Hessian is singular")
        u = u - np.linalg.solve(w, parts.dh_du)
    raise ConvergenceError("unreachable", residual=float("nan"))  # pragma: no cover


class ReducedRhs(NamedTuple):
    z_dot: np.ndarray
    pz_dot: np.ndarray
    mu_dot: np.ndarray
    xi: np.ndarray


def _rhs_from_parts(
    problem: ReducedProblem, state: ReducedState, parts: ReducedPartials, config: PmpSolverConfig
) -> ReducedRhs:
    z_dot = parts.dh_dpz
    xi = parts.dh_dmu
    pz_dot = -parts.dh_dz
    if problem.curvature is not None and problem.base_dim:
        basis = np.eye(problem.base_dim)
        coupling = np.array(
            [float(problem.curvature(state.z, state.mu, z_dot, e)) for e in basis]
        )
        pz_dot = pz_dot - coupling
    mu_dot = config.coadjoint_sign * coadjoint(problem.algebra, xi, state.mu).coeffs
    return ReducedRhs(z_dot=z_dot, pz_dot=pz_dot, mu_dot=mu_dot, xi=xi)


def reduced_pmp_rhs(
    problem: ReducedProblem, state: ReducedState, config: PmpSolverConfig = PmpSolverConfig()
) -> ReducedRhs:
    """The reduced equations of motion at a state whose control is already eliminated.

    Covariant derivatives are returned as coordinate derivatives in the
    trivialization the problem data is expressed in.  With a zero-dimensional
    base this degenerates to the Lie-Poisson system mu_dot = sign * ad*_xi(mu).
    """
    state.conform(problem)
    parts = reduced_partials(problem, state.z, state.p_z, state.mu, state.u, fd_step=config.fd_step)
    return _rhs_from_parts(problem, state, parts, config)


def integrate_reduced(
    problem: ReducedProblem,
    state0: ReducedState,
    duration: float,
    config: PmpSolverConfig = PmpSolverConfig(),
) -> Trajectory:
    """RK4 on (z, p_z, mu) with per-stage control elimination.

    Channels: "h" (reduced Hamiltonian) plus every registered Casimir.
    Columns: z1.., pz1.., mu1.., u1.. .
    """
    state0.conform(problem)
    s, d, r = problem.base_dim, problem.algebra.dim, problem.control_dim
    times = time_grid(duration, config.rk_step)

    def split(y):
        return y[:s], y[s : 2 * s], y[2 * s :]

    def rhs(y, u_warm):
        z, p_z, mu = split(y)
        u_star, _, _, parts = _newton_eliminate(problem, z, p_z, mu, u_warm, config)
        out = _rhs_from_parts(problem, ReducedState(z, p_z, mu, u_star), parts, config)
        return np.concatenate([out.z_dot, out.pz_dot, out.mu_dot]), u_star

    rows = []
    hams = []
    casimir_values = {name: [] for name in problem.casimirs}

    def on_node(t, y, u_warm):
        z, p_z, mu = split(y)
        u_star, _, _, _ = _newton_eliminate(problem, z, p_z, mu, u_warm, config)
        rows.append(np.concatenate([z, p_z, mu, u_star]))
        hams.append(reduced_hamiltonian(problem, ReducedState(z, p_z, mu, u_star)))
        for name, fun in problem.casimirs.items():
            casimir_values[name].append(float(fun(mu)))
        return u_star

    y0 = np.concatenate([state0.z, state0.p_z, state0.mu])
    _rk4_dae(y0, times, rhs, state0.u, on_node)

    columns = tuple(
        [f"z{i+1}" for i in range(s)]
        + [f"pz{i+1}" for i in range(s)]
        + [f"mu{i+1}" for i in range(d)]
        + [f"u{a+1}" for a in range(r)]
    )
    channels = {"h": np.asarray(hams)}
    for name, values in casimir_values.items():
        channels[name] = np.asarray(values)
    return Trajectory(times=times, columns=columns, states=np.asarray(rows), channels=channels)


def project_full_to_reduced(problem: ControlProblem, point: PontryaginPoint) -> ReducedState:
    """Project a full bundle point to the reduced bundle (state space = group case).

    The coalgebra part is the body momentum: the costate left-translated to
    the identity, computed against the left-invariant frame supplied by the
    symmetry handle.  The base is zero-dimensional in this case.
    """
    point.conform(problem)
    sym = problem.symmetry
    if sym is None or sym.body_frame is None:
        raise ReductionUnsupportedError(
            "projection needs a symmetry handle with a left-invariant body frame "
            "(only the state-space-equals-group case is supported)"
        )
    frame = np.asarray(sym.body_frame(point.x), dtype=float)
    if frame.shape != (problem.n, sym.algebra.dim):
        raise DimensionMismatchError(f"body frame has shape {frame.shape}")
    mu = frame.T @ point.p
    return ReducedState(z=np.zeros(0), p_z=np.zeros(0), mu=mu, u=point.u)


def membership_check_reduced(
    alg: LieAlgebraSpec, mu, mu_dot, xi, dh_dmu, tol: float = 1e-6
) -> bool:
    """Whether ((xi, mu_dot), (0, dh_dmu)) lies in the reduced Dirac fiber at mu."""
    fiber = dirac.reduced_dirac_fiber(alg, mu)
    velocity = np.concatenate([np.asarray(xi, dtype=float), np.asarray(mu_dot, dtype=float)])
    covector = np.concatenate([np.zeros(alg.dim), np.asarray(dh_dmu, dtype=float)])
    return dirac.contains(fiber, velocity, covector, tol)


def reduced_dirac_residuals(
    problem: ReducedProblem, trajectory: Trajectory, config: PmpSolverConfig = PmpSolverConfig()
) -> np.ndarray:
    """Per-row normalized membership residual against the reduced Dirac fiber.

    Only the zero-dimensional-base (pure Lie-Poisson) case carries the fiber
    structure; the velocity is the reduced right-hand side at the stored row.
    """
    if problem.base_dim != 0:
        raise ReductionUnsupportedError("reduced Dirac fibers are defined for a zero-dimensional base")
    mu_rows = trajectory.block("mu")
    u_rows = trajectory.block("u")
    if mu_rows.shape[1] != problem.algebra.dim or u_rows.shape[1] != problem.control_dim:
        raise TrajectoryFormatError("trajectory does not carry (mu, u) blocks of the problem's shape")
    residuals = np.empty(len(trajectory))
    empty = np.zeros(0)
    for k in range(len(trajectory)):
        state = ReducedState(empty, empty, mu_rows[k], u_rows[k])
        parts = reduced_partials(problem, state.z, state.p_z, state.mu, state.u, fd_step=config.fd_step)
        out = _rhs_from_parts(problem, state, parts, config)
        fiber = dirac.reduced_dirac_fiber(problem.algebra, mu_rows[k])
        velocity = np.concatenate([out.xi, out.mu_dot])
        covector = np.concatenate([np.zeros(problem.algebra.dim), parts.dh_dmu])
        residuals[k] = dirac.membership_residual(fiber, velocity, covector)
    return residuals
