"""Maximum-principle solver on the state-costate-control bundle.

The first-order conditions form a DAE: Hamilton equations in (x, p) coupled
with the stationarity constraint dH/du = 0.  For regular problems (invertible
control Hessian W) the constraint defines the optimal feedback u*(x, p) via
the implicit function theorem, so the DAE is index-reduced by a Newton solve
for u at every Runge-Kutta stage.  Newton restarts from the previous stage's
control, which keeps iteration counts at 1-2; the root returned is the one
reached from the caller's initial guess (no global root search, so a branch
can never be switched silently - failure to converge raises instead).
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from typing import Callable, Dict, Tuple

import numpy as np

from . import dirac
from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    PontrylieError,
    RegularityError,
    TrajectoryFormatError,
)
from .lie import CoalgebraElement
from .ocp import ControlProblem, PontryaginPoint, hamiltonian_partials, pontryagin_hamiltonian


@dataclass(frozen=True)
class PmpSolverConfig:
    """Numerical knobs for the feedback solver and integrators.

    ``coadjoint_sign`` selects the sign of the coalgebra evolution in the
    reduction module: +1.0 gives mu_dot = +ad*_xi(mu) (the convention paired
    with this package's ad* definition, see ``lie``); -1.0 flips it for users
    working with the opposite ad* convention.
    """

    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    rk_step: float = 1e-3
    fd_step: float = 1e-6
    regularity_rank_tol: float = 1e-9
    coadjoint_sign: float = 1.0

    def __post_init__(self):
        if min(self.newton_tol, self.rk_step, self.fd_step, self.regularity_rank_tol) <= 0:
            raise DimensionMismatchError("all solver tolerances and steps must be positive")
        if self.newton_max_iter < 1:
            raise DimensionMismatchError("newton_max_iter must be at least 1")
        if self.coadjoint_sign not in (1.0, -1.0):
            raise DimensionMismatchError("coadjoint_sign must be +1.0 or -1.0")


_STATE_COLUMN_RE = re.compile(r"^(x|p|u|z|pz|mu)\d+$")


@dataclass(frozen=True)
class Trajectory:
    """A time-stamped sequence of flat state rows plus named scalar channels.

    ``columns`` names the state entries (e.g. x1..xn, p1..pn, u1..ur, or the
    reduced z/pz/mu/u blocks); channels hold per-time diagnostics such as the
    Hamiltonian.  Serializes to CSV (columns: t, states in declaration order,
    channels alphabetically) and JSON.
    """

    times: np.ndarray
    columns: Tuple[str, ...]
    states: np.ndarray
    channels: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times, dtype=float))
        s = np.atleast_2d(np.asarray(self.states, dtype=float))
        if t.ndim != 1 or s.shape[0] != t.shape[0]:
            raise TrajectoryFormatError(f"times {t.shape} and states {s.shape} are inconsistent")
        if s.shape[1] != len(self.columns):
            raise TrajectoryFormatError(
                f"{len(self.columns)} column names for state width {s.shape[1]}"
            )
        if t.shape[0] > 1 and np.min(np.diff(t)) <= 0:
            raise TrajectoryFormatError("times must be strictly increasing")
        ch = {k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in self.channels.items()}
        for k, v in ch.items():
            if v.shape != t.shape:
                raise TrajectoryFormatError(f"channel '{k}' has length {v.shape[0]}, expected {t.shape[0]}")
            if k in self.columns:
                raise TrajectoryFormatError(f"channel '{k}' collides with a state column")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "channels", ch)

    def __len__(self) -> int:
        return self.times.shape[0]

    def block(self, prefix: str) -> np.ndarray:
        """State columns named '<prefix>1', '<prefix>2', ... in index order."""
        pattern = re.compile(rf"^{re.escape(prefix)}(\d+)$")
        found = sorted(
            ((int(m.group(1)), i) for i, c in enumerate(self.columns) if (m := pattern.match(c))),
        )
        if not found:
            return np.zeros((len(self), 0))
        return self.states[:, [i for _, i in found]]

    def channel(self, name: str) -> np.ndarray:
        if name not in self.channels:
            raise TrajectoryFormatError(f"trajectory has no channel '{name}'")
        return self.channels[name]

    def to_csv(self, path) -> None:
        names = list(self.columns) + sorted(self.channels)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + names)
            chans = [self.channels[k] for k in sorted(self.channels)]
            for i in range(len(self)):
                row = [self.times[i], *self.states[i], *(c[i] for c in chans)]
                writer.writerow([f"{v:.17g}" for v in row])

    def to_json(self, path) -> None:
        payload = {
            "times": self.times.tolist(),
            "columns": list(self.columns),
            "states": self.states.tolist(),
            "channels": {k: v.tolist() for k, v in self.channels.items()},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @staticmethod
    def from_json(path) -> "Trajectory":
        try:
            with open(path) as fh:
                payload = json.load(fh)
            return Trajectory(
                times=np.asarray(payload["times"], dtype=float),
                columns=tuple(payload["columns"]),
                states=np.asarray(payload["states"], dtype=float),
                channels={k: np.asarray(v, dtype=float) for k, v in payload["channels"].items()},
            )
        except (KeyError, ValueError, json.JSONDecodeError) as exc:
            raise TrajectoryFormatError(f"malformed trajectory JSON {path}: {exc}") from exc

    @staticmethod
    def from_csv(path) -> "Trajectory":
        """Read a trajectory CSV; columns matching the state-name pattern
        (x/p/u/z/pz/mu + index) are states, the rest are channels."""
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                rows = [[float(v) for v in row] for row in reader if row]
        except (OSError, ValueError, StopIteration) as exc:
            raise TrajectoryFormatError(f"malformed trajectory CSV {path}: {exc}") from exc
        if not header or header[0] != "t" or not rows:
            raise TrajectoryFormatError(f"malformed trajectory CSV {path}: missing 't' column or data")
        data = np.asarray(rows, dtype=float)
        if data.shape[1] != len(header):
            raise TrajectoryFormatError(f"malformed trajectory CSV {path}: ragged rows")
        state_idx = [i for i, c in enumerate(header[1:], start=1) if _STATE_COLUMN_RE.match(c)]
        chan_idx = [i for i in range(1, len(header)) if i not in state_idx]
        return Trajectory(
            times=data[:, 0],
            columns=tuple(header[i] for i in state_idx),
            states=data[:, state_idx] if state_idx else np.zeros((data.shape[0], 0)),
            channels={header[i]: data[:, i] for i in chan_idx},
        )


def consistency_residual(problem: ControlProblem, point: PontryaginPoint, fd_step: float = 1e-6) -> np.ndarray:
    """The stationarity residual phi_a = dH/du_a at a bundle point."""
    return hamiltonian_partials(problem, point, fd_step=fd_step).dH_du


def regularity_check(problem: ControlProblem, point: PontryaginPoint, config: PmpSolverConfig) -> bool:
    """True iff the control Hessian W has smallest singular value above the rank tolerance.

    Problems without controls are vacuously regular.
    """
    if problem.r == 0:
        return True
    w = hamiltonian_partials(problem, point, fd_step=config.fd_step).d2H_du2
    return float(np.linalg.svd(w, compute_uv=False)[-1]) > config.regularity_rank_tol


def _newton_feedback(
    problem: ControlProblem,
    x: np.ndarray,
    p: np.ndarray,
    u_guess: np.ndarray,
    config: PmpSolverConfig,
):
    """Newton solve of dH/du = 0 from u_guess.

    Returns (u*, iterations, residual, partials-at-u*); callers reuse the
    partials so each RK stage evaluates them exactly once.
    """
    u = np.atleast_1d(np.asarray(u_guess, dtype=float)).copy()
    for iteration in range(config.newton_max_iter + 1):
        parts = hamiltonian_partials(problem, PontryaginPoint(x, p, u), fd_step=config.fd_step)
        if problem.r == 0:
            return u, 0, 0.0, parts
        residual = float(np.max(np.abs(parts.dH_du)))
        if residual <= config.newton_tol:
            return u, iteration, residual, parts
        if iteration == config.newton_max_iter:
            raise ConvergenceError(
                f"feedback Newton exhausted {config.newton_max_iter} iterations", residual=residual
            )
        w = parts.d2H_du2
        if float(np.linalg.svd(w, compute_uv=False)[-1]) <= config.regularity_rank_tol:
            raise RegularityError("control Hessian is singular along the Newton iteration")
        u = u - np.linalg.solve(w, parts.dH_du)
    raise ConvergenceError("unreachable", residual=float("nan"))  # pragma: no cover


def optimal_feedback(
    problem: ControlProblem,
    x,
    p,
    u_guess,
    config: PmpSolverConfig = PmpSolverConfig(),
) -> np.ndarray:
    """The control solving dH/du = 0, tracked by Newton from ``u_guess``."""
    u, _, _, _ = _newton_feedback(
        problem, np.asarray(x, dtype=float), np.asarray(p, dtype=float), u_guess, config
    )
    return u


def momentum_map(problem: ControlProblem, x, p) -> CoalgebraElement:
    """Momentum map components J_i = <p, (e_i)_P(x)> of the declared symmetry."""
    sym = problem.symmetry
    if sym is None:
        raise PontrylieError("problem declares no symmetry")
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    basis = np.eye(sym.algebra.dim)
    return CoalgebraElement(
        np.array([float(p @ np.asarray(sym.infinitesimal_action(e, x), dtype=float)) for e in basis])
    )


def time_grid(duration: float, step: float) -> np.ndarray:
    """Uniform grid 0, h, 2h, ..., closed with a partial final step when needed."""
    if duration < 0 or step <= 0:
        raise DimensionMismatchError(f"inconsistent duration {duration} / step {step}")
    if duration == 0:
        return np.zeros(1)
    n = int(np.floor(duration / step + 1e-9))
    ts = step * np.arange(n + 1)
    if duration - ts[-1] > max(1e-12, 1e-9 * duration):
        ts = np.append(ts, duration)
    else:
        ts[-1] = duration
    return ts


def _rk4_dae(
    y0: np.ndarray,
    times: np.ndarray,
    rhs: Callable,
    u0: np.ndarray,
    on_node: Callable,
) -> None:
    """Fixed-step RK4 with a control re-solved (warm started) at every stage.

    ``rhs(y, u_warm) -> (ydot, u_star)``; ``on_node(t, y, u_warm)`` is called
    at every grid node and must return the control to warm start from next.
    """
    def node(t, y, u):
        try:
            return on_node(t, y, u)
        except (ConvergenceError, RegularityError) as exc:
            raise type(exc)(f"{exc} (at t={t:.6g})") from exc

    y = y0.copy()
    u_warm = node(times[0], y, u0)
    for k in range(len(times) - 1):
        t, h = times[k], times[k + 1] - times[k]
        try:
            k1, u1 = rhs(y, u_warm)
            k2, u2 = rhs(y + 0.5 * h * k1, u1)
            k3, u3 = rhs(y + 0.5 * h * k2, u2)
            k4, u4 = rhs(y + h * k3, u3)
        except (ConvergenceError, RegularityError) as exc:
            raise type(exc)(f"{exc} (while stepping from t={t:.6g})") from exc
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u_warm = node(times[k + 1], y, u4)


def integrate_pmp(
    problem: ControlProblem,
    x0,
    p0,
    duration: float,
    config: PmpSolverConfig = PmpSolverConfig(),
    u_guess=None,
) -> Trajectory:
    """Integrate the Hamilton equations with per-stage control elimination.

    Classical RK4 on the 2n-dimensional (x, p) system; at every stage the
    control is re-solved by Newton, warm started from the previous stage.
    The trajectory records columns x1..xn, p1..pn, u1..ur, the Hamiltonian
    channel "H", and momentum-map channels "J1".."Jd" when the problem
    declares a symmetry.
    """
    n, r = problem.n, problem.r
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    if x0.shape != (n,) or p0.shape != (n,):
        raise DimensionMismatchError(f"x0/p0 shapes {x0.shape}/{p0.shape} do not match n={n}")
    u_start = np.zeros(r) if u_guess is None else np.atleast_1d(np.asarray(u_guess, dtype=float))
    if u_start.shape != (r,):
        raise DimensionMismatchError(f"u_guess shape {u_start.shape} does not match r={r}")
    times = time_grid(duration, config.rk_step)

    def rhs(y, u_warm):
        x, p = y[:n], y[n:]
        u_star, _, _, parts = _newton_feedback(problem, x, p, u_warm, config)
        return np.concatenate([parts.dH_dp, -parts.dH_dx]), u_star

    rows = []
    hams = []
    momenta = [] if problem.symmetry is not None else None

    def on_node(t, y, u_warm):
        x, p = y[:n], y[n:]
        u_star, _, _, _ = _newton_feedback(problem, x, p, u_warm, config)
        rows.append(np.concatenate([x, p, u_star]))
        hams.append(pontryagin_hamiltonian(problem, PontryaginPoint(x, p, u_star)))
        if momenta is not None:
            momenta.append(momentum_map(problem, x, p).coeffs)
        return u_star

    _rk4_dae(np.concatenate([x0, p0]), times, rhs, u_start, on_node)

    columns = tuple(
        [f"x{i+1}" for i in range(n)] + [f"p{i+1}" for i in range(n)] + [f"u{a+1}" for a in range(r)]
    )
    channels = {"H": np.asarray(hams)}
    if momenta is not None:
        jm = np.asarray(momenta)
        for i in range(jm.shape[1]):
            channels[f"J{i+1}"] = jm[:, i]
    return Trajectory(times=times, columns=columns, states=np.asarray(rows), channels=channels)


def lagrange_pontryagin_action(problem: ControlProblem, trajectory: Trajectory) -> float:
    """The functional  integral of [ L(x, u) + <p, x_dot - f(x, u)> ]  along a stored curve.

    x_dot is taken as the second-order finite-difference derivative of the
    stored samples (so the pairing term genuinely measures how far the curve
    is from solving the control equation), and the integral is a composite
    trapezoid rule.
    """
    if len(trajectory) < 2:
        raise TrajectoryFormatError("action needs at least two samples")
    x = trajectory.block("x")
    p = trajectory.block("p")
    u = trajectory.block("u")
    if x.shape[1] != problem.n or p.shape[1] != problem.n or u.shape[1] != problem.r:
        raise TrajectoryFormatError("trajectory does not carry (x, p, u) blocks of the problem's shape")
    xdot = np.gradient(x, trajectory.times, axis=0, edge_order=2)
    integrand = np.empty(len(trajectory))
    for k in range(len(trajectory)):
        f = np.asarray(problem.dynamics(x[k], u[k]), dtype=float)
        integrand[k] = float(problem.lagrangian(x[k], u[k])) + float(p[k] @ (xdot[k] - f))
    return float(np.trapezoid(integrand, trajectory.times))


def dirac_membership_residuals(
    problem: ControlProblem, trajectory: Trajectory, config: PmpSolverConfig = PmpSolverConfig()
) -> np.ndarray:
    """Per-row normalized residual of ((x_dot, p_dot, 0), dH) against the presymplectic Dirac fiber.

    The velocity is the DAE right-hand side evaluated at the stored point, so
    for trajectories produced by ``integrate_pmp`` the residual is bounded by
    the feedback Newton tolerance; the test exercises the whole chain from
    Hamiltonian partials through the fiber's subspace geometry.
    """
    n, r = problem.n, problem.r
    fiber = dirac.graph_of_two_form(dirac.pontryagin_two_form(n, r))
    x = trajectory.block("x")
    p = trajectory.block("p")
    u = trajectory.block("u")
    if x.shape[1] != n or p.shape[1] != n or u.shape[1] != r:
        raise TrajectoryFormatError("trajectory does not carry (x, p, u) blocks of the problem's shape")
    residuals = np.empty(len(trajectory))
    for k in range(len(trajectory)):
        parts = hamiltonian_partials(problem, PontryaginPoint(x[k], p[k], u[k]), fd_step=config.fd_step)
        velocity = np.concatenate([parts.dH_dp, -parts.dH_dx, np.zeros(r)])
        covector = np.concatenate([parts.dH_dx, parts.dH_dp, parts.dH_du])
        residuals[k] = dirac.membership_residual(fiber, velocity, covector)
    return residuals
