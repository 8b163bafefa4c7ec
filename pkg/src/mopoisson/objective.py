"""Bicriterial pointwise-tracking objective, adjoints, and gradients.

Both criteria penalize squared mismatches of the discrete state at finitely
many interior observation points plus a quadratic control cost.  Gradients
are returned as the exact Riesz representers in the piecewise-constant
control space: per triangle, element means of the adjoint states plus the
control-cost term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .control import BoxBounds, PwcControl, l2_norm, pi0_project
from .fem import P1Function, StiffnessSystem, assemble_load_pwc, assemble_point_load, evaluate, solve_spd

__all__ = [
    "ProblemData",
    "ObjectivePair",
    "StateAdjointBundle",
    "solve_state",
    "solve_adjoints",
    "eval_objectives",
    "objective_values",
    "grad_wsm",
    "grad_rpm",
    "wsm_value",
    "rpm_value",
]


@dataclass
class ProblemData:
    """Observation points, desired values, weights, and box bounds.

    ``obs1``/``obs2`` are (n_k, 2) arrays of strictly interior points with
    desired values ``y1``/``y2``; ``lambda1``/``lambda2`` are the positive
    control-cost weights of the two criteria.
    """

    obs1: np.ndarray
    y1: np.ndarray
    obs2: np.ndarray
    y2: np.ndarray
    lambda1: float
    lambda2: float
    bounds: BoxBounds

    def __post_init__(self):
        self.obs1 = np.atleast_2d(np.asarray(self.obs1, dtype=np.float64))
        self.obs2 = np.atleast_2d(np.asarray(self.obs2, dtype=np.float64))
        self.y1 = np.atleast_1d(np.asarray(self.y1, dtype=np.float64))
        self.y2 = np.atleast_1d(np.asarray(self.y2, dtype=np.float64))
        for k, (obs, des) in enumerate([(self.obs1, self.y1), (self.obs2, self.y2)], start=1):
            if obs.shape[0] == 0:
                raise ValueError(f"observation set {k} is empty")
            if obs.shape != (des.shape[0], 2):
                raise ValueError(f"observation set {k} and desired values do not match")
            if not np.all((obs > 0.0) & (obs < 1.0)):
                raise ValueError(f"observation set {k} must lie strictly inside the domain")
        self.lambda1 = float(self.lambda1)
        self.lambda2 = float(self.lambda2)
        if self.lambda1 <= 0.0 or self.lambda2 <= 0.0:
            raise ValueError("regularization weights must be positive")


@dataclass(frozen=True)
class ObjectivePair:
    """Value pair (j1, j2) of the two criteria; both are nonnegative."""

    j1: float
    j2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.j1, self.j2])


@dataclass
class StateAdjointBundle:
    """State, both adjoints, and the pointwise residuals that load them."""

    state: P1Function
    adjoint1: P1Function
    adjoint2: P1Function
    residuals1: np.ndarray
    residuals2: np.ndarray


def solve_state(
    problem: ProblemData, system: StiffnessSystem, u: PwcControl, tol: float = 1e-12
) -> P1Function:
    """Discrete control-to-state map: Poisson solve with source ``u``."""
    return solve_spd(system, assemble_load_pwc(system.mesh, u), tol=tol)


def _point_residuals(state: P1Function, obs: np.ndarray, desired: np.ndarray) -> np.ndarray:
    return np.array([evaluate(state, p) for p in obs]) - desired


def solve_adjoints(
    problem: ProblemData, system: StiffnessSystem, state: P1Function, tol: float = 1e-12
) -> StateAdjointBundle:
    """Solve both adjoint systems, loaded by the observation residuals.

    The residuals ``state(x_k^i) - y_k^i`` are cached in the returned
    bundle so objective values and gradients reuse this one state.
    """
    if state.mesh.level != system.mesh.level:
        raise ValueError("state lives on a different mesh than the system")
    r1 = _point_residuals(state, problem.obs1, problem.y1)
    r2 = _point_residuals(state, problem.obs2, problem.y2)
    p1 = solve_spd(system, assemble_point_load(system.mesh, problem.obs1, r1), tol=tol)
    p2 = solve_spd(system, assemble_point_load(system.mesh, problem.obs2, r2), tol=tol)
    return StateAdjointBundle(state=state, adjoint1=p1, adjoint2=p2, residuals1=r1, residuals2=r2)


def eval_objectives(problem: ProblemData, u: PwcControl, state: P1Function) -> ObjectivePair:
    """Objective pair for a control and its matching state.

    The caller is responsible for ``state`` solving the state equation at
    ``u``; no re-solve happens here, keeping solve counts auditable.
    """
    r1 = _point_residuals(state, problem.obs1, problem.y1)
    r2 = _point_residuals(state, problem.obs2, problem.y2)
    return _objectives_from_residuals(problem, u, r1, r2)


def _objectives_from_residuals(
    problem: ProblemData, u: PwcControl, r1: np.ndarray, r2: np.ndarray
) -> ObjectivePair:
    un2 = l2_norm(u) ** 2
    return ObjectivePair(
        j1=0.5 * float(r1 @ r1) + 0.5 * problem.lambda1 * un2,
        j2=0.5 * float(r2 @ r2) + 0.5 * problem.lambda2 * un2,
    )


def objective_values(
    problem: ProblemData, system: StiffnessSystem, u: PwcControl, tol: float = 1e-12
) -> ObjectivePair:
    """Convenience wrapper that solves the state and then evaluates."""
    return eval_objectives(problem, u, solve_state(problem, system, u, tol=tol))


def _check_weights(alpha) -> tuple[float, float]:
    a1, a2 = float(alpha[0]), float(alpha[1])
    if a1 <= 0.0 or a2 <= 0.0:
        raise ValueError("weights must be strictly positive")
    if abs(a1 + a2 - 1.0) > 1e-9:
        raise ValueError("weights must sum to one")
    return a1, a2


def grad_wsm(
    problem: ProblemData, bundle: StateAdjointBundle, u: PwcControl, alpha
) -> PwcControl:
    """Control-space gradient representer of the weighted-sum objective.

    Per triangle: ``sum_k alpha_k (mean_T(p_k) + lambda_k u_T)``, the unique
    piecewise-constant function realizing the derivative against
    piecewise-constant variations.
    """
    a1, a2 = _check_weights(alpha)
    m1 = pi0_project(bundle.adjoint1).values
    m2 = pi0_project(bundle.adjoint2).values
    g = a1 * (m1 + problem.lambda1 * u.values) + a2 * (m2 + problem.lambda2 * u.values)
    return PwcControl(u.mesh, g)


def grad_rpm(
    problem: ProblemData,
    bundle: StateAdjointBundle,
    u: PwcControl,
    zeta,
    j: ObjectivePair,
) -> PwcControl:
    """Gradient representer of the reference-point distance objective.

    Per triangle: ``sum_k (j_k - zeta_k) (mean_T(p_k) + lambda_k u_T)``.
    """
    c1 = j.j1 - float(zeta[0])
    c2 = j.j2 - float(zeta[1])
    m1 = pi0_project(bundle.adjoint1).values
    m2 = pi0_project(bundle.adjoint2).values
    g = c1 * (m1 + problem.lambda1 * u.values) + c2 * (m2 + problem.lambda2 * u.values)
    return PwcControl(u.mesh, g)


def wsm_value(alpha, j: ObjectivePair) -> float:
    return float(alpha[0]) * j.j1 + float(alpha[1]) * j.j2


def rpm_value(zeta, j: ObjectivePair) -> float:
    return 0.5 * ((j.j1 - float(zeta[0])) ** 2 + (j.j2 - float(zeta[1])) ** 2)
