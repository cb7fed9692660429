"""Semi-implicit time integration of the curve's governing equation.

Each step assembles the system at the current state (one-step lag of the
nominally implicit operator), forms

    A0 = 4 M + 2 dt D + 4 dt^2 K
    A1 = 4 dt^2 f + 8 M p_curr - (3 M - 2 dt D) p_prev - cross

with ``cross`` the integral of mu J^T c(p_prev) du, reduces both through the
constraint map, and solves with conjugate gradients.  The cross term is how
the J^T dJ/dt velocity coupling enters the discrete update, so no separate
cross-velocity matrix is needed inside the loop.

With every weight an active coordinate, uniformly scaling all weights leaves
the curve invariant, so the reduced operator is only positive semidefinite
along that direction; the right-hand side is consistent with it and CG
converges on the complement.  Direct factorizations would reject the system.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .banded import BandedSymmetric
from .errors import (
    ConfigError,
    NotPositiveDefiniteError,
    SolverDivergenceError,
)
from .geometry import GeneralizedState


@dataclass(frozen=True)
class SolverConfig:
    """Conjugate-gradient stopping rule.

    ``max_iter`` of None means 10x the system dimension, decided at solve
    time.
    """

    tol: float = 1e-10
    max_iter: Optional[int] = None

    def __post_init__(self):
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    iterations: int
    residual: float  # true relative residual ||Ax - b|| / ||b||


def _as_matvec(operator):
    if isinstance(operator, BandedSymmetric):
        return operator.matvec
    if callable(operator) and not isinstance(operator, np.ndarray):
        return operator
    dense = np.asarray(operator, dtype=float)
    return lambda x: dense @ x


def solve_cg(operator, b, config=SolverConfig()):
    """Conjugate gradients for a symmetric positive (semi)definite operator.

    The reported residual is recomputed from the returned iterate, not the
    recursive one, so callers can verify it independently.  Raises
    NotPositiveDefiniteError when a search direction has nonpositive
    curvature and SolverDivergenceError when the iteration cap is reached.
    """
    apply_a = _as_matvec(operator)
    b = np.asarray(b, dtype=float)
    n = b.size
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0:
        return CGResult(x=np.zeros(n), iterations=0, residual=0.0)
    max_iter = config.max_iter if config.max_iter is not None else 10 * n

    x = np.zeros(n)
    r = b.copy()
    d = r.copy()
    rr = float(r @ r)
    iterations = 0
    while iterations < max_iter:
        if np.sqrt(rr) <= config.tol * norm_b:
            true_r = b - apply_a(x)
            true_norm = float(np.linalg.norm(true_r))
            if true_norm <= config.tol * norm_b:
                return CGResult(x=x, iterations=iterations, residual=true_norm / norm_b)
            # recursive residual drifted; restart from the true one
            r = true_r
            d = r.copy()
            rr = float(r @ r)
        ad = apply_a(d)
        dad = float(d @ ad)
        if dad <= 0.0:
            raise NotPositiveDefiniteError(
                f"nonpositive curvature d^T A d = {dad:.3e} at iteration {iterations}"
            )
        alpha = rr / dad
        x = x + alpha * d
        r = r - alpha * ad
        rr_next = float(r @ r)
        d = r + (rr_next / rr) * d
        rr = rr_next
        iterations += 1
    residual = float(np.linalg.norm(b - apply_a(x))) / norm_b
    if residual <= config.tol:
        return CGResult(x=x, iterations=iterations, residual=residual)
    raise SolverDivergenceError(
        f"CG did not reach tol={config.tol} in {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=residual,
        iterations=iterations,
    )


FREE = "free"
RESET_TO_INITIAL = "reset_to_initial"
PINNED = "pinned"


@dataclass(frozen=True)
class WeightPolicy:
    """Per-step treatment of the weight coordinates.

    ``free`` leaves solved weights alone; ``reset_to_initial`` snaps them
    back to the stored reference after every step; ``pinned`` expects the
    weight coordinates to be removed by constraints and touches nothing.
    """

    kind: str
    reference: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in (FREE, RESET_TO_INITIAL, PINNED):
            raise ConfigError(f"unknown weight policy {self.kind!r}")
        if self.kind == RESET_TO_INITIAL:
            if self.reference is None:
                raise ConfigError("reset_to_initial needs reference weights")
            ref = np.array(self.reference, dtype=float)
            ref.setflags(write=False)
            object.__setattr__(self, "reference", ref)

    @classmethod
    def free(cls):
        return cls(kind=FREE)

    @classmethod
    def reset_to(cls, weights):
        return cls(kind=RESET_TO_INITIAL, reference=weights)

    @classmethod
    def pinned(cls):
        return cls(kind=PINNED)


def apply_weight_policy(state, policy):
    """Apply the weight policy to a freshly solved state."""
    if policy.kind == RESET_TO_INITIAL:
        return state.with_weights(policy.reference)
    return state


@dataclass(frozen=True)
class SimState:
    """Two consecutive coordinate vectors driving the three-level scheme."""

    p_curr: np.ndarray
    p_prev: np.ndarray
    t: float
    step: int
    dt: float


def initialize(state0, v0, dt):
    """Seed the scheme with p(0) and the backward-extrapolated previous state.

    p_prev = p(0) - dt * v0, so a zero initial velocity duplicates p(0).
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    p0 = state0.p
    v0 = np.zeros_like(p0) if v0 is None else np.asarray(v0, dtype=float)
    if v0.shape != p0.shape:
        raise ValueError(f"v0 must have shape {p0.shape}, got {v0.shape}")
    return SimState(p_curr=p0, p_prev=p0 - dt * v0, t=0.0, step=0, dt=dt)


@dataclass(frozen=True)
class StepDiagnostics:
    cg_iterations: int
    cg_residual: float


class DynamicsEngine:
    """Bundles the assembly context, constraints, solver, and policy."""

    def __init__(self, context, reduction, solver, weight_policy, force_field=None):
        self.context = context
        self.reduction = reduction
        self.solver = solver
        self.weight_policy = weight_policy
        self.force_field = force_field

    def step(self, sim):
        ctx = self.context
        state = GeneralizedState.from_p(sim.p_curr)
        state_prev = GeneralizedState.from_p(sim.p_prev)
        tables = ctx.tables(state)
        mass, damping, stiffness = ctx.gram_matrices(state, tables)
        dt = sim.dt

        a0 = mass.scaled(4.0)
        a0.axpy(2.0 * dt, damping)
        a0.axpy(4.0 * dt * dt, stiffness)

        force = (
            ctx.force_vector(state, self.force_field, tables)
            if self.force_field is not None
            else np.zeros(ctx.num_dofs)
        )
        cross = ctx.cross_vector(state, state_prev, tables)
        a1 = (
            4.0 * dt * dt * force
            + 8.0 * mass.matvec(sim.p_curr)
            - 3.0 * mass.matvec(sim.p_prev)
            + 2.0 * dt * damping.matvec(sim.p_prev)
            - cross
        )

        if self.reduction.reduced_dim == 0:
            p_new = self.reduction.reconstruct(np.zeros(0))
            diag = StepDiagnostics(cg_iterations=0, cg_residual=0.0)
        else:
            reduced_op, rhs = self.reduction.reduce_operator(a0, a1)
            result = solve_cg(reduced_op, rhs, self.solver)
            p_new = self.reduction.reconstruct(result.x)
            diag = StepDiagnostics(
                cg_iterations=result.iterations, cg_residual=result.residual
            )

        # the policy runs on the raw solved vector: a reset may repair weights
        # that transiently violate the positivity bound, and validation
        # happens only afterwards (via the GeneralizedState constructor)
        if self.weight_policy.kind == RESET_TO_INITIAL:
            blocks = p_new.reshape(-1, 4)
            blocks[:, 3] = self.weight_policy.reference
            p_new = blocks.ravel()
        new_state = GeneralizedState.from_p(p_new)
        advanced = SimState(
            p_curr=new_state.p,
            p_prev=sim.p_curr,
            t=sim.t + dt,
            step=sim.step + 1,
            dt=dt,
        )
        return advanced, diag


def step(sim, context, reduction, solver, weight_policy, force_field=None):
    """Advance one time step; see DynamicsEngine.step."""
    engine = DynamicsEngine(context, reduction, solver, weight_policy, force_field)
    return engine.step(sim)
