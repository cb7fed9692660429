"""Time-parameterized rational curves over generalized coordinates.

A curve configuration is the concatenated vector of control points and
weights.  The curve map is linear in that vector through its Jacobian: the
point columns carry the rational basis and the weight columns carry the
sensitivity of the curve to each weight.  Evaluators here return the
Jacobian in factored form (rational values plus weight columns) since only
``order`` basis functions are active at any parameter; the dense 3 x 4m
matrix is materialized on demand.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeightsError, DomainError
from .splines import KnotVector, eval_basis_many

#: Weights below this bound are rejected rather than clamped.
WEIGHT_MIN = 1e-6


@dataclass(frozen=True)
class GeneralizedState:
    """Control points and weights of one curve configuration.

    The flat coordinate vector interleaves per control point:
    (x_i, y_i, z_i, w_i) blocks, so point i owns degrees of freedom
    4i..4i+3.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        weights = np.array(self.weights, dtype=float)
        if points.ndim != 2 or points.shape[1] != 3:
            raise ValueError(f"points must have shape (m, 3), got {points.shape}")
        if weights.shape != (points.shape[0],):
            raise ValueError(
                f"weights must have shape ({points.shape[0]},), got {weights.shape}"
            )
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(weights)):
            raise ValueError("points and weights must be finite")
        if np.any(weights < WEIGHT_MIN):
            raise DegenerateWeightsError(
                f"weights must be >= {WEIGHT_MIN}, got min {weights.min()}"
            )
        points.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def num_controls(self):
        return self.points.shape[0]

    @property
    def p(self):
        """Concatenated coordinate vector of length 4m."""
        return np.column_stack([self.points, self.weights]).ravel()

    @property
    def p_b(self):
        """Control point coordinates only, length 3m."""
        return self.points.ravel()

    @property
    def p_w(self):
        """Weights only, length m."""
        return self.weights.copy()

    @classmethod
    def from_p(cls, p):
        """Rebuild a state from a flat 4m coordinate vector."""
        p = np.asarray(p, dtype=float)
        if p.ndim != 1 or p.size % 4 != 0:
            raise ValueError(f"coordinate vector length must be 4m, got {p.size}")
        blocks = p.reshape(-1, 4)
        return cls(points=blocks[:, :3], weights=blocks[:, 3])

    def with_weights(self, weights):
        return GeneralizedState(points=self.points, weights=weights)


@dataclass(frozen=True)
class RationalTables:
    """Pointwise rational basis data at a batch of parameters.

    Shapes: denom*, rational* are (n, j); weight_cols* are (n, j, 3);
    curve* are (n, 3), where j is the number of basis columns supplied
    (all m, or the active window during assembly).
    """

    denom: np.ndarray
    rational: np.ndarray
    rational_d1: np.ndarray
    rational_d2: np.ndarray
    weight_cols: np.ndarray
    weight_cols_d1: np.ndarray
    weight_cols_d2: np.ndarray
    curve: np.ndarray
    curve_d1: np.ndarray
    curve_d2: np.ndarray


def rational_tables(basis, basis_d1, basis_d2, points, weights):
    """Rational basis values, weight columns, and u-derivatives of both.

    ``basis*`` have shape (n, j).  ``points``/``weights`` are either (j, 3)
    and (j,) shared across rows, or (n, j, 3) and (n, j) per-row windows.
    The weight column of basis i is B_i (p_i - c) / denom; its derivatives
    follow from the product and quotient rules.
    """
    w = np.asarray(weights, dtype=float)
    pts = np.asarray(points, dtype=float)
    wb = w * basis
    denom = wb.sum(axis=-1)
    if np.any(denom <= 0):
        raise DegenerateWeightsError("rational denominator is not positive")
    d = denom[:, None]
    d1 = (w * basis_d1).sum(axis=-1)[:, None]
    d2 = (w * basis_d2).sum(axis=-1)[:, None]
    rational = wb / d
    rational_d1 = w * (basis_d1 * d - basis * d1) / d**2
    rational_d2 = w * (
        basis_d2 / d - 2 * basis_d1 * d1 / d**2 + basis * (2 * d1**2 / d**3 - d2 / d**2)
    )
    contract = "nj,jc->nc" if pts.ndim == 2 else "nj,njc->nc"
    curve = np.einsum(contract, rational, pts)
    curve_d1 = np.einsum(contract, rational_d1, pts)
    curve_d2 = np.einsum(contract, rational_d2, pts)
    diff = pts - curve[:, None, :]
    dc = d[..., None]
    d1c = d1[..., None]
    d2c = d2[..., None]
    v = diff / dc
    v_d1 = -curve_d1[:, None, :] / dc - diff * d1c / dc**2
    v_d2 = (
        -curve_d2[:, None, :] / dc
        + 2 * curve_d1[:, None, :] * d1c / dc**2
        - diff * d2c / dc**2
        + 2 * diff * d1c**2 / dc**3
    )
    b = basis[..., None]
    b1 = basis_d1[..., None]
    b2 = basis_d2[..., None]
    return RationalTables(
        denom=denom,
        rational=rational,
        rational_d1=rational_d1,
        rational_d2=rational_d2,
        weight_cols=b * v,
        weight_cols_d1=b1 * v + b * v_d1,
        weight_cols_d2=b2 * v + 2 * b1 * v_d1 + b * v_d2,
        curve=curve,
        curve_d1=curve_d1,
        curve_d2=curve_d2,
    )


def _tables_at(state, kv, u, max_order=2):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = kv.valid_domain
    if np.any(u < lo) or np.any(u > hi):
        bad = u[(u < lo) | (u > hi)][0]
        raise DomainError(f"u={bad} outside valid domain [{lo}, {hi}]")
    basis, b1, b2 = eval_basis_many(kv, u, max_order=max_order)
    return rational_tables(basis, b1, b2, state.points, state.weights)


@dataclass(frozen=True)
class JacobianEval:
    """Curve Jacobian at one parameter, in factored form.

    ``rational`` holds the m rational basis values (the diagonal of each
    point block); ``weight_cols`` holds the m sensitivity vectors of the
    curve with respect to the weights.  For derivative evaluations the same
    container carries the entrywise u-derivatives instead.
    """

    u: float
    rational: np.ndarray
    weight_cols: np.ndarray

    @property
    def num_controls(self):
        return self.rational.size

    def dense(self):
        """Materialize the 3 x 4m matrix with interleaved point/weight columns."""
        m = self.num_controls
        full = np.zeros((3, 4 * m))
        for axis in range(3):
            full[axis, axis::4] = self.rational
        full[:, 3::4] = self.weight_cols.T
        return full

    def matvec(self, p):
        """Apply the Jacobian to a flat 4m coordinate vector."""
        blocks = np.asarray(p, dtype=float).reshape(-1, 4)
        return self.rational @ blocks[:, :3] + self.weight_cols.T @ blocks[:, 3]


def eval_curve(state, kv, u):
    """Evaluate the rational curve at parameter u.

    Returns the 3-vector sum(p_i w_i B_i) / sum(w_j B_j).
    """
    return _tables_at(state, kv, u, max_order=0).curve[0]


def eval_jacobian(state, kv, u):
    """Evaluate the curve Jacobian at parameter u in factored form."""
    t = _tables_at(state, kv, u, max_order=0)
    return JacobianEval(u=float(u), rational=t.rational[0], weight_cols=t.weight_cols[0])


def eval_jacobian_u_derivatives(state, kv, u, order=2):
    """Entrywise u-derivatives of the Jacobian, up to second order.

    Returns a tuple of JacobianEval-shaped containers (J_u,) or (J_u, J_uu)
    whose fields hold derivative entries.  They satisfy d/du c = J_u p.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    t = _tables_at(state, kv, u, max_order=order)
    out = [
        JacobianEval(u=float(u), rational=t.rational_d1[0], weight_cols=t.weight_cols_d1[0])
    ]
    if order == 2:
        out.append(
            JacobianEval(
                u=float(u), rational=t.rational_d2[0], weight_cols=t.weight_cols_d2[0]
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class IdentityReport:
    """Maximum residuals of the Jacobian algebra over the sampled parameters."""

    weight_combination: float  # || sum_i w_i (dc/dw_i) ||
    jacobian_vs_point_block: float  # || J p - B p_b ||
    jacobian_vs_curve: float  # || J p - c(u) ||
    time_derivative: float  # || (dJ/dt) p || via finite differences
    coordinate_derivative: float  # max_i || (dJ/dp_i) p || via finite differences

    @property
    def max_residual(self):
        return max(
            self.weight_combination,
            self.jacobian_vs_point_block,
            self.jacobian_vs_curve,
            self.time_derivative,
            self.coordinate_derivative,
        )


def _dense_jacobians(state, kv, u):
    t = _tables_at(state, kv, u, max_order=0)
    n, m = t.rational.shape
    dense = np.zeros((n, 3, 4 * m))
    for axis in range(3):
        dense[:, axis, axis::4] = t.rational
    dense[:, :, 3::4] = t.weight_cols.transpose(0, 2, 1)
    return dense, t


def verify_jacobian_identities(state, kv, velocity, u_samples=None, fd_step=1e-6):
    """Check the algebraic identities of the Jacobian numerically.

    Verifies, at each sampled parameter: the weighted combination of weight
    columns vanishes; J p reproduces both the point-block product and the
    curve point; the time derivative of J along ``velocity`` annihilates p;
    and each coordinate derivative of J annihilates p.  Derivatives of J are
    taken by central finite differences with step ``fd_step``.

    Returns an IdentityReport of maximum residuals; raises nothing for
    nonzero residuals so callers can apply their own tolerances.
    """
    velocity = np.asarray(velocity, dtype=float)
    p = state.p
    if velocity.shape != p.shape:
        raise ValueError(f"velocity must have shape {p.shape}, got {velocity.shape}")
    if u_samples is None:
        lo, hi = kv.valid_domain
        u_samples = np.linspace(lo, hi, 33)
    u_samples = np.asarray(u_samples, dtype=float)

    dense, t = _dense_jacobians(state, kv, u_samples)
    w_comb = np.einsum("j,njc->nc", state.weights, t.weight_cols)
    jp = np.einsum("nax,x->na", dense, p)
    bpb = np.einsum("nj,jc->nc", t.rational, state.points)

    def dense_at(vec):
        return _dense_jacobians(GeneralizedState.from_p(vec), kv, u_samples)[0]

    h = fd_step
    djdt = (dense_at(p + h * velocity) - dense_at(p - h * velocity)) / (2 * h)
    djdt_p = np.einsum("nax,x->na", djdt, p)

    coord_res = 0.0
    for i in range(p.size):
        e = np.zeros_like(p)
        e[i] = 1.0
        dj = (dense_at(p + h * e) - dense_at(p - h * e)) / (2 * h)
        coord_res = max(coord_res, np.abs(np.einsum("nax,x->na", dj, p)).max())

    return IdentityReport(
        weight_combination=float(np.abs(w_comb).max()),
        jacobian_vs_point_block=float(np.abs(jp - bpb).max()),
        jacobian_vs_curve=float(np.abs(jp - t.curve).max()),
        time_derivative=float(np.abs(djdt_p).max()),
        coordinate_derivative=float(coord_res),
    )
