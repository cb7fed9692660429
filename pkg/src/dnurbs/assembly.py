"""Isogeometric element partition, quadrature, and system-matrix assembly.

The knot vector's nonzero spans are the elements; each element activates
``order`` consecutive control points.  All integrals (mass, damping,
stiffness, force, cross terms) are evaluated per element with a
Gauss-Legendre rule and scattered into banded global operators, so assembly
cost is O(n_e * n_g * k^2) per matrix and the global bandwidth is 4*order-1
in the interleaved (x, y, z, w) coordinate layout.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .banded import BandedGeneral, BandedSymmetric
from .errors import ConfigError, UnsupportedKnotVectorError
from .geometry import rational_tables
from .splines import eval_basis_many


@dataclass(frozen=True)
class GaussLegendreRule:
    """Gauss-Legendre nodes and weights on the reference interval [-1, 1]."""

    n_points: int
    nodes: np.ndarray = field(init=False)
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.n_points < 1:
            raise ConfigError(f"quadrature needs at least 1 point, got {self.n_points}")
        nodes, weights = np.polynomial.legendre.leggauss(self.n_points)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class Element:
    """One nonzero knot span with its active control indices."""

    span: tuple
    controls: np.ndarray


@dataclass(frozen=True)
class ElementPartition:
    elements: tuple

    @property
    def num_elements(self):
        return len(self.elements)

    @property
    def spans(self):
        return [e.span for e in self.elements]


def partition_elements(kv):
    """Split an open knot vector into elements with their active controls.

    Each nonzero span [u_s, u_{s+1}) becomes one element whose active
    controls are the ``order`` consecutive basis indices s-order+1 .. s.
    """
    if not kv.is_open:
        raise UnsupportedKnotVectorError(
            "element partition requires an open knot vector"
        )
    k = kv.order
    elements = []
    for s in kv.nonzero_spans():
        controls = np.arange(s - k + 1, s + 1)
        elements.append(
            Element(
                span=(float(kv.knots[s]), float(kv.knots[s + 1])), controls=controls
            )
        )
    return ElementPartition(elements=tuple(elements))


@dataclass(frozen=True)
class PhysicsParams:
    """Densities and elastic moduli of the curve material.

    mu: linear mass density (kg/m); gamma: damping density (kg/(m s));
    alpha: elasticity (N); beta: rigidity (N m^2); gravity: field strength
    (m/s^2) used by the gravity force helper.
    """

    mu: float = 30.0
    gamma: float = 0.0
    alpha: float = 35.0
    beta: float = 10.0
    gravity: float = 9.8

    def __post_init__(self):
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.gamma < 0 or self.alpha < 0 or self.beta < 0:
            raise ConfigError("gamma, alpha, beta must be nonnegative")


@dataclass(frozen=True)
class SystemMatrices:
    """Banded mass, damping, stiffness, and cross-velocity operators."""

    mass: BandedSymmetric
    damping: BandedSymmetric
    stiffness: BandedSymmetric
    i_mat: Optional[BandedGeneral]
    num_controls: int


def gravity_field(params):
    """Constant downward force density field -mu * g in y."""
    pull = np.array([0.0, -params.mu * params.gravity, 0.0])

    def field_at(positions):
        return np.broadcast_to(pull, positions.shape)

    return field_at


class AssemblyContext:
    """Precomputed quadrature layout for one knot vector and parameter set.

    Basis values at the quadrature points never change during a simulation,
    so they are tabulated once; per-state assembly only recomputes the
    rational tables and the element blocks.
    """

    def __init__(self, kv, params, rule):
        self.kv = kv
        self.params = params
        self.rule = rule
        self.partition = partition_elements(kv)
        k = kv.order
        m = kv.num_basis
        self.num_controls = m
        self.num_dofs = 4 * m
        self.block_size = 4 * k
        self.bandwidth = min(4 * k - 1, self.num_dofs - 1)

        spans = np.array([e.span for e in self.partition.elements])
        mids = spans.mean(axis=1)
        halves = (spans[:, 1] - spans[:, 0]) / 2
        self.n_elements = len(self.partition.elements)
        self.n_gauss = rule.n_points
        # flat quadrature points, element-major
        self.u_quad = (mids[:, None] + halves[:, None] * rule.nodes[None, :]).ravel()
        self.w_quad = (halves[:, None] * rule.weights[None, :]).ravel()
        starts = np.array([e.controls[0] for e in self.partition.elements])
        self.control_window = (
            starts[:, None, None] + np.zeros((1, self.n_gauss, 1), dtype=int)
            + np.arange(k)[None, None, :]
        ).reshape(-1, k)
        self.dof_starts = 4 * starts

        basis, b1, b2 = eval_basis_many(kv, self.u_quad, max_order=2)
        rows = np.arange(self.u_quad.size)[:, None]
        self.basis = basis[rows, self.control_window]
        self.basis_d1 = b1[rows, self.control_window]
        self.basis_d2 = b2[rows, self.control_window]

        # scatter targets: per lower offset d, the global columns of each
        # element block's d-th subdiagonal
        bs = self.block_size
        self._scatter_cols = [
            self.dof_starts[:, None] + np.arange(bs - d)[None, :] for d in range(bs)
        ]
        self._block_diag_idx = [
            (np.arange(d, bs), np.arange(bs - d)) for d in range(bs)
        ]
        self._dof_window = self.dof_starts[:, None] + np.arange(bs)[None, :]

    def tables(self, state):
        """Rational tables at every quadrature point, windowed to actives."""
        if state.num_controls != self.num_controls:
            raise ValueError(
                f"state has {state.num_controls} controls, expected {self.num_controls}"
            )
        pts = state.points[self.control_window]
        wts = state.weights[self.control_window]
        return rational_tables(self.basis, self.basis_d1, self.basis_d2, pts, wts)

    @staticmethod
    def _jacobian_columns(rational, weight_cols):
        """Per-point 3 x 4k Jacobian window from factored entries."""
        n, k = rational.shape
        jq = np.zeros((n, 3, 4 * k))
        for axis in range(3):
            jq[:, axis, axis::4] = rational
        jq[:, :, 3::4] = weight_cols.transpose(0, 2, 1)
        return jq

    def _element_blocks(self, jq_a, jq_b, scale=1.0):
        prods = np.einsum("q,qax,qay->qxy", scale * self.w_quad, jq_a, jq_b)
        bs = self.block_size
        return prods.reshape(self.n_elements, self.n_gauss, bs, bs).sum(axis=1)

    def _scatter_symmetric(self, blocks):
        out = BandedSymmetric(self.num_dofs, self.bandwidth)
        for d in range(self.block_size):
            rows, cols = self._block_diag_idx[d]
            np.add.at(out.data[d], self._scatter_cols[d].ravel(), blocks[:, rows, cols].ravel())
        return out

    def _scatter_general(self, blocks):
        out = BandedGeneral(self.num_dofs, self.bandwidth)
        bs = self.block_size
        for d in range(-(bs - 1), bs):
            rows = np.arange(max(0, d), min(bs, bs + d))
            cols = rows - d
            np.add.at(
                out.data[out.bandwidth + d],
                (self.dof_starts[:, None] + cols[None, :]).ravel(),
                blocks[:, rows, cols].ravel(),
            )
        return out

    def _scatter_vector(self, per_point):
        """Accumulate per-point 4k contributions into the global 4m vector."""
        bs = self.block_size
        elem = per_point.reshape(self.n_elements, self.n_gauss, bs).sum(axis=1)
        out = np.zeros(self.num_dofs)
        np.add.at(out, self._dof_window.ravel(), elem.ravel())
        return out

    def gram_matrices(self, state, tables=None):
        """Banded mass, damping, and stiffness at the given state.

        Mass and damping share the integrand J^T J up to their densities, so
        they are scaled from one Gram integral and satisfy
        damping = (gamma/mu) * mass exactly.
        """
        t = tables if tables is not None else self.tables(state)
        jq = self._jacobian_columns(t.rational, t.weight_cols)
        jq1 = self._jacobian_columns(t.rational_d1, t.weight_cols_d1)
        jq2 = self._jacobian_columns(t.rational_d2, t.weight_cols_d2)
        gram = self._scatter_symmetric(self._element_blocks(jq, jq))
        mass = gram.scaled(self.params.mu)
        damping = gram.scaled(self.params.gamma)
        stiff_blocks = self._element_blocks(jq1, jq1, self.params.alpha)
        stiff_blocks += self._element_blocks(jq2, jq2, self.params.beta)
        stiffness = self._scatter_symmetric(stiff_blocks)
        return mass, damping, stiffness

    def mixed_mass(self, state_left, state_right):
        """The nonsymmetric integral mu * J(left)^T J(right) du, banded."""
        tl = self.tables(state_left)
        tr = self.tables(state_right)
        jl = self._jacobian_columns(tl.rational, tl.weight_cols)
        jr = self._jacobian_columns(tr.rational, tr.weight_cols)
        return self._scatter_general(self._element_blocks(jl, jr, self.params.mu))

    def force_vector(self, state, force_density, tables=None):
        """Generalized force: integral of J^T times the field along the curve."""
        t = tables if tables is not None else self.tables(state)
        jq = self._jacobian_columns(t.rational, t.weight_cols)
        values = np.asarray(force_density(t.curve), dtype=float)
        per_point = np.einsum("q,qax,qa->qx", self.w_quad, jq, values)
        return self._scatter_vector(per_point)

    def cross_vector(self, state_new, state_old, tables=None):
        """Cross-time integral mu * J(new)^T c(old) du as a 4m vector."""
        t_new = tables if tables is not None else self.tables(state_new)
        t_old = self.tables(state_old)
        jq = self._jacobian_columns(t_new.rational, t_new.weight_cols)
        per_point = np.einsum(
            "q,qax,qa->qx", self.params.mu * self.w_quad, jq, t_old.curve
        )
        return self._scatter_vector(per_point)

    def i_matrix(self, state, state_prev, dt):
        """Cross-velocity operator from the central difference of J in time."""
        if dt <= 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        current = self.mixed_mass(state, state)
        lagged = self.mixed_mass(state, state_prev)
        return BandedGeneral(
            current.size, current.bandwidth, (current.data - lagged.data) / (2 * dt)
        )


def assemble_matrices(state, kv, params, quad, state_prev=None, dt=None):
    """Assemble mass, damping, stiffness, and (optionally) the cross operator.

    When ``state_prev`` is given, ``dt`` must also be given, and the returned
    ``i_mat`` approximates mu * J^T dJ/dt du with dJ/dt taken as the central
    difference (J(state) - J(state_prev)) / (2 dt); otherwise ``i_mat`` is
    None (interpreted as zero).
    """
    ctx = AssemblyContext(kv, params, quad)
    mass, damping, stiffness = ctx.gram_matrices(state)
    i_mat = None
    if state_prev is not None:
        if dt is None:
            raise ConfigError("dt is required when state_prev is supplied")
        i_mat = ctx.i_matrix(state, state_prev, dt)
    return SystemMatrices(
        mass=mass,
        damping=damping,
        stiffness=stiffness,
        i_mat=i_mat,
        num_controls=ctx.num_controls,
    )


def assemble_force_vector(state, kv, params, quad, force_density):
    """Generalized force vector for an arbitrary force density field."""
    return AssemblyContext(kv, params, quad).force_vector(state, force_density)


def assemble_cross_term(state_new, state_old, kv, params, quad):
    """Cross-time vector used on the right-hand side of the update equation."""
    return AssemblyContext(kv, params, quad).cross_vector(state_new, state_old)
