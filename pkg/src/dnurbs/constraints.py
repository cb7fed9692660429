"""Linear equality constraints and reduction to free coordinates.

Constraints have the affine form A p + d = 0.  A set of dependent columns
with invertible pivot block G1 is selected by column-pivoted elimination;
the remaining coordinates q parameterize the feasible set through
p = G q + d0, with the dependent rows of G equal to -G1^{-1} G2 and the
free rows an identity.  Pin constraints (single-coordinate rows) reduce to
a pure selection, which keeps the reduced operators banded.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .banded import BandedGeneral, BandedSymmetric
from .errors import ConstraintSpecError

COORD_INDEX = {"x": 0, "y": 1, "z": 2, "w": 3}

#: pivot threshold factor for rank decisions during elimination
PIVOT_RTOL = 1e-10


def pin_rows(pins, reference_p):
    """Constraint rows fixing single coordinates at their reference values.

    ``pins`` is an iterable of (control_index, coord) with coord one of
    'x', 'y', 'z', 'w' or 0..3.  Each pin contributes the row
    e_dof^T p - reference = 0.
    """
    reference_p = np.asarray(reference_p, dtype=float)
    n = reference_p.size
    rows = []
    offsets = []
    seen = set()
    for control, coord in pins:
        c = COORD_INDEX[coord] if isinstance(coord, str) else int(coord)
        if not 0 <= c <= 3:
            raise ConstraintSpecError(f"coordinate must be x/y/z/w, got {coord}")
        dof = 4 * int(control) + c
        if not 0 <= dof < n:
            raise ConstraintSpecError(
                f"pin ({control}, {coord}) outside a {n // 4}-control state"
            )
        if dof in seen:
            raise ConstraintSpecError(f"duplicate pin for dof {dof}")
        seen.add(dof)
        row = np.zeros(n)
        row[dof] = 1.0
        rows.append(row)
        offsets.append(-reference_p[dof])
    return np.array(rows).reshape(len(rows), n), np.array(offsets)


@dataclass(frozen=True)
class ConstraintSpec:
    """Rows of A p + d = 0 over the 4m generalized coordinates."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        offset = np.atleast_1d(np.asarray(self.offset, dtype=float))
        if matrix.shape[0] != offset.size:
            raise ConstraintSpecError(
                f"{matrix.shape[0]} rows but {offset.size} offsets"
            )
        if matrix.shape[0] >= matrix.shape[1]:
            raise ConstraintSpecError(
                "constraint count must be smaller than the coordinate count"
            )
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "offset", offset)

    @property
    def num_constraints(self):
        return self.matrix.shape[0]

    @property
    def num_dofs(self):
        return self.matrix.shape[1]

    @classmethod
    def for_pins(cls, pins, reference_p, extra_rows=None, extra_offsets=None):
        """Build a spec from pinned coordinates plus optional raw rows."""
        rows, offs = pin_rows(pins, reference_p)
        if extra_rows is not None:
            rows = np.vstack([rows, np.atleast_2d(extra_rows)])
            offs = np.concatenate([offs, np.atleast_1d(extra_offsets)])
        return cls(matrix=rows, offset=offs)


@dataclass(frozen=True)
class ReductionMap:
    """Affine parameterization p = G q + d0 of the constraint manifold.

    ``permutation`` lists the dependent columns first (in pivot order) then
    the free columns ascending; in that ordering the bottom block of G is an
    identity.  When every dependent column decouples (pure pins), G is a
    selection matrix and reduced operators stay banded.
    """

    g: np.ndarray
    d0: np.ndarray
    permutation: np.ndarray
    dependent: np.ndarray
    free: np.ndarray
    is_selection: bool

    @property
    def full_dim(self):
        return self.g.shape[0]

    @property
    def reduced_dim(self):
        return self.g.shape[1]

    @classmethod
    def identity(cls, n):
        """Unconstrained map: q = p."""
        return cls(
            g=np.eye(n),
            d0=np.zeros(n),
            permutation=np.arange(n),
            dependent=np.arange(0),
            free=np.arange(n),
            is_selection=True,
        )

    def reconstruct(self, q):
        """Full coordinates G q + d0."""
        q = np.asarray(q, dtype=float)
        if self.is_selection:
            p = self.d0.copy()
            p[self.free] = q
            return p
        return self.g @ q + self.d0

    def reduce_vector(self, v):
        """G^T v."""
        v = np.asarray(v, dtype=float)
        return v[self.free] if self.is_selection else self.g.T @ v

    def reduce_matrix(self, operator):
        """Congruence G^T A G; banded in, banded out for selection maps."""
        if self.reduced_dim == 0:
            return np.zeros((0, 0))
        if self.is_selection and isinstance(operator, BandedSymmetric):
            return operator.submatrix(self.free)
        if self.is_selection and isinstance(operator, BandedGeneral):
            return _general_submatrix(operator, self.free)
        dense = operator.to_dense() if hasattr(operator, "to_dense") else np.asarray(operator)
        return self.g.T @ dense @ self.g

    def reduce_operator(self, operator, rhs):
        """Reduced system (G^T A G, G^T (rhs - A d0)) for solving A p = rhs."""
        shifted = rhs - operator.matvec(self.d0) if hasattr(operator, "matvec") else rhs - operator @ self.d0
        return self.reduce_matrix(operator), self.reduce_vector(shifted)


def _general_submatrix(operator, indices):
    indices = np.asarray(indices, dtype=int)
    n = indices.size
    out = BandedGeneral(n, min(operator.bandwidth, max(n - 1, 0)))
    dense = operator.to_dense()
    sub = dense[np.ix_(indices, indices)]
    for d in range(-out.bandwidth, out.bandwidth + 1):
        idx = np.arange(max(0, -d), n - max(0, d))
        out.data[out.bandwidth + d, idx] = sub[idx + d, idx]
    return out


def build_reduction(spec):
    """Select dependent columns and build the reduction map.

    Column pivoting realizes the requirement that the dependent block G1 be
    invertible; pivots below PIVOT_RTOL times the largest entry of A flag
    the constraint set as rank-deficient or redundant.
    """
    a = spec.matrix.copy()
    c, n = a.shape
    threshold = PIVOT_RTOL * max(np.abs(a).max(), 1e-300)
    work = a.copy()
    available = np.ones(n, dtype=bool)
    dependent = []
    for r in range(c):
        sub = np.abs(work[r:, :]) * available[None, :]
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        if sub[i, j] <= threshold:
            raise ConstraintSpecError(
                "constraints are rank-deficient (redundant or infeasible rows)"
            )
        i += r
        work[[r, i]] = work[[i, r]]
        available[j] = False
        dependent.append(j)
        pivot = work[r, j]
        factors = work[r + 1 :, j] / pivot
        work[r + 1 :] -= factors[:, None] * work[r][None, :]
    dependent = np.array(dependent)
    free = np.array(sorted(set(range(n)) - set(dependent.tolist())), dtype=int)

    g1 = a[:, dependent]
    g2 = a[:, free]
    x = np.linalg.solve(g1, g2)
    g1_inv_d = np.linalg.solve(g1, spec.offset)

    g = np.zeros((n, free.size))
    g[dependent, :] = -x
    g[free, np.arange(free.size)] = 1.0
    d0 = np.zeros(n)
    d0[dependent] = -g1_inv_d

    is_selection = not np.any(x)
    return ReductionMap(
        g=g,
        d0=d0,
        permutation=np.concatenate([dependent, free]),
        dependent=dependent,
        free=free,
        is_selection=is_selection,
    )


@dataclass(frozen=True)
class ReducedSystem:
    """System matrices and right-hand-side pieces in free coordinates.

    ``stiffness_offset`` is G^T K d0, the constant term subtracted from the
    reduced right-hand side of the governing equation.
    """

    mass: object
    damping: object
    stiffness: object
    i_mat: Optional[object]
    force: np.ndarray
    cross: np.ndarray
    stiffness_offset: np.ndarray


def reduce_system(matrices, force, cross, rmap):
    """Congruence-transform assembled matrices and vectors to free coordinates."""
    force = np.asarray(force, dtype=float)
    cross = np.asarray(cross, dtype=float)
    n = rmap.full_dim
    if matrices.mass.size != n or force.size != n or cross.size != n:
        raise ValueError(
            f"dimension mismatch: map expects {n}, got mass {matrices.mass.size}, "
            f"force {force.size}, cross {cross.size}"
        )
    return ReducedSystem(
        mass=rmap.reduce_matrix(matrices.mass),
        damping=rmap.reduce_matrix(matrices.damping),
        stiffness=rmap.reduce_matrix(matrices.stiffness),
        i_mat=None if matrices.i_mat is None else rmap.reduce_matrix(matrices.i_mat),
        force=rmap.reduce_vector(force),
        cross=rmap.reduce_vector(cross),
        stiffness_offset=rmap.reduce_vector(matrices.stiffness.matvec(rmap.d0)),
    )
