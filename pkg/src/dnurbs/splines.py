"""Knot vectors and B-spline basis functions.

Basis values and their first two parametric derivatives are produced by the
recursive definition of the B-spline basis: order-1 functions are span
indicators, and each higher order blends two functions of the previous order
with the usual 0/0 -> 0 convention at repeated knots.  Evaluation at the
right end of the domain is closed so the last basis function interpolates
there.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidKnotVectorError

UNIFORM = "uniform"
OPEN_UNIFORM = "open_uniform"
NONUNIFORM = "nonuniform"


def classify_knot_vector(knots, order):
    """Classify a knot sequence as uniform, open_uniform, or nonuniform.

    A uniform vector has equal spacing everywhere and no repeated knots.  An
    open uniform vector repeats its first and last knot exactly ``order``
    times and spaces the remaining breakpoints equally.  Everything else is
    nonuniform.

    Raises
    ------
    InvalidKnotVectorError
        If the sequence decreases anywhere or contains no nonzero span.
    """
    knots = np.asarray(knots, dtype=float)
    if knots.ndim != 1 or knots.size < 2:
        raise InvalidKnotVectorError("need at least two knots")
    diffs = np.diff(knots)
    if np.any(diffs < 0):
        raise InvalidKnotVectorError("knots must be nondecreasing")
    if not np.any(diffs > 0):
        raise InvalidKnotVectorError("degenerate knot vector: all knots equal")
    if np.all(np.isclose(diffs, diffs[0])) and diffs[0] > 0:
        return UNIFORM
    k = int(order)
    if k >= 2 and knots.size >= 2 * k:
        open_ends = np.all(knots[:k] == knots[0]) and np.all(knots[-k:] == knots[-1])
        interior = knots[k - 1 : knots.size - k + 1]
        int_diffs = np.diff(interior)
        if (
            open_ends
            and knots[k] > knots[k - 1]
            and knots[-k - 1] < knots[-k]
            and np.all(int_diffs > 0)
            and np.all(np.isclose(int_diffs, int_diffs[0]))
        ):
            return OPEN_UNIFORM
    return NONUNIFORM


@dataclass(frozen=True)
class KnotVector:
    """Nondecreasing knot sequence together with the spline order.

    ``order`` is k (degree + 1); the sequence defines m = len(knots) - k
    basis functions.  Instances are immutable and safe to share.
    """

    knots: np.ndarray
    order: int
    classification: str = field(init=False)

    def __post_init__(self):
        knots = np.array(self.knots, dtype=float)
        knots.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        if self.order < 1:
            raise InvalidKnotVectorError(f"order must be >= 1, got {self.order}")
        if knots.size < self.order + 1:
            raise InvalidKnotVectorError(
                f"need at least order+1 = {self.order + 1} knots, got {knots.size}"
            )
        object.__setattr__(
            self, "classification", classify_knot_vector(knots, self.order)
        )

    @property
    def num_basis(self):
        """Number of basis functions m = (#knots - 1) - order + 1."""
        return self.knots.size - self.order

    @property
    def is_open(self):
        """True when both ends have multiplicity >= order."""
        k = self.order
        return bool(
            np.all(self.knots[:k] == self.knots[0])
            and np.all(self.knots[-k:] == self.knots[-1])
        )

    @property
    def domain(self):
        """Full parameter range (first knot, last knot)."""
        return float(self.knots[0]), float(self.knots[-1])

    @property
    def valid_domain(self):
        """Range where the basis forms a partition of unity."""
        k = self.order
        return float(self.knots[k - 1]), float(self.knots[self.knots.size - k])

    def nonzero_spans(self):
        """Indices i of spans with knots[i] < knots[i+1]."""
        return np.nonzero(np.diff(self.knots) > 0)[0]

    def find_span(self, u):
        """Span index containing u; the right end maps to the last nonzero span."""
        lo, hi = self.domain
        if u < lo or u > hi:
            raise DomainError(f"u={u} outside knot range [{lo}, {hi}]")
        if u == hi:
            return int(self.nonzero_spans()[-1])
        return int(np.searchsorted(self.knots, u, side="right") - 1)


@dataclass(frozen=True)
class BasisEval:
    """All m basis values and derivatives at one parameter value."""

    span_index: int
    values: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def _value_tables(kv, u):
    """Recursion tables of basis values for orders 1..k, vectorized over u.

    Returns a dict order -> array of shape (len(u), #knots - order) where
    column i holds B_{i,order}(u).  The rightmost domain point is attributed
    to the last nonzero span.
    """
    knots = kv.knots
    nk = knots.size
    u = np.atleast_1d(np.asarray(u, dtype=float))
    npts = u.size
    tables = {}
    vals = np.zeros((npts, nk - 1))
    spans = np.searchsorted(knots, u, side="right") - 1
    last = int(kv.nonzero_spans()[-1])
    spans[u == knots[-1]] = last
    inside = (u >= knots[0]) & (u <= knots[-1])
    vals[np.nonzero(inside)[0], spans[inside]] = 1.0
    tables[1] = vals
    for d in range(2, kv.order + 1):
        nf = nk - d
        prev = tables[d - 1]
        den1 = knots[d - 1 : d - 1 + nf] - knots[:nf]
        den2 = knots[d : d + nf] - knots[1 : 1 + nf]
        safe1 = np.where(den1 > 0, den1, 1.0)
        safe2 = np.where(den2 > 0, den2, 1.0)
        t1 = np.where(den1 > 0, (u[:, None] - knots[None, :nf]) / safe1 * prev[:, :nf], 0.0)
        t2 = np.where(
            den2 > 0,
            (knots[None, d : d + nf] - u[:, None]) / safe2 * prev[:, 1 : 1 + nf],
            0.0,
        )
        tables[d] = t1 + t2
    return tables, spans


def _derivative_of(lower, knots, order):
    """First derivative of order-`order` functions from order-1 values below."""
    nf = knots.size - order
    den1 = knots[order - 1 : order - 1 + nf] - knots[:nf]
    den2 = knots[order : order + nf] - knots[1 : 1 + nf]
    safe1 = np.where(den1 > 0, den1, 1.0)
    safe2 = np.where(den2 > 0, den2, 1.0)
    t1 = np.where(den1 > 0, lower[:, :nf] / safe1, 0.0)
    t2 = np.where(den2 > 0, lower[:, 1 : 1 + nf] / safe2, 0.0)
    return (order - 1) * (t1 - t2)


def eval_basis_many(kv, u, max_order=2):
    """Evaluate all basis functions and derivatives at an array of parameters.

    Parameters
    ----------
    kv : KnotVector
    u : array_like
        Parameters, each within the knot range.
    max_order : int
        Highest derivative to compute (0, 1, or 2).  Higher entries in the
        returned tuple are zero-filled when not requested.

    Returns
    -------
    values, d1, d2 : ndarray
        Arrays of shape (len(u), m).
    """
    if not 0 <= max_order <= 2:
        raise ValueError(f"max_order must be 0, 1, or 2, got {max_order}")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lo, hi = kv.domain
    if np.any(u < lo) or np.any(u > hi):
        bad = u[(u < lo) | (u > hi)][0]
        raise DomainError(f"u={bad} outside knot range [{lo}, {hi}]")
    k = kv.order
    m = kv.num_basis
    tables, _ = _value_tables(kv, u)
    values = tables[k][:, :m]
    d1 = np.zeros_like(values)
    d2 = np.zeros_like(values)
    if max_order >= 1 and k >= 2:
        d1 = _derivative_of(tables[k - 1], kv.knots, k)[:, :m]
    if max_order >= 2 and k >= 3:
        d1_lower = _derivative_of(tables[k - 2], kv.knots, k - 1)
        d2 = _derivative_of(d1_lower, kv.knots, k)[:, :m]
    return values, d1, d2


def eval_bspline_derivatives(kv, u, max_order=2):
    """Basis values plus derivatives up to ``max_order`` at a single parameter."""
    values, d1, d2 = eval_basis_many(kv, np.array([u]), max_order=max_order)
    return BasisEval(
        span_index=kv.find_span(u), values=values[0], d1=d1[0], d2=d2[0]
    )


def eval_bspline_basis(kv, u):
    """Basis values and both derivatives at a single parameter.

    At most ``kv.order`` entries of ``values`` are nonzero; the rest vanish
    by local support.
    """
    return eval_bspline_derivatives(kv, u, max_order=2)
