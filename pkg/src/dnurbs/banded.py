"""Symmetric and general banded matrix storage with O(bandwidth) matvec.

Matrices assembled from local element blocks couple only degrees of freedom
whose control points share an element, so the global operators are banded
with half-bandwidth 4*order - 1.  The symmetric variant stores the main
diagonal and the ``bandwidth`` subdiagonals; the general variant stores all
2*bandwidth + 1 diagonals.
"""

import numpy as np


class BandedSymmetric:
    """Symmetric banded matrix stored as lower diagonals.

    ``data[d, j] = A[j + d, j]`` for offsets d = 0..bandwidth; entries past
    the matrix edge are zero padding.  Symmetry holds structurally: the
    upper triangle is never stored, so ``A == A.T`` exactly.
    """

    def __init__(self, size, bandwidth, data=None):
        if size < 1 or bandwidth < 0:
            raise ValueError(f"invalid banded shape ({size}, bw={bandwidth})")
        self.size = size
        self.bandwidth = min(bandwidth, size - 1)
        if data is None:
            data = np.zeros((self.bandwidth + 1, size))
        self.data = data

    @classmethod
    def from_dense(cls, dense, bandwidth=None):
        dense = np.asarray(dense, dtype=float)
        n = dense.shape[0]
        if bandwidth is None:
            bandwidth = n - 1
        out = cls(n, bandwidth)
        for d in range(out.bandwidth + 1):
            out.data[d, : n - d] = np.diagonal(dense, -d)
        return out

    def copy(self):
        return BandedSymmetric(self.size, self.bandwidth, self.data.copy())

    def to_dense(self):
        n = self.size
        dense = np.zeros((n, n))
        dense[np.arange(n), np.arange(n)] = self.data[0]
        for d in range(1, self.bandwidth + 1):
            idx = np.arange(n - d)
            dense[idx + d, idx] = self.data[d, : n - d]
            dense[idx, idx + d] = self.data[d, : n - d]
        return dense

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        y = self.data[0] * x
        n = self.size
        for d in range(1, self.bandwidth + 1):
            band = self.data[d, : n - d]
            y[d:] += band * x[: n - d]
            y[: n - d] += band * x[d:]
        return y

    __matmul__ = matvec

    def axpy(self, alpha, other):
        """self += alpha * other (other must not be wider-banded)."""
        if other.size != self.size or other.bandwidth > self.bandwidth:
            raise ValueError("incompatible banded shapes")
        self.data[: other.bandwidth + 1] += alpha * other.data
        return self

    def scaled(self, alpha):
        return BandedSymmetric(self.size, self.bandwidth, alpha * self.data)

    def submatrix(self, indices):
        """Symmetric sub-matrix at ``indices`` (ascending), still banded."""
        indices = np.asarray(indices, dtype=int)
        if indices.size == 0:
            raise ValueError("cannot take an empty submatrix")
        if np.any(np.diff(indices) <= 0):
            raise ValueError("indices must be strictly increasing")
        n = indices.size
        out = BandedSymmetric(n, min(self.bandwidth, n - 1))
        for d in range(out.bandwidth + 1):
            rows = indices[d:]
            cols = indices[: n - d]
            offs = rows - cols
            vals = np.where(
                offs <= self.bandwidth,
                self.data[np.minimum(offs, self.bandwidth), cols],
                0.0,
            )
            out.data[d, : n - d] = vals
        return out

    def norm_max(self):
        return float(np.abs(self.data).max())


class BandedGeneral:
    """General (possibly nonsymmetric) banded matrix by diagonals.

    ``data[bandwidth + d, j] = A[j + d, j]`` for offsets d in
    [-bandwidth, bandwidth].
    """

    def __init__(self, size, bandwidth, data=None):
        self.size = size
        self.bandwidth = min(bandwidth, size - 1)
        if data is None:
            data = np.zeros((2 * self.bandwidth + 1, size))
        self.data = data

    def to_dense(self):
        n = self.size
        dense = np.zeros((n, n))
        for d in range(-self.bandwidth, self.bandwidth + 1):
            idx = np.arange(max(0, -d), n - max(0, d))
            dense[idx + d, idx] = self.data[self.bandwidth + d, idx]
        return dense

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        n = self.size
        y = np.zeros(n)
        for d in range(-self.bandwidth, self.bandwidth + 1):
            cols = np.arange(max(0, -d), n - max(0, d))
            y[cols + d] += self.data[self.bandwidth + d, cols] * x[cols]
        return y

    __matmul__ = matvec
