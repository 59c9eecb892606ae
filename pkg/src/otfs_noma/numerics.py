"""Complex linear-algebra substrate.

Provides the unitary DFT, a minimal matrix-free linear-operator abstraction
(apply + adjoint apply only), and dense helpers used by the test oracles and
the MMSE benchmark. Everything is double-precision complex.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg

from .exceptions import DimensionError, NumericalRankError, SizeCapError

__all__ = [
    "LinearOperator",
    "IdentityOperator",
    "MatrixOperator",
    "ComposedOperator",
    "CountingOperator",
    "ColumnSubsetOperator",
    "DampedAugmentedOperator",
    "dft",
    "densify",
    "dense_regularized_solve",
    "adjoint_mismatch",
]

# Default guard for dense materialization (rows * cols).
DENSIFY_CAP = 4096 ** 2


def _as_complex(x) -> np.ndarray:
    return np.asarray(x, dtype=np.complex128)


class LinearOperator:
    """Matrix-free linear map given by an apply and an adjoint-apply routine.

    Both routines must accept arrays of shape ``(in_dim,)`` or
    ``(in_dim, batch)`` and be re-entrant (no shared mutable scratch).
    Instances are immutable after construction.
    """

    def __init__(self, out_dim: int, in_dim: int,
                 apply_fn: Callable[[np.ndarray], np.ndarray],
                 adjoint_fn: Callable[[np.ndarray], np.ndarray]):
        self.out_dim = int(out_dim)
        self.in_dim = int(in_dim)
        self._apply_fn = apply_fn
        self._adjoint_fn = adjoint_fn

    @property
    def shape(self) -> tuple[int, int]:
        return (self.out_dim, self.in_dim)

    def apply(self, x) -> np.ndarray:
        x = _as_complex(x)
        if x.shape[0] != self.in_dim:
            raise DimensionError(
                f"operator expects input of length {self.in_dim}, got {x.shape[0]}")
        return self._apply_fn(x)

    def adjoint_apply(self, y) -> np.ndarray:
        y = _as_complex(y)
        if y.shape[0] != self.out_dim:
            raise DimensionError(
                f"adjoint expects input of length {self.out_dim}, got {y.shape[0]}")
        return self._adjoint_fn(y)

    def __matmul__(self, other: "LinearOperator") -> "ComposedOperator":
        return ComposedOperator(self, other)


class IdentityOperator(LinearOperator):
    def __init__(self, dim: int):
        super().__init__(dim, dim, lambda x: x.copy(), lambda y: y.copy())


class MatrixOperator(LinearOperator):
    """Dense matrix wrapped as an operator (test plumbing)."""

    def __init__(self, matrix):
        matrix = _as_complex(np.atleast_2d(matrix))
        self.matrix = matrix
        super().__init__(matrix.shape[0], matrix.shape[1],
                         lambda x: matrix @ x,
                         lambda y: matrix.conj().T @ y)


class ComposedOperator(LinearOperator):
    """Composition ``A @ B`` acting as x -> A(B(x))."""

    def __init__(self, outer: LinearOperator, inner: LinearOperator):
        if outer.in_dim != inner.out_dim:
            raise DimensionError(
                f"cannot compose {outer.shape} with {inner.shape}")
        self.outer = outer
        self.inner = inner
        super().__init__(outer.out_dim, inner.in_dim,
                         lambda x: outer.apply(inner.apply(x)),
                         lambda y: inner.adjoint_apply(outer.adjoint_apply(y)))


class CountingOperator(LinearOperator):
    """Wrapper counting apply/adjoint calls. Not thread-safe; test-only."""

    def __init__(self, op: LinearOperator):
        self.n_apply = 0
        self.n_adjoint = 0

        def _apply(x):
            self.n_apply += 1
            return op.apply(x)

        def _adjoint(y):
            self.n_adjoint += 1
            return op.adjoint_apply(y)

        super().__init__(op.out_dim, op.in_dim, _apply, _adjoint)


class ColumnSubsetOperator(LinearOperator):
    """Restriction of an operator to a subset of its input coordinates.

    Acts as the submatrix formed by the columns in `indices`: apply embeds
    the short vector into a zero vector of the full input dimension, the
    adjoint gathers the selected coordinates. Used to re-solve for the
    still-unknown symbols only once others have been decided and cancelled.
    """

    def __init__(self, op: LinearOperator, indices):
        indices = np.asarray(indices, dtype=int)
        if indices.ndim != 1 or indices.size == 0:
            raise DimensionError("indices must be a non-empty 1D array")
        if indices.min() < 0 or indices.max() >= op.in_dim:
            raise DimensionError(
                f"indices out of range for input dimension {op.in_dim}")
        self.indices = indices
        full_dim = op.in_dim

        def _apply(x):
            shape = (full_dim,) if x.ndim == 1 else (full_dim, x.shape[1])
            full = np.zeros(shape, dtype=np.complex128)
            full[indices] = x
            return op.apply(full)

        super().__init__(op.out_dim, indices.size, _apply,
                         lambda y: op.adjoint_apply(y)[indices])


class DampedAugmentedOperator(LinearOperator):
    """The stacked operator [A; damp*I] of shape (out_dim + in_dim, in_dim).

    Least squares against it minimizes ||b1 - Ax||^2 + ||b2 - damp*x||^2,
    which expresses a damped (Tikhonov) problem with a nonzero reference
    point: solving from a warm start x0 uses b1 = y - A x0, b2 = -damp*x0.
    """

    def __init__(self, op: LinearOperator, damp: float):
        if damp < 0:
            raise ValueError("damp must be nonnegative")
        self.damp = float(damp)
        out_dim, in_dim = op.shape

        def _apply(x):
            return np.concatenate([op.apply(x), self.damp * x], axis=0)

        def _adjoint(y):
            return op.adjoint_apply(y[:out_dim]) + self.damp * y[out_dim:]

        super().__init__(out_dim + in_dim, in_dim, _apply, _adjoint)


def dft(x, inverse: bool = False) -> np.ndarray:
    """Unitary N-point DFT of a vector (or of each column of a 2D array).

    Normalization is 1/sqrt(N) both ways, so the transform is unitary and
    ``dft(dft(x), inverse=True) == x``.
    """
    x = _as_complex(x)
    if x.shape[0] == 0:
        raise DimensionError("dft of zero-length input")
    fn = np.fft.ifft if inverse else np.fft.fft
    return fn(x, axis=0, norm="ortho")


def densify(op: LinearOperator, cap: int = DENSIFY_CAP) -> np.ndarray:
    """Materialize an operator as a dense matrix (column j = op.apply(e_j))."""
    rows, cols = op.shape
    if rows * cols > cap:
        raise SizeCapError(
            f"densify of {rows}x{cols} exceeds cap of {cap} entries")
    return op.apply(np.eye(cols, dtype=np.complex128))


def dense_regularized_solve(G, y, damp: float) -> np.ndarray:
    """Solve (G^H G + damp^2 I) x = G^H y via Cholesky (Tikhonov/MMSE oracle)."""
    G = _as_complex(np.atleast_2d(G))
    y = _as_complex(y)
    m, n = G.shape
    if m < n:
        raise DimensionError(f"G must be square or tall, got {G.shape}")
    if y.shape[0] != m:
        raise DimensionError(f"rhs length {y.shape[0]} does not match {G.shape}")
    if damp < 0:
        raise ValueError("damp must be nonnegative")
    A = G.conj().T @ G
    if damp > 0:
        A[np.diag_indices(n)] += damp ** 2
    rhs = G.conj().T @ y
    try:
        c, low = scipy.linalg.cho_factor(A, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalRankError(
            "normal equations are singular (rank-deficient G with damp=0)") from exc
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)


def adjoint_mismatch(op: LinearOperator, rng=None, trials: int = 5) -> float:
    """Max of |<A u, v> - <u, A^H v>| / (||u|| ||v||) over random u, v."""
    rng = np.random.default_rng(rng)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal(op.in_dim) + 1j * rng.standard_normal(op.in_dim)
        v = rng.standard_normal(op.out_dim) + 1j * rng.standard_normal(op.out_dim)
        lhs = np.vdot(v, op.apply(u))
        rhs = np.vdot(op.adjoint_apply(v), u)
        worst = max(worst, abs(lhs - rhs) /
                    (np.linalg.norm(u) * np.linalg.norm(v)))
    return worst
