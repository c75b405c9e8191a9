"""
Linear-algebra kernels shared by the solver and the baselines.

The outlier matrix ``Z`` is never formed. After a Z-update every column is
``z_i = c_i * (a_i - W0 h0_i)`` for a scale ``c_i`` in [0, 1], so the matrix
the factor updates see, ``Abar = A - Z``, has columns

    abar_i = (1 - c_i) a_i + c_i W0 h0_i

where ``(W0, H0)`` are the factors at the time of the Z-update. Products with
``Abar`` therefore cost O(nnz(A) + (m + n) r).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# relative slack below which a negative squared norm is treated as rounding
NEG_SQNORM_TOL = 1e-8


class DimensionError(ValueError):
    pass


@dataclass(frozen=True)
class FactorPair:
    """Nonnegative factors ``W`` (m x r) and ``H`` (r x n)."""

    W: np.ndarray
    H: np.ndarray

    def __post_init__(self):
        if self.W.ndim != 2 or self.H.ndim != 2:
            raise DimensionError("W and H must be 2-D")
        if self.W.shape[1] != self.H.shape[0]:
            raise DimensionError(
                f"inner dimensions differ: W is {self.W.shape}, H is {self.H.shape}")
        if self.W.shape[1] < 1:
            raise DimensionError("rank must be at least 1")

    @property
    def rank(self):
        return self.W.shape[1]

    def copy(self):
        return FactorPair(self.W.copy(), self.H.copy())


def _check_vec(x, size, what):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != size:
        raise DimensionError(f"{what}: expected length {size}, got shape {x.shape}")
    return x


def gram(M):
    """Return ``M.T @ M`` symmetrized to remove rounding asymmetry."""
    M = np.asarray(M, dtype=np.float64)
    G = M.T @ M
    return 0.5 * (G + G.T)


def spmv_t(A, x):
    """Compute ``A.T @ x`` for a sparse term-document matrix ``A``."""
    x = _check_vec(x, A.shape[0], "spmv_t")
    return np.asarray(A.T @ x).ravel()


def column_sq_norms(A):
    """Squared Euclidean norm of every column of sparse ``A``."""
    if sp.issparse(A):
        return np.asarray(A.multiply(A).sum(axis=0)).ravel()
    A = np.asarray(A)
    return np.einsum("ij,ij->j", A, A)


def _safe_sqrt(sq, scale, what):
    bad = sq < -NEG_SQNORM_TOL * np.maximum(scale, 1.0)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise FloatingPointError(
            f"{what}: squared norm {sq[j]:.3e} of column {j} is negative beyond rounding")
    return np.sqrt(np.maximum(sq, 0.0))


def column_residual_sq_norms(A, W, H, AtW=None, WtW=None, a_sq=None):
    """Squared norms ``||a_i - W h_i||^2`` via the Gram expansion.

    ``AtW``, ``WtW`` and ``a_sq`` may be passed in when already available.
    Returns the raw (possibly slightly negative) values along with the
    per-column magnitude used to judge rounding.
    """
    if A.shape[0] != W.shape[0] or A.shape[1] != H.shape[1] or W.shape[1] != H.shape[0]:
        raise DimensionError(
            f"shapes do not conform: A {A.shape}, W {W.shape}, H {H.shape}")
    if AtW is None:
        AtW = np.asarray(A.T @ W)
    if WtW is None:
        WtW = gram(W)
    if a_sq is None:
        a_sq = column_sq_norms(A)
    cross = np.einsum("ik,ki->i", AtW, H)
    fit_sq = np.einsum("ki,kl,li->i", H, WtW, H)
    return a_sq - 2.0 * cross + fit_sq, a_sq + fit_sq


def column_residual_norms(A, f):
    """Return ``||a_i - W h_i||_2`` for every document column ``i``."""
    sq, scale = column_residual_sq_norms(A, f.W, f.H)
    return _safe_sqrt(sq, scale, "column_residual_norms")


class ImplicitAbar:
    """The matrix ``A - Z`` represented through per-column shrink scales.

    Parameters
    ----------
    A : scipy.sparse.csc_matrix, shape (m, n)
    factors : FactorPair
        Factors at the time ``Z`` was computed. They are copied, since the
        solver keeps updating its own ``W`` and ``H`` in place.
    scales : array_like, shape (n,)
        Values ``c_i`` in [0, 1].
    """

    def __init__(self, A, factors, scales):
        self.A = A
        self.W0 = np.array(factors.W, dtype=np.float64, copy=True)
        self.H0 = np.array(factors.H, dtype=np.float64, copy=True)
        m, n = A.shape
        if self.W0.shape[0] != m or self.H0.shape[1] != n:
            raise DimensionError(
                f"factors {self.W0.shape}/{self.H0.shape} do not match A {A.shape}")
        c = _check_vec(scales, n, "scales")
        if np.any(c < 0) or np.any(c > 1) or not np.all(np.isfinite(c)):
            raise ValueError("shrink scales must lie in [0, 1]")
        self.c = c
        self.keep = 1.0 - c

    @property
    def shape(self):
        return self.A.shape

    def rmatmat(self, X):
        """``Abar.T @ X`` for dense ``X`` of shape (m, k)."""
        X = np.asarray(X, dtype=np.float64)
        out = np.asarray(self.A.T @ X)
        out *= self.keep[:, None]
        out += self.c[:, None] * (self.H0.T @ (self.W0.T @ X))
        return out

    def matmat(self, Y):
        """``Abar @ Y`` for dense ``Y`` of shape (n, k)."""
        Y = np.asarray(Y, dtype=np.float64)
        out = np.asarray(self.A @ (self.keep[:, None] * Y))
        out += self.W0 @ (self.H0 @ (self.c[:, None] * Y))
        return out

    def column_sq_norms(self):
        """``||abar_i||^2`` for every column."""
        a_sq = column_sq_norms(self.A)
        cross = np.einsum("ik,ki->i", np.asarray(self.A.T @ self.W0), self.H0)
        fit_sq = np.einsum("ki,kl,li->i", self.H0, gram(self.W0), self.H0)
        k, c = self.keep, self.c
        sq = k * k * a_sq + 2.0 * k * c * cross + c * c * fit_sq
        return np.maximum(sq, 0.0)

    def residual_sq_norms(self, W, H, AbtW=None, WtW=None):
        """``||abar_i - W h_i||^2`` for every column, clamped at zero."""
        if AbtW is None:
            AbtW = self.rmatmat(W)
        if WtW is None:
            WtW = gram(W)
        ab_sq = self.column_sq_norms()
        cross = np.einsum("ik,ki->i", AbtW, H)
        fit_sq = np.einsum("ki,kl,li->i", H, WtW, H)
        sq = ab_sq - 2.0 * cross + fit_sq
        return _safe_sqrt(sq, ab_sq + fit_sq, "residual_sq_norms") ** 2

    def toarray(self):
        """Dense materialization; for tests and tiny inputs only."""
        return self.A.toarray() * self.keep[None, :] + (self.W0 @ self.H0) * self.c[None, :]


def abar_apply_t(ab, x):
    """Compute ``(A - Z).T @ x`` without forming ``Z``."""
    x = _check_vec(x, ab.shape[0], "abar_apply_t")
    return ab.rmatmat(x[:, None]).ravel()
