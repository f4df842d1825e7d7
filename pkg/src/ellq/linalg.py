"""Sparse products, desk-scale dense decompositions and reference oracles."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ellq import kernels
from ellq.errors import AssemblyError, DenseCeilingError, InvalidParameterError

DEFAULT_DENSE_CEILING = 4096


def dense_ceiling() -> int:
    """Largest dimension allowed on dense paths (``ELLQ_DENSE_CEILING`` overrides)."""
    raw = os.environ.get("ELLQ_DENSE_CEILING")
    if not raw:
        return DEFAULT_DENSE_CEILING
    try:
        value = int(raw)
    except ValueError:
        raise InvalidParameterError(f"ELLQ_DENSE_CEILING must be an integer, got {raw!r}") from None
    if value < 1:
        raise InvalidParameterError("ELLQ_DENSE_CEILING must be positive")
    return value


def check_dense(size: int, what: str = "dense operation") -> None:
    limit = dense_ceiling()
    if size > limit:
        raise DenseCeilingError(
            f"{what} needs a dense {size}x{size} matrix, above the ceiling {limit}; "
            "use iterative estimates or raise ELLQ_DENSE_CEILING"
        )


@dataclass(frozen=True)
class CSRMatrix:
    """Compressed sparse row matrix with sorted, duplicate-free column indices."""

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.data.shape[0])

    @classmethod
    def from_coo(cls, rows, cols, vals, shape) -> "CSRMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        nr, nc = int(shape[0]), int(shape[1])
        if rows.size and (rows.min() < 0 or rows.max() >= nr or cols.min() < 0 or cols.max() >= nc):
            raise InvalidParameterError("COO index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            start = np.ones(rows.size, dtype=bool)
            start[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            group = np.cumsum(start) - 1
            vals = np.bincount(group, weights=vals)
            rows, cols = rows[start], cols[start]
        keep = vals != 0.0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        indptr = np.zeros(nr + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=nr), out=indptr[1:])
        return cls((nr, nc), indptr, cols.copy(), vals.copy())

    @classmethod
    def from_dense(cls, a) -> "CSRMatrix":
        a = np.asarray(a, dtype=np.float64)
        r, c = np.nonzero(a)
        return cls.from_coo(r, c, a[r, c], a.shape)

    @classmethod
    def identity(cls, n: int) -> "CSRMatrix":
        i = np.arange(n)
        return cls.from_coo(i, i, np.ones(n), (n, n))

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.shape[0]), np.diff(self.indptr))

    def transpose(self) -> "CSRMatrix":
        return CSRMatrix.from_coo(self.indices, self.row_ids(), self.data, self.shape[::-1])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids(), self.indices] = self.data
        return out

    def scale_columns(self, d) -> "CSRMatrix":
        d = np.asarray(d, dtype=np.float64)
        return CSRMatrix.from_coo(self.row_ids(), self.indices, self.data * d[self.indices], self.shape)

    def column_nnz(self) -> np.ndarray:
        return np.bincount(self.indices, minlength=self.shape[1])


def _vector(v, n: int, what: str) -> np.ndarray:
    v = np.ascontiguousarray(v, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] != n:
        raise InvalidParameterError(f"{what}: expected vector of length {n}, got shape {v.shape}")
    return v


def spmv(m: CSRMatrix, v, backend: str | None = None) -> np.ndarray:
    v = _vector(v, m.shape[1], "spmv")
    out = np.empty(m.shape[0])
    kernels.get_backend(backend).csr_matvec(m.indptr, m.indices, m.data, v, out)
    return out


def spmv_transpose(m: CSRMatrix, v, backend: str | None = None) -> np.ndarray:
    v = _vector(v, m.shape[0], "spmv_transpose")
    out = np.empty(m.shape[1])
    kernels.get_backend(backend).csr_matvec_t(m.indptr, m.indices, m.data, v, out)
    return out


def cholesky_factor(a: np.ndarray):
    """Cholesky factor of a dense SPD matrix; raises ``AssemblyError`` on breakdown."""
    check_dense(a.shape[0], "Cholesky factorization")
    try:
        return sla.cho_factor(a, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError(f"Cholesky breakdown, matrix is not SPD ({exc})") from exc


def direct_solve(system, b=None) -> np.ndarray:
    """Reference solution of ``G^T G x = b`` (``b`` defaults to the system load)."""
    rhs = system.b if b is None else _vector(b, system.n_dof, "direct_solve")
    return sla.cho_solve(system.cholesky(), rhs)


def dense_eig_sym(a, tol: float = 1e-12):
    """Ascending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"need a square matrix, got shape {a.shape}")
    check_dense(a.shape[0], "symmetric eigensolve")
    scale = max(np.abs(a).max(), 1.0)
    if np.abs(a - a.T).max() > tol * scale:
        raise InvalidParameterError("dense_eig_sym requires a symmetric matrix")
    return np.linalg.eigh(0.5 * (a + a.T))


def dense_expm_apply(m, t: float, v) -> np.ndarray:
    """``exp(t M) v`` by scaling and squaring (scipy ``expm``)."""
    m = np.asarray(m, dtype=np.float64)
    check_dense(m.shape[0], "matrix exponential")
    v = _vector(v, m.shape[1], "dense_expm_apply")
    if t == 0:
        return v.copy()
    return sla.expm(t * m) @ v
