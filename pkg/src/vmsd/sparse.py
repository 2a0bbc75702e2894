"""Triplet accumulation, compressed patterns and per-slab linear solves."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import AssemblyError, SolverFailure

RESIDUAL_TOL = 1e-10


class SparseSystem:
    """Square sparse operator plus right-hand side, built from triplets.

    Duplicate (row, col) entries sum on compression.  Accumulation accepts
    single entries or whole blocks; the compressed matrix is cached until
    the next accumulation.
    """

    def __init__(self, n: int, rhs: np.ndarray | None = None):
        self.n = int(n)
        self.rhs = np.zeros(self.n) if rhs is None else np.asarray(rhs, dtype=float)
        if self.rhs.shape != (self.n,):
            raise AssemblyError(f"right-hand side must have length {self.n}")
        self._rows: list[np.ndarray] = []
        self._cols: list[np.ndarray] = []
        self._vals: list[np.ndarray] = []
        self._csr: sp.csr_matrix | None = None

    def accumulate(self, row: int, col: int, value: float) -> None:
        """Add one entry (summing semantics)."""
        self.add_block(np.array([row]), np.array([col]), np.array([float(value)]))

    def add_block(self, rows, cols, vals) -> None:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not rows.size == cols.size == vals.size:
            raise AssemblyError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.n
                          or cols.min() < 0 or cols.max() >= self.n):
            raise AssemblyError("triplet index out of range")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(vals)
        self._csr = None

    @classmethod
    def from_csr(cls, matrix: sp.csr_matrix, rhs: np.ndarray) -> "SparseSystem":
        out = cls(matrix.shape[0], rhs)
        out._csr = matrix.tocsr()
        return out

    def matrix(self) -> sp.csr_matrix:
        if self._csr is None:
            if not self._rows:
                self._csr = sp.csr_matrix((self.n, self.n))
            else:
                coo = sp.coo_matrix(
                    (np.concatenate(self._vals),
                     (np.concatenate(self._rows), np.concatenate(self._cols))),
                    shape=(self.n, self.n),
                )
                csr = coo.tocsr()
                csr.sum_duplicates()
                csr.sort_indices()
                self._csr = csr
        return self._csr

    def dump_coordinate(self, path) -> None:
        """Write the compressed matrix as zero-based 'row col value' lines."""
        coo = self.matrix().tocoo()
        with open(path, "w") as f:
            for r, c, v in zip(coo.row, coo.col, coo.data):
                f.write(f"{int(r)} {int(c)} {float(v)!r}\n")


class CompressedPattern:
    """Reusable CSR skeleton for assemblies with a fixed sparsity pattern.

    Computes once where every raw triplet lands in the compressed data
    array, so repeated assemblies reduce to one bincount.
    """

    def __init__(self, rows, cols, n: int):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.size and (rows.min() < 0 or rows.max() >= n
                          or cols.min() < 0 or cols.max() >= n):
            raise AssemblyError("triplet index out of range")
        order = np.lexsort((cols, rows))
        r, c = rows[order], cols[order]
        new_group = np.ones(r.size, dtype=bool)
        new_group[1:] = (r[1:] != r[:-1]) | (c[1:] != c[:-1])
        group = np.cumsum(new_group) - 1
        self.n = n
        self.nnz = int(group[-1]) + 1 if r.size else 0
        self._slot = np.empty(rows.size, dtype=np.int64)
        self._slot[order] = group
        self._indices = c[new_group]
        counts = np.zeros(n, dtype=np.int64)
        np.add.at(counts, r[new_group], 1)
        self._indptr = np.concatenate(([0], np.cumsum(counts)))

    def build(self, vals) -> sp.csr_matrix:
        data = np.bincount(self._slot, weights=np.asarray(vals, dtype=float).ravel(),
                           minlength=self.nnz)
        return sp.csr_matrix((data, self._indices, self._indptr), shape=(self.n, self.n))


def _check_residual(matrix: sp.csr_matrix, x: np.ndarray, rhs: np.ndarray, what: str) -> None:
    scale = spla.norm(matrix) * np.linalg.norm(x) + np.linalg.norm(rhs)
    resid = np.linalg.norm(matrix @ x - rhs)
    if not np.isfinite(resid) or resid > RESIDUAL_TOL * max(scale, 1e-300):
        raise SolverFailure(f"{what} solve missed the residual bound", resid / max(scale, 1e-300))


def solve(system: SparseSystem, method: str = "direct", x0: np.ndarray | None = None,
          gmres_tol: float = 1e-10, gmres_maxiter: int = 10000,
          direct_limit: int = 40000) -> np.ndarray:
    """Solve the compressed system, verifying the residual bound.

    method 'direct' uses sparse LU; 'gmres' a restarted Krylov iteration
    with diagonal preconditioning (falling back to LU if it stalls);
    'auto' picks by system size.
    """
    matrix = system.matrix()
    rhs = system.rhs
    if method == "auto":
        method = "direct" if system.n <= direct_limit else "gmres"
    if method == "gmres":
        x = _gmres(matrix, rhs, x0, gmres_tol, gmres_maxiter)
        if x is None:
            method = "direct"
        else:
            _check_residual(matrix, x, rhs, "iterative")
            return x
    if method != "direct":
        raise AssemblyError(f"unknown solve method {method!r}")
    try:
        x = spla.spsolve(matrix.tocsc(), rhs)
    except RuntimeError as exc:  # singular factorization
        raise SolverFailure(f"direct solve failed: {exc}", np.inf) from exc
    _check_residual(matrix, x, rhs, "direct")
    return x


def _gmres(matrix, rhs, x0, tol, maxiter) -> np.ndarray | None:
    diag = matrix.diagonal()
    safe = np.where(np.abs(diag) > 1e-300, diag, 1.0)
    precond = spla.LinearOperator(matrix.shape, lambda v: v / safe)
    restart = 100
    outer = max(1, maxiter // restart)
    x, info = spla.gmres(matrix, rhs, x0=x0, rtol=tol, atol=0.0,
                         restart=restart, maxiter=outer, M=precond)
    if info != 0:
        return None
    return x
