"""Compressed-row sparse matrices and Jacobi-preconditioned CG / BiCGStab."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

BREAKDOWN_EPS = 1e-30


class ConvergenceError(RuntimeError):
    """Solver stopped without meeting its tolerance; carries the best iterate."""

    def __init__(self, message: str, x: np.ndarray, iterations: int, residual: float):
        super().__init__(message)
        self.x = x
        self.iterations = iterations
        self.residual = residual


class BreakdownError(ConvergenceError):
    pass


@dataclass(frozen=True, eq=False)
class CSRMatrix:
    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("row_offsets", "col_indices", "values"):
            getattr(self, name).setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.n_rows, self.n_cols

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def row_of_entry(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_rows), np.diff(self.row_offsets))

    @cached_property
    def _kernel(self):
        # scipy only supplies the compiled y = A x loop; structure stays ours
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        on = self.row_of_entry == self.col_indices
        d[self.row_of_entry[on]] = self.values[on]
        return d

    def transpose(self) -> "CSRMatrix":
        return from_coo(self.col_indices, self.row_of_entry, self.values, (self.n_cols, self.n_rows))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_of_entry, self.col_indices), self.values)
        return out

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        if self.n_rows != self.n_cols:
            return False
        diff = add(self, self.transpose(), beta=-1.0)
        scale = max(np.abs(self.values).max(initial=0.0), 1.0)
        return bool(np.abs(diff.values).max(initial=0.0) <= tol * scale)

    def __matmul__(self, x):
        return spmv(self, x)


def from_coo(rows, cols, vals, shape: tuple[int, int]) -> CSRMatrix:
    """Sort entries by (row, col) and sum duplicates in a fixed order."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    vals = np.asarray(vals, dtype=float).ravel()
    n_rows, n_cols = shape
    if len(rows) and (rows.min() < 0 or rows.max() >= n_rows or cols.min() < 0 or cols.max() >= n_cols):
        raise IndexError(f"triplet index out of range for shape {shape}")
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if len(rows):
        new = np.ones(len(rows), bool)
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new)
        vals = np.add.reduceat(vals, starts)
        rows, cols = rows[starts], cols[starts]
    offsets = np.zeros(n_rows + 1, np.int64)
    np.cumsum(np.bincount(rows, minlength=n_rows), out=offsets[1:])
    return CSRMatrix(n_rows, n_cols, offsets, cols, vals.astype(float))


def assemble_from_triplets(triplets, n: int) -> CSRMatrix:
    """n x n matrix from (row, col, value) triplets; duplicates are summed."""
    triplets = list(triplets)
    for r, c, _ in triplets:
        if not (0 <= r < n and 0 <= c < n):
            raise IndexError(f"triplet ({r}, {c}) out of range for n={n}")
    if not triplets:
        return from_coo([], [], [], (n, n))
    r, c, v = zip(*triplets)
    return from_coo(r, c, v, (n, n))


def add(A: CSRMatrix, B: CSRMatrix, alpha: float = 1.0, beta: float = 1.0) -> CSRMatrix:
    """alpha*A + beta*B, keeping explicit zeros of the union pattern."""
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {B.shape}")
    return from_coo(np.concatenate([A.row_of_entry, B.row_of_entry]),
                    np.concatenate([A.col_indices, B.col_indices]),
                    np.concatenate([alpha * A.values, beta * B.values]), A.shape)


def scale(A: CSRMatrix, alpha: float) -> CSRMatrix:
    return CSRMatrix(A.n_rows, A.n_cols, A.row_offsets.copy(), A.col_indices.copy(), alpha * A.values)


def replace_rows_with_identity(A: CSRMatrix, nodes, symmetric: bool = True) -> CSRMatrix:
    """Overwrite each listed row with the unit row.

    With ``symmetric`` the matching columns are zeroed too, which leaves the
    solution unchanged for homogeneous constraints (zero right-hand side at
    those rows) and keeps SPD matrices SPD.
    """
    mask = np.zeros(A.n_rows, bool)
    mask[np.fromiter(nodes, dtype=np.int64)] = True
    r, c, v = A.row_of_entry, A.col_indices, A.values.copy()
    kill = mask[r]
    if symmetric:
        kill |= mask[c]
    v[kill] = 0.0
    v[kill & (r == c)] = 1.0
    out = CSRMatrix(A.n_rows, A.n_cols, A.row_offsets.copy(), c.copy(), v)
    missing = np.flatnonzero(mask & (out.diagonal() != 1.0))
    if len(missing):
        out = add(out, from_coo(missing, missing, np.ones(len(missing)), A.shape))
    return out


def spmv(A: CSRMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    return A._kernel @ x


@dataclass
class SolveResult:
    x: np.ndarray
    iterations: int
    residual: float  # relative, ||b - A x|| / ||b||


def _jacobi(A: CSRMatrix) -> np.ndarray:
    d = A.diagonal()
    if np.any(d == 0):
        raise ValueError("Jacobi preconditioner needs a nonzero diagonal")
    return 1.0 / d


def cg_solve(A: CSRMatrix, b, tol: float = 1e-10, maxit: int | None = None, x0=None,
             check_symmetry: bool = False, atol: float = 0.0) -> SolveResult:
    """Preconditioned conjugate gradients for SPD ``A``.

    Stops when ``||b - A x|| <= max(tol * ||b||, atol)``.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = 10 * n if maxit is None else maxit
    if check_symmetry:
        assert A.is_symmetric(1e-12), "cg_solve needs a symmetric matrix"
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0, 0.0)
    minv = _jacobi(A)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    target = max(tol * bnorm, atol)
    r = b - spmv(A, x)
    res = np.linalg.norm(r) / bnorm
    best = (res, x.copy())
    it = 0
    while it < maxit and res * bnorm > target:
        # inner loop on the recursive residual, restarted on the true one
        z = minv * r
        p = z.copy()
        rz = r @ z
        while it < maxit:
            Ap = spmv(A, p)
            pAp = p @ Ap
            if pAp <= 0:
                raise ConvergenceError("matrix is not positive definite", best[1], it, best[0])
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) <= target:
                break
            z = minv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        r = b - spmv(A, x)
        res = np.linalg.norm(r) / bnorm
        if not np.isfinite(res):
            raise ConvergenceError("cg: non-finite iterate", best[1], it, best[0])
        if res < best[0]:
            best = (res, x.copy())
    if res * bnorm > target:
        raise ConvergenceError(f"cg: no convergence in {maxit} iterations (residual {best[0]:.3e})",
                               best[1], it, best[0])
    return SolveResult(x, it, float(res))


def bicgstab_solve(A: CSRMatrix, b, tol: float = 1e-10, maxit: int | None = None, x0=None,
                   atol: float = 0.0) -> SolveResult:
    """Right-Jacobi-preconditioned BiCGStab for nonsymmetric ``A``; same stopping rule as cg_solve."""
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = 10 * n if maxit is None else maxit
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return SolveResult(np.zeros(n), 0, 0.0)
    minv = _jacobi(A)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    target = max(tol * bnorm, atol)
    r = b - spmv(A, x)
    res = np.linalg.norm(r) / bnorm
    best = (res, x.copy())
    it = 0
    while it < maxit and res * bnorm > target:
        r_hat = r.copy()
        rhat_norm = np.linalg.norm(r_hat)
        rho = alpha = omega = 1.0
        v = np.zeros(n)
        p = np.zeros(n)
        while it < maxit:
            rho_new = r_hat @ r
            # scale-free form of |rho| < 1e-30
            if abs(rho_new) < BREAKDOWN_EPS * rhat_norm * np.linalg.norm(r):
                raise BreakdownError("bicgstab: breakdown (rho ~ 0)", best[1], it, best[0])
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            ph = minv * p
            v = spmv(A, ph)
            denom = r_hat @ v
            if denom == 0.0:
                raise BreakdownError("bicgstab: breakdown (r_hat . v = 0)", best[1], it, best[0])
            alpha = rho / denom
            s = r - alpha * v
            it += 1
            if np.linalg.norm(s) <= target:
                x += alpha * ph
                r = s
                break
            sh = minv * s
            t = spmv(A, sh)
            tt = t @ t
            if tt == 0.0:
                raise BreakdownError("bicgstab: breakdown (t = 0)", best[1], it, best[0])
            omega = (t @ s) / tt
            x += alpha * ph + omega * sh
            r = s - omega * t
            if np.linalg.norm(r) <= target:
                break
            if omega == 0.0:
                raise BreakdownError("bicgstab: breakdown (omega = 0)", best[1], it, best[0])
        r = b - spmv(A, x)
        res = np.linalg.norm(r) / bnorm
        if not np.isfinite(res):
            raise BreakdownError("bicgstab: non-finite iterate", best[1], it, best[0])
        if res < best[0]:
            best = (res, x.copy())
    if res * bnorm > target:
        raise ConvergenceError(f"bicgstab: no convergence in {maxit} iterations (residual {best[0]:.3e})",
                               best[1], it, best[0])
    return SolveResult(x, it, float(res))
