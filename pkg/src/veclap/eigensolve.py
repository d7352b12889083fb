"""Smallest eigenpairs of the symmetric positive-definite generalized
problem A x = lambda B x.

Two routes:

* dense: LAPACK generalized symmetric solver (Cholesky reduction of B,
  tridiagonalization, implicit-shift QL/QR), used as the oracle and for the
  full spectrum;
* iterative: deflated block inverse iteration with a sparse factorization of
  A (valid shift sigma = 0 because A is SPD), B-inner products throughout,
  Rayleigh-Ritz extraction, and locking of converged pairs.

Both return B-orthonormal eigenvectors sorted ascending.  The iterative
start block is a fixed function of the problem size, so repeated solves are
bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, InputError

__all__ = ["EigenPairs", "solve_smallest", "full_spectrum"]

DENSE_LIMIT = 3000
_MAX_ITER = 200


@dataclass(frozen=True)
class EigenPairs:
    """Sorted smallest eigenvalues with B-orthonormal coefficient vectors."""

    eigenvalues: np.ndarray   # (m,) ascending
    vectors: np.ndarray       # (n, m), columns B-orthonormal
    residuals: np.ndarray     # (m,) relative residual norms
    method: str
    iterations: int

    @property
    def m(self) -> int:
        return self.eigenvalues.size


def _as_operator(M):
    if sp.issparse(M):
        return M.tocsr()
    return np.asarray(M, dtype=float)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)


def _residuals(A, B, w, X):
    AX = A @ X
    BX = B @ X
    num = np.linalg.norm(AX - BX * w[None, :], axis=0)
    den = np.linalg.norm(AX, axis=0)
    den[den == 0.0] = 1.0
    return num / den


def _check_pencil(A, B, m):
    if A.shape[0] != A.shape[1] or B.shape != A.shape:
        raise InputError(f"pencil shapes do not match: {A.shape} vs {B.shape}")
    if not (1 <= m <= A.shape[0]):
        raise InputError(f"requested {m} pairs from problem of size {A.shape[0]}")


def _dense_solve(A, B, m) -> tuple[np.ndarray, np.ndarray]:
    Ad, Bd = _dense(A), _dense(B)
    try:
        w, X = sla.eigh(Ad, Bd)
    except sla.LinAlgError as exc:
        raise InputError("B is not symmetric positive definite") from exc
    return w[:m], X[:, :m]


def _b_orthonormalize(Y, BY):
    """Whiten Y in the B-inner product; drops directions lost to roundoff."""
    M = Y.T @ BY
    M = 0.5 * (M + M.T)
    s, U = np.linalg.eigh(M)
    keep = s > s[-1] * 1e-14
    T = U[:, keep] / np.sqrt(s[keep])[None, :]
    return Y @ T, BY @ T


def _iterative_solve(A, B, m, tol) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    n = A.shape[0]
    block = min(n, m + max(8, m))
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise InputError("A could not be factorized (singular?)") from exc

    rng = np.random.default_rng(0x5EED)  # fixed: solves are reproducible
    X = rng.standard_normal((n, block))

    locked_X = np.zeros((n, 0))
    locked_w = np.empty(0)
    best = None
    iterations = 0
    for iterations in range(1, _MAX_ITER + 1):
        # deflate: B-orthogonalize the active block against locked pairs
        if locked_X.shape[1]:
            X = X - locked_X @ (locked_X.T @ (B @ X))
        Y = lu.solve(B @ X)
        if locked_X.shape[1]:
            Y = Y - locked_X @ (locked_X.T @ (B @ Y))
        Y, BY = _b_orthonormalize(Y, B @ Y)
        # Rayleigh-Ritz on the active subspace
        Ar = Y.T @ (A @ Y)
        Ar = 0.5 * (Ar + Ar.T)
        theta, Z = np.linalg.eigh(Ar)
        X = Y @ Z

        n_needed = m - locked_w.size
        w_cand = theta[:n_needed]
        X_cand = X[:, :n_needed]
        res = _residuals(A, B, w_cand, X_cand)
        best = (w_cand, X_cand, res)

        # lock converged leading pairs (they must stay sorted, so only a
        # prefix of the candidate block may be locked)
        n_lock = 0
        while n_lock < n_needed and res[n_lock] <= tol:
            n_lock += 1
        if n_lock:
            locked_X = np.concatenate([locked_X, X_cand[:, :n_lock]], axis=1)
            locked_w = np.concatenate([locked_w, w_cand[:n_lock]])
            if locked_w.size >= m:
                break
            X = X[:, n_lock:]
        # keep a buffer of trial directions beyond the wanted pairs
        target = min(n - locked_w.size, block)
        if X.shape[1] < target:
            X = np.concatenate(
                [X, rng.standard_normal((n, target - X.shape[1]))], axis=1)

    if locked_w.size < m:
        w_cand, X_cand, res = best
        w = np.concatenate([locked_w, w_cand])
        X = np.concatenate([locked_X, X_cand], axis=1)
        res_all = _residuals(A, B, w, X)
        if np.any(res_all > tol):
            raise ConvergenceError(
                f"inverse iteration did not converge in {_MAX_ITER} iterations "
                f"(worst residual {res_all.max():.3e})",
                residuals=res_all)
        return w, X, res_all, iterations

    w, X = locked_w[:m], locked_X[:, :m]
    order = np.argsort(w, kind="stable")
    return w[order], X[:, order], _residuals(A, B, w[order], X[:, order]), iterations


def solve_smallest(A, B, m: int, tol: float = 1e-10,
                   method: str = "auto") -> EigenPairs:
    """Compute the m smallest eigenpairs of A x = lambda B x (A, B SPD).

    ``method`` is one of ``dense``, ``iterative``, ``auto``; auto picks dense
    for n <= 3000.
    """
    A = _as_operator(A)
    B = _as_operator(B)
    _check_pencil(A, B, m)
    n = A.shape[0]
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "iterative"
    if method not in ("dense", "iterative"):
        raise InputError(f"unknown method {method!r}")

    if method == "dense":
        w, X = _dense_solve(A, B, m)
        res = _residuals(A, B, w, X)
        iterations = 0
    else:
        w, X, res, iterations = _iterative_solve(sp.csr_matrix(A), sp.csr_matrix(B),
                                                 m, tol)
        # one final B-normalization pass for clean orthonormality
        BX = sp.csr_matrix(B) @ X
        M = X.T @ BX
        X = X @ np.linalg.inv(sla.cholesky(0.5 * (M + M.T), lower=False))
        res = _residuals(A, B, w, X)
    return EigenPairs(eigenvalues=w, vectors=X, residuals=res,
                      method=method, iterations=iterations)


def full_spectrum(A, B) -> EigenPairs:
    """Complete B-orthonormal eigenbasis (dense only, n <= 3000)."""
    A = _as_operator(A)
    B = _as_operator(B)
    _check_pencil(A, B, 1)
    n = A.shape[0]
    if n > DENSE_LIMIT:
        raise InputError(f"full spectrum limited to n <= {DENSE_LIMIT}, got {n}")
    w, X = _dense_solve(A, B, n)
    return EigenPairs(eigenvalues=w, vectors=X,
                      residuals=_residuals(A, B, w, X), method="dense", iterations=0)
