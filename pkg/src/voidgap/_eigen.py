"""Lowest eigenpairs of sparse Hermitian-definite pencils ``A u = lambda K u``."""
from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure

DENSE_LIMIT = 2500

# LOBPCG is restarted in short chunks on purpose; its "did not reach tolerance"
# notices are expected and the wanted residuals are checked explicitly
warnings.filterwarnings("ignore", message=r"Exited (at iteration|postprocessing)",
                        category=UserWarning)


def amg_preconditioner(B: sp.spmatrix) -> spla.LinearOperator:
    """One smoothed-aggregation V-cycle for a (real or complex) Hermitian
    positive definite matrix, applied column by column to blocks."""
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(sp.csr_matrix(B))
    inner = ml.aspreconditioner(cycle="V")
    n = B.shape[0]

    def apply(X):
        X = np.asarray(X)
        if X.ndim == 1:
            return inner.matvec(X)
        return np.column_stack([inner.matvec(X[:, c]) for c in range(X.shape[1])])

    return spla.LinearOperator((n, n), matvec=apply, matmat=apply, dtype=B.dtype)


def residual_norms(A, K, values, vectors) -> np.ndarray:
    R = A @ vectors - (K @ vectors) * values[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(vectors, axis=0)


def lowest_eigenpairs(A, K, k: int, *, method: str = "auto", sigma: float | None = None,
                      precond=None, tol: float = 1e-8, seed: int = 0, maxiter: int = 400):
    """Return ``(values, vectors, residuals)`` for the ``k`` smallest eigenvalues.

    ``method`` is ``dense``, ``shift-invert``, ``lobpcg`` or ``auto``
    (dense below :data:`DENSE_LIMIT` unknowns, otherwise shift-invert).
    Vectors are ``K``-orthonormal.
    """
    n = A.shape[0]
    if k >= n:
        raise SolverFailure(f"requested {k} eigenpairs from a system of size {n}")
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT else "shift-invert"
    if method == "dense":
        Ad, Kd = A.toarray(), K.toarray()
        w, V = sla.eigh(Ad, Kd, subset_by_index=[0, k - 1])
    elif method == "shift-invert":
        if sigma is None:
            sigma = -1.0
        try:
            w, V = spla.eigsh(A.tocsc(), k=k, M=sp.csc_matrix(K), sigma=sigma, which="LM",
                              tol=1e-12, maxiter=5000)
        except (spla.ArpackNoConvergence, RuntimeError) as exc:
            raise SolverFailure(f"shift-invert iteration failed: {exc}") from exc
    elif method == "lobpcg":
        w, V = _lobpcg(A, K, k, precond, tol, seed, maxiter)
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    order = np.argsort(w)
    w, V = np.real(w[order]), V[:, order]
    V = _k_orthonormalize(V, K)
    return w, V, residual_norms(A, K, w, V)


def _lobpcg(A, K, k, precond, tol, seed, maxiter, chunk=20):
    """LOBPCG restarted every ``chunk`` iterations; only the wanted ``k``
    residuals decide convergence (the guard vectors may lag behind)."""
    n = A.shape[0]
    block = k + 4
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, block))
    if np.iscomplexobj(A.data):
        X = X + 1j * rng.standard_normal((n, block))
    if precond is None:
        precond = amg_preconditioner(A + K)
    done = 0
    while done < maxiter:
        w, V = spla.lobpcg(A, X, B=K, M=precond, largest=False, tol=1e-14, maxiter=chunk)
        done += chunk
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        res = residual_norms(A, K, w[:k], V[:, :k])
        if np.all(res <= tol * np.maximum(1.0, np.abs(w[:k]))):
            return w[:k], V[:, :k]
        X = V
    raise SolverFailure(f"LOBPCG did not converge in {maxiter} iterations: residuals {res}")


def _k_orthonormalize(V, K):
    G = V.conj().T @ (K @ V)
    G = 0.5 * (G + G.conj().T)
    L = np.linalg.cholesky(G)
    # V (L^H)^{-1}, computed through its transpose
    return sla.solve_triangular(L.conj(), V.T, lower=True).T
