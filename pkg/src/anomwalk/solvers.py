"""Jacobi-preconditioned conjugate gradients for SPD systems."""

import numpy as np


class ConvergenceError(RuntimeError):
    pass


def pcg(A, b, diag=None, x0=None, tol=1e-10, maxiter=1000):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Parameters
    ----------
    A : ndarray or sparse matrix or LinearOperator
        Anything supporting ``A @ x``.
    b : (n,) ndarray
    diag : (n,) ndarray, optional
        Diagonal of ``A`` for the Jacobi preconditioner; no preconditioning
        if omitted.
    tol : float
        Stop when ``||b - A x|| <= tol * ||b||``.
    maxiter : int

    Raises
    ------
    ConvergenceError
        If the relative residual is still above ``tol`` after ``maxiter``
        iterations.
    """
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros_like(b)
    inv_d = np.ones_like(b) if diag is None else 1.0 / np.asarray(diag, dtype=float)
    r = b - A @ x
    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    if np.linalg.norm(b - A @ x) <= tol * bnorm:
        return x
    raise ConvergenceError(
        f"CG stopped after {maxiter} iterations at relative residual "
        f"{np.linalg.norm(b - A @ x) / bnorm:.3e}"
    )
