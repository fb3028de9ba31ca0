"""Linear-algebra kernels and matrix-calculus utilities.

The symmetric eigensolver is a cyclic Jacobi sweep, good enough at desk
scale and fully deterministic: eigenvalues come out descending and each
eigenvector's largest-magnitude component is made positive.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, NotPositiveDefiniteError, SingularMatrixError, ValidationError


def gram_schmidt(vectors: Sequence[np.ndarray], tol: float = 1e-10) -> tuple[list[np.ndarray], list[bool]]:
    """Orthogonalise vectors in order, flagging dependent ones.

    Each output is the input minus its projections onto the previously kept
    outputs.  A residual with norm at most ``tol * norm(input)`` marks the
    input as linearly dependent; the (numerically zero) residual is still
    returned but never used as a projector afterwards.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    arrays = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
    if len({a.size for a in arrays}) > 1:
        raise ValidationError("vectors must share a dimension")
    basis: list[np.ndarray] = []
    flags: list[bool] = []
    kept: list[np.ndarray] = []
    for a in arrays:
        u = a.copy()
        for q in kept:
            u -= (q @ a) / (q @ q) * q
        dependent = bool(np.linalg.norm(u) <= tol * np.linalg.norm(a))
        basis.append(u)
        flags.append(dependent)
        if not dependent:
            kept.append(u)
    return basis, flags


def power_method(
    sigma: np.ndarray,
    w0: np.ndarray,
    max_iters: int = 10_000,
    tol: float = 1e-10,
) -> tuple[np.ndarray, float]:
    """Dominant eigenpair of a symmetric PSD matrix by repeated multiplication.

    Iterates v = sigma w, w = v / |v| until successive iterates agree up to
    sign within ``tol``; the eigenvalue is the Rayleigh quotient.  Raises
    :class:`ConvergenceError` (carrying the last iterate) if the budget runs
    out.
    """
    sigma = np.asarray(sigma, dtype=float)
    if not np.allclose(sigma, sigma.T, atol=1e-9):
        raise ValidationError("matrix must be symmetric")
    w = np.asarray(w0, dtype=float).reshape(-1)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValidationError("w0 must be nonzero")
    w = w / norm
    for _ in range(max_iters):
        v = sigma @ w
        vnorm = np.linalg.norm(v)
        if vnorm == 0:
            raise ConvergenceError("iterate collapsed to zero", last=w)
        nxt = v / vnorm
        if min(np.linalg.norm(nxt - w), np.linalg.norm(nxt + w)) < tol:
            w = nxt
            return w, float(w @ sigma @ w)
        w = nxt
    raise ConvergenceError(f"no convergence in {max_iters} iterations", last=w)


def sym_eigendecomposition(c: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors (columns) and eigenvalues of a symmetric matrix.

    Cyclic Jacobi rotations until the off-diagonal norm falls below 1e-12
    relative to the Frobenius norm.  Eigenvalues are returned descending.
    """
    a = np.asarray(c, dtype=float).copy()
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("matrix must be square")
    if not np.allclose(a, a.T, atol=1e-9, rtol=0.0):
        raise ValidationError("matrix must be symmetric")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    e = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)

    def off_norm() -> float:
        return float(np.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0))

    for _ in range(max_sweeps):
        if off_norm() <= 1e-12 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) <= 1e-300:
                    continue
                # Classic 2x2 symmetric Schur rotation.
                tau = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                cth = 1.0 / np.sqrt(1.0 + t * t)
                sth = t * cth
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = cth
                rot[p, q] = sth
                rot[q, p] = -sth
                a = rot.T @ a @ rot
                e = e @ rot
    if off_norm() > 1e-12 * scale:
        raise ConvergenceError(f"Jacobi sweep budget ({max_sweeps}) exhausted", last=(e, np.diag(a)))
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    eigvals = eigvals[order]
    vecs = e[:, order]
    for j in range(n):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs, eigvals


def matrix_sqrt_psd(c: np.ndarray) -> np.ndarray:
    """Symmetric square root M with M M = C for symmetric PSD C."""
    vecs, vals = sym_eigendecomposition(c)
    if vals.min() < -1e-9:
        raise ValidationError("matrix is not positive semi-definite")
    vals = np.clip(vals, 0.0, None)
    return vecs @ np.diag(np.sqrt(vals)) @ vecs.T


def whitening_matrix(c: np.ndarray) -> np.ndarray:
    """V with V C V^T = I, namely diag(lambda^-1/2) E^T; needs C positive
    definite."""
    vecs, vals = sym_eigendecomposition(c)
    if vals.min() <= 1e-12 * max(vals.max(), 1.0):
        raise NotPositiveDefiniteError("covariance must be positive definite for whitening")
    return np.diag(vals ** -0.5) @ vecs.T


# -- closed-form gradient kernels --------------------------------------------


def grad_linear(a: np.ndarray) -> np.ndarray:
    """Gradient of w -> a.w is a itself."""
    return np.asarray(a, dtype=float).copy()


def grad_quadratic(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Gradient of w -> w.A w is (A + A^T) w."""
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float).reshape(-1)
    if a.shape != (w.size, w.size):
        raise ValidationError("A must be square over the dimension of w")
    return (a + a.T) @ w


def grad_norm(w: np.ndarray) -> np.ndarray:
    """Gradient of the Euclidean norm, w / |w|."""
    w = np.asarray(w, dtype=float).reshape(-1)
    norm = np.linalg.norm(w)
    if norm == 0:
        raise ValidationError("w must be nonzero")
    return w / norm


def grad_logabsdet(w: np.ndarray) -> np.ndarray:
    """Gradient of W -> log |det W|, the transposed inverse."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValidationError("W must be square")
    sign, logdet = np.linalg.slogdet(w)
    if sign == 0 or not np.isfinite(logdet):
        raise SingularMatrixError("W is singular")
    return np.linalg.inv(w).T


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient estimate, one coordinate at a time.

    Works for matrix arguments as well: the perturbation runs over the
    flattened coordinates and the result has the shape of ``x``.
    """
    if h <= 0:
        raise ValidationError("h must be positive")
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        bump = np.zeros_like(flat)
        bump[i] = h
        grad[i] = (f((flat + bump).reshape(x.shape)) - f((flat - bump).reshape(x.shape))) / (2.0 * h)
    return grad.reshape(x.shape)


def newton_step(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Search direction p solving H p = g for symmetric positive definite H.

    The caller applies the update as w - p.  Solved through a Cholesky
    factorisation; failure to factor raises
    :class:`NotPositiveDefiniteError`.
    """
    g = np.asarray(g, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float)
    if h.shape != (g.size, g.size):
        raise ValidationError("H must be square over the dimension of g")
    try:
        factor = scipy.linalg.cho_factor(h)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"Cholesky factorisation failed: {exc}") from exc
    return scipy.linalg.cho_solve(factor, g)


def solve_spd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cholesky solve for SPD systems; shared by Newton and score matching."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(a), b)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
