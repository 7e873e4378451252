"""Desk-scale reference implementations used to validate the solvers.

Everything here builds the explicit Kronecker form of a small equation and
works on full vectors; a hard size guard keeps these paths out of any
large-scale run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .operator import MultitermEquation

#: Largest admissible number of unknowns ``n_A * n_B`` for dense oracles.
SIZE_GUARD = 10_000


def _dense(m) -> np.ndarray:
    return m.toarray() if sp.issparse(m) else np.asarray(m, dtype=float)


@dataclass(frozen=True)
class KroneckerSystem:
    """Explicit vectorized form of a small multiterm equation."""

    matrix: np.ndarray
    b: np.ndarray
    n_A: int
    n_B: int


def assemble_kron(eq: MultitermEquation) -> KroneckerSystem:
    """Assemble ``sum_i kron(B_i.T, A_i)`` and ``vec(C @ D.T)`` densely."""
    n = eq.n_A * eq.n_B
    if n > SIZE_GUARD:
        raise ValueError(f"{n} unknowns exceed the dense-oracle guard {SIZE_GUARD}")
    mat = np.zeros((n, n))
    for a, b in eq.terms:
        mat += np.kron(_dense(b).T, _dense(a))
    rhs = (eq.C @ eq.D.T).flatten(order="F")
    return KroneckerSystem(mat, rhs, eq.n_A, eq.n_B)


def direct_solve(sys: KroneckerSystem) -> np.ndarray:
    """LU ground truth; returns the solution reshaped to ``n_A x n_B``."""
    x = sla.solve(sys.matrix, sys.b)
    return x.reshape((sys.n_A, sys.n_B), order="F")


def vector_mr(sys: KroneckerSystem, tol: float = 1e-10, maxit: int = 500):
    """Classical minimal-residual iteration ``x <- x + alpha r``.

    Returns the final iterate and a history dict with the residual norms,
    plus ``converged`` and ``breakdown`` flags.
    """
    a, b = sys.matrix, sys.b
    x = np.zeros_like(b)
    r = b - a @ x
    norms = [float(np.linalg.norm(r))]
    breakdown = False
    converged = norms[-1] <= tol * np.linalg.norm(b)
    for _ in range(maxit):
        if converged:
            break
        w = a @ r
        denom = float(w @ w)
        if denom == 0.0:
            breakdown = True
            break
        alpha = float(w @ r) / denom
        x = x + alpha * r
        r = r - alpha * w
        norms.append(float(np.linalg.norm(r)))
        converged = norms[-1] <= tol * np.linalg.norm(b)
    return x, {"residuals": norms, "converged": converged, "breakdown": breakdown}


def vector_orthomin1(sys: KroneckerSystem, tol: float = 1e-10, maxit: int = 500):
    """Classical orthomin(1): direction recurrence ``p <- r + beta p``."""
    a, b = sys.matrix, sys.b
    x = np.zeros_like(b)
    r = b - a @ x
    p = r.copy()
    norms = [float(np.linalg.norm(r))]
    breakdown = False
    converged = norms[-1] <= tol * np.linalg.norm(b)
    for _ in range(maxit):
        if converged:
            break
        ap = a @ p
        denom = float(ap @ ap)
        if denom == 0.0:
            breakdown = True
            break
        alpha = float(ap @ r) / denom
        x = x + alpha * p
        r = r - alpha * ap
        norms.append(float(np.linalg.norm(r)))
        converged = norms[-1] <= tol * np.linalg.norm(b)
        if converged:
            break
        beta = -float((a @ r) @ ap) / denom
        p = r + beta * p
    return x, {"residuals": norms, "converged": converged, "breakdown": breakdown}


def spectral_quantities(sys: KroneckerSystem) -> tuple[float, float]:
    """Smallest eigenvalue of the symmetric part, and the spectral norm."""
    mu = float(sla.eigvalsh(0.5 * (sys.matrix + sys.matrix.T))[0])
    nrm = float(sla.svdvals(sys.matrix)[0])
    return mu, nrm
