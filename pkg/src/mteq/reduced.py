"""Projected small systems defining the recurrence step coefficients.

Projecting the normal equations of the residual minimization onto the
current direction pair ``(P_l, P_r)`` yields a matrix equation whose
coefficient operator has ``p**2`` terms built from small Gram blocks:

    sum_ij (P_l.T A_i.T A_j P_l) @ coeff @ (P_l.T B_j B_i.T P_r) = rhs.

Its vectorized coefficient matrix is symmetric positive (semi)definite, so
small instances are solved by Cholesky on the assembled Kronecker sum and
larger ones by matrix-form PCG that never assembles it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .lowrank import LowRankMatrix
from .operator import (
    MultitermEquation,
    apply_L,
    left_stack,
    right_stack,
)


@dataclass(frozen=True)
class InnerSolveConfig:
    """Switching rule and PCG settings for the projected solves.

    The assembled (direct Cholesky) path is taken while ``q_k**2`` stays
    below ``direct_threshold``. ``inner_precond_terms`` designates the two
    leading terms whose diagonal Gram blocks precondition the PCG path;
    ``None`` means no preconditioning.
    """

    direct_threshold: int = 4000
    pcg_tol: float = 1e-4
    pcg_maxit: int = 200
    inner_precond_terms: tuple[int, int] | None = None

    def __post_init__(self):
        if self.direct_threshold <= 0 or self.pcg_maxit <= 0:
            raise ValueError("thresholds must be positive")


@dataclass
class ReducedSystem:
    """Gram-block data of one projected system.

    ``left_grams[i, j] = P_l.T A_i.T A_j P_l`` and
    ``right_grams[i, j] = P_r.T B_i B_j.T P_r``, each ``q_k x q_k``. The
    right-hand side is set by the caller before solving; the Cholesky
    factor of the assembled coefficient matrix is cached so it can be
    reused for a second solve with a different right-hand side.
    """

    left_grams: np.ndarray
    right_grams: np.ndarray
    rhs: np.ndarray | None = None
    rank_deficient: bool = False
    _chol: tuple | None = field(default=None, repr=False)
    _regularized: bool = field(default=False, repr=False)

    @property
    def p(self) -> int:
        return self.left_grams.shape[0]

    @property
    def q_k(self) -> int:
        return self.left_grams.shape[2]

    def assemble(self) -> np.ndarray:
        """Dense ``q_k**2 x q_k**2`` Kronecker-sum coefficient matrix."""
        p, qk = self.p, self.q_k
        lg = self.left_grams.reshape(p * p, qk, qk)
        rg = self.right_grams.reshape(p * p, qk, qk)
        t = np.einsum("xab,xcd->acbd", rg, lg)
        return t.reshape(qk * qk, qk * qk)

    def apply(self, coeff: np.ndarray) -> np.ndarray:
        """Matrix-form action ``sum_ij left_grams[i,j] @ coeff @ right_grams[i,j].T``."""
        p, qk = self.p, self.q_k
        lg = self.left_grams.reshape(p * p, qk, qk)
        rg = self.right_grams.reshape(p * p, qk, qk)
        tmp = lg @ coeff
        return np.einsum("xad,xbd->ab", tmp, rg)


def build_reduced(
    eq: MultitermEquation, p_l: np.ndarray, p_r: np.ndarray
) -> ReducedSystem:
    """Compute all ``p**2`` Gram blocks for the direction pair.

    Both tables come from a single Gram product of the stacked per-term
    images, so the cost is one tall skinny syrk per side. Severely
    rank-deficient direction factors are flagged (the caller may
    re-orthonormalize) but not rejected.
    """
    p = eq.p
    qk = p_l.shape[1]
    ga = left_stack(eq, p_l)
    gb = right_stack(eq, p_r)
    big_l = ga.T @ ga
    big_r = gb.T @ gb
    left = big_l.reshape(p, qk, p, qk).transpose(0, 2, 1, 3).copy()
    right = big_r.reshape(p, qk, p, qk).transpose(0, 2, 1, 3).copy()
    deficient = False
    if qk > 0:
        for factor in (p_l, p_r):
            svals = sla.svdvals(factor)
            if svals[0] == 0.0 or svals[-1] <= 1e-12 * svals[0]:
                deficient = True
    if deficient:
        warnings.warn(
            "direction factors are numerically rank deficient; consider "
            "re-orthonormalizing before the projected solve",
            RuntimeWarning,
        )
    return ReducedSystem(left, right, rank_deficient=deficient)


def _projected_adjoint(
    eq: MultitermEquation, p_l: np.ndarray, p_r: np.ndarray, m: LowRankMatrix
) -> np.ndarray:
    """``P_l.T @ (sum_i A_i.T M B_i.T) @ P_r`` evaluated factor-wise."""
    qk = p_l.shape[1]
    if m.is_zero or qk == 0:
        return np.zeros((qk, p_r.shape[1]))
    ga = left_stack(eq, p_l)
    gb = right_stack(eq, p_r)
    p = eq.p
    m1 = (ga.T @ m.left).reshape(p, qk, -1)
    m2 = (gb.T @ m.right).reshape(p, qk, -1)
    tmp = m1 @ m.core
    return np.einsum("iab,icb->ac", tmp, m2)


def alpha_rhs(
    eq: MultitermEquation, p_l: np.ndarray, p_r: np.ndarray, r: LowRankMatrix
) -> np.ndarray:
    """Right-hand side of the residual-minimizing step: the projected adjoint of ``r``."""
    return _projected_adjoint(eq, p_l, p_r, r)


def beta_rhs(
    eq: MultitermEquation, p_l: np.ndarray, p_r: np.ndarray, z: LowRankMatrix
) -> np.ndarray:
    """Right-hand side enforcing operator-image orthogonality of consecutive directions.

    ``z`` is the (preconditioned) new residual; the result is the negated
    projected adjoint of its operator image.
    """
    return -_projected_adjoint(eq, p_l, p_r, apply_L(eq, z))


class _SylvesterPreconditioner:
    """Two-term inner preconditioner applied by generalized eigendecompositions.

    Diagonalizes ``L_a coeff R_a + L_b coeff R_b`` (the two designated
    diagonal Gram pairs) so each application is two small dense products
    and an elementwise division.
    """

    def __init__(self, sys: ReducedSystem, terms: tuple[int, int]):
        i, j = terms
        la, ra = sys.left_grams[i, i], sys.right_grams[i, i]
        lb, rb = sys.left_grams[j, j], sys.right_grams[j, j]
        lam_a, v = sla.eigh(la, lb)
        lam_b, w = sla.eigh(rb, ra)
        denom = lam_a[:, None] + lam_b[None, :]
        floor = 1e-14 * max(float(np.max(np.abs(denom))), 1.0)
        self._denom = np.where(denom > floor, denom, floor)
        self._v = v
        self._w = w

    def apply(self, f: np.ndarray) -> np.ndarray:
        g = self._v.T @ f @ self._w
        return self._v @ (g / self._denom) @ self._w.T


def _solve_direct(sys: ReducedSystem) -> tuple[np.ndarray, dict]:
    qk = sys.q_k
    regularized = False
    if sys._chol is None:
        t = sys.assemble()
        try:
            chol = ("chol", sla.cho_factor(t))
        except np.linalg.LinAlgError:
            floor = 1e-14 * np.trace(t) / (qk * qk)
            t[np.diag_indices_from(t)] += floor
            regularized = True
            warnings.warn(
                "projected coefficient matrix is numerically singular; "
                f"added a diagonal floor of {floor:.3e}",
                RuntimeWarning,
            )
            try:
                chol = ("chol", sla.cho_factor(t))
            except np.linalg.LinAlgError:
                lam, vecs = sla.eigh(t)
                lam = np.maximum(lam, floor)
                chol = ("eigh", (lam, vecs))
        sys._chol = chol
        sys._regularized = regularized
    tag, data = sys._chol
    rhs_vec = sys.rhs.flatten(order="F")
    if tag == "eigh":
        lam, vecs = data
        x = vecs @ ((vecs.T @ rhs_vec) / lam)
    else:
        x = sla.cho_solve(data, rhs_vec)
    info = {"path": "direct", "pcg_iters": None, "converged": True,
            "regularized": sys._regularized}
    return x.reshape((qk, qk), order="F"), info


def _solve_pcg(sys: ReducedSystem, cfg: InnerSolveConfig) -> tuple[np.ndarray, dict]:
    qk = sys.q_k
    if cfg.inner_precond_terms is not None:
        try:
            precond = _SylvesterPreconditioner(sys, cfg.inner_precond_terms)
            apply_m = precond.apply
        except np.linalg.LinAlgError:
            warnings.warn(
                "inner preconditioner setup failed; running unpreconditioned CG",
                RuntimeWarning,
            )
            apply_m = lambda f: f  # noqa: E731
    else:
        apply_m = lambda f: f  # noqa: E731

    x = np.zeros((qk, qk))
    r = sys.rhs.copy()
    rhs_norm = float(np.linalg.norm(r))
    if rhs_norm == 0.0:
        return x, {"path": "pcg", "pcg_iters": 0, "converged": True,
                   "regularized": False}
    z = apply_m(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    converged = False
    iters = 0
    for iters in range(1, cfg.pcg_maxit + 1):
        w = sys.apply(p)
        denom = float(np.sum(p * w))
        if denom <= 0.0:
            break
        step = rz / denom
        x = x + step * p
        r = r - step * w
        if np.linalg.norm(r) <= cfg.pcg_tol * rhs_norm:
            converged = True
            break
        z = apply_m(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    if not converged:
        warnings.warn(
            f"inner PCG did not reach tol {cfg.pcg_tol:.1e} within "
            f"{cfg.pcg_maxit} iterations; returning the best iterate",
            RuntimeWarning,
        )
    return x, {"path": "pcg", "pcg_iters": iters, "converged": converged,
               "regularized": False}


def solve_reduced(
    sys: ReducedSystem, cfg: InnerSolveConfig | None = None
) -> tuple[np.ndarray, dict]:
    """Solve the projected system for the ``q_k x q_k`` step coefficient.

    Parameters
    ----------
    sys : ReducedSystem
        Gram blocks with ``sys.rhs`` set.
    cfg : InnerSolveConfig, optional
        Path switching and PCG settings.

    Returns
    -------
    coeff : ndarray, shape (q_k, q_k)
    info : dict
        ``path`` ("direct" or "pcg"), ``pcg_iters``, ``converged`` and
        ``regularized`` diagnostics.
    """
    if sys.rhs is None:
        raise ValueError("set sys.rhs before solving the projected system")
    cfg = cfg or InnerSolveConfig()
    if sys.q_k == 0:
        return np.zeros((0, 0)), {"path": "direct", "pcg_iters": None,
                                  "converged": True, "regularized": False}
    if sys.q_k * sys.q_k < cfg.direct_threshold:
        return _solve_direct(sys)
    return _solve_pcg(sys, cfg)
