"""The multiterm matrix operator, its adjoint, and factored residuals.

The equation is ``A_1 X B_1 + ... + A_p X B_p = C @ D.T`` with large sparse
coefficient pairs and a tall low-rank right-hand side. Everything here acts
on :class:`~mteq.lowrank.LowRankMatrix` operands factor-wise; the large
dimensions are only ever touched through sparse-times-tall-dense products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .lowrank import LowRankMatrix, ShapeError


def _check_square(m, name: str) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {m.shape}")


@dataclass(frozen=True)
class MultitermEquation:
    """Coefficient pairs ``(A_i, B_i)`` and right-hand-side factors ``C, D``.

    ``terms`` is a list of ``p >= 1`` pairs of square matrices (sparse or
    dense); all left coefficients share the dimension ``n_A`` and all right
    coefficients share ``n_B``. ``C`` is ``n_A x q`` and ``D`` is
    ``n_B x q`` with small ``q``.
    """

    terms: tuple
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        terms = tuple((a, b) for a, b in self.terms)
        if len(terms) < 1:
            raise ValueError("at least one coefficient pair is required")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "C", np.atleast_2d(np.asarray(self.C, dtype=float)))
        object.__setattr__(self, "D", np.atleast_2d(np.asarray(self.D, dtype=float)))
        n_a = terms[0][0].shape[0]
        n_b = terms[0][1].shape[0]
        for i, (a, b) in enumerate(terms):
            _check_square(a, f"A_{i + 1}")
            _check_square(b, f"B_{i + 1}")
            if a.shape[0] != n_a or b.shape[0] != n_b:
                raise ShapeError(
                    f"term {i + 1} has shapes {a.shape}, {b.shape}; expected "
                    f"({n_a}, {n_a}), ({n_b}, {n_b})"
                )
        if self.C.shape[0] != n_a or self.D.shape[0] != n_b:
            raise ShapeError(
                f"right-hand-side factors have shapes {self.C.shape}, "
                f"{self.D.shape}; expected leading dimensions {n_a}, {n_b}"
            )
        if self.C.shape[1] != self.D.shape[1]:
            raise ShapeError("C and D must have the same number of columns")

    @property
    def p(self) -> int:
        return len(self.terms)

    @property
    def q(self) -> int:
        return self.C.shape[1]

    @property
    def n_A(self) -> int:
        return self.terms[0][0].shape[0]

    @property
    def n_B(self) -> int:
        return self.terms[0][1].shape[0]

    def rhs_lowrank(self) -> LowRankMatrix:
        """The right-hand side ``C @ D.T`` as a factored matrix."""
        return LowRankMatrix(self.C, np.eye(self.q), self.D)

    def rhs_norm(self) -> float:
        """``||C @ D.T||_F`` from the small Gram matrices."""
        g = (self.C.T @ self.C) @ (self.D.T @ self.D)
        return float(np.sqrt(max(np.trace(g), 0.0)))


def left_stack(eq: MultitermEquation, v: np.ndarray) -> np.ndarray:
    """Stack of per-term products ``[A_1 v, ..., A_p v]``."""
    if v.shape[1] == 0:
        return np.zeros((eq.n_A, 0))
    return np.hstack([a @ v for a, _ in eq.terms])


def right_stack(eq: MultitermEquation, v: np.ndarray) -> np.ndarray:
    """Stack of per-term products ``[B_1.T v, ..., B_p.T v]``."""
    if v.shape[1] == 0:
        return np.zeros((eq.n_B, 0))
    return np.hstack([b.T @ v for _, b in eq.terms])


def left_stack_adj(eq: MultitermEquation, v: np.ndarray) -> np.ndarray:
    """Stack of per-term products ``[A_1.T v, ..., A_p.T v]``."""
    if v.shape[1] == 0:
        return np.zeros((eq.n_A, 0))
    return np.hstack([a.T @ v for a, _ in eq.terms])


def right_stack_adj(eq: MultitermEquation, v: np.ndarray) -> np.ndarray:
    """Stack of per-term products ``[B_1 v, ..., B_p v]``."""
    if v.shape[1] == 0:
        return np.zeros((eq.n_B, 0))
    return np.hstack([b @ v for _, b in eq.terms])


def _check_operand(eq: MultitermEquation, x: LowRankMatrix) -> None:
    if x.shape != (eq.n_A, eq.n_B):
        raise ShapeError(
            f"operand has shape {x.shape}, equation expects ({eq.n_A}, {eq.n_B})"
        )


def apply_L(eq: MultitermEquation, x: LowRankMatrix) -> LowRankMatrix:
    """Apply ``X -> sum_i A_i X B_i`` in factored form.

    The inner width grows by exactly a factor ``p``; no truncation and no
    densification happen here.
    """
    _check_operand(eq, x)
    return LowRankMatrix(
        left_stack(eq, x.left),
        np.kron(np.eye(eq.p), x.core),
        right_stack(eq, x.right),
    )


def apply_Lstar(eq: MultitermEquation, x: LowRankMatrix) -> LowRankMatrix:
    """Apply the Frobenius adjoint ``X -> sum_i A_i.T X B_i.T`` in factored form."""
    _check_operand(eq, x)
    return LowRankMatrix(
        left_stack_adj(eq, x.left),
        np.kron(np.eye(eq.p), x.core),
        right_stack_adj(eq, x.right),
    )


def residual_factored(eq: MultitermEquation, x: LowRankMatrix) -> LowRankMatrix:
    """Factored residual ``C @ D.T - sum_i A_i X B_i``, un-truncated.

    The left factor is ``[C, A_1 x.left, ..., A_p x.left]``, the right
    factor is ``[D, B_1.T x.right, ..., B_p.T x.right]`` and the core is
    ``blkdiag(I_q, -I_p (x) x.core)``. Truncation is the caller's business.
    """
    _check_operand(eq, x)
    core = sla.block_diag(np.eye(eq.q), -np.kron(np.eye(eq.p), x.core))
    return LowRankMatrix(
        np.hstack([eq.C, left_stack(eq, x.left)]),
        core,
        np.hstack([eq.D, right_stack(eq, x.right)]),
    )


def as_sparse(matrix) -> sp.csr_matrix:
    """Normalize a coefficient matrix to CSR (dense input allowed)."""
    if sp.issparse(matrix):
        return matrix.tocsr()
    return sp.csr_matrix(np.asarray(matrix, dtype=float))
