"""Low-rank factored matrices: formation, factored sums, QR+SVD truncation.

A matrix is kept as the triple product ``left @ core @ right.T`` and is
never formed densely unless it is small enough. All operations return new
objects; instances are treated as immutable and are safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

#: Largest number of entries ``densify`` will materialize by default.
DENSIFY_CAP = 4_000_000


class ShapeError(ValueError):
    """Dimensions of factored operands do not conform."""


@dataclass(frozen=True)
class TruncationConfig:
    """Truncation rule: relative singular-value cutoff plus a hard rank cap.

    A truncation keeps the leading singular values with
    ``sigma_j / sigma_1 > toltrank``, and never more than ``maxrank`` of
    them.
    """

    toltrank: float = 1e-10
    maxrank: int = 50

    def __post_init__(self):
        if not 0.0 < self.toltrank < 1.0:
            raise ValueError(f"toltrank must lie in (0, 1), got {self.toltrank}")
        if self.maxrank < 1:
            raise ValueError(f"maxrank must be a positive integer, got {self.maxrank}")


@dataclass(frozen=True)
class LowRankMatrix:
    """Three-factor representation ``left @ core @ right.T``.

    Parameters
    ----------
    left : ndarray, shape (n_rows, r_l)
    core : ndarray, shape (r_l, r_r)
    right : ndarray, shape (n_cols, r_r)
    orthonormal : bool
        Set when both ``left`` and ``right`` have orthonormal columns
        (e.g. after a truncation). Zero-width factors are vacuously
        orthonormal.

    The zero matrix is represented with zero-width factors; see
    :meth:`zeros`.
    """

    left: np.ndarray
    core: np.ndarray
    right: np.ndarray
    orthonormal: bool = False

    def __post_init__(self):
        left = np.atleast_2d(np.asarray(self.left, dtype=float))
        core = np.atleast_2d(np.asarray(self.core, dtype=float))
        right = np.atleast_2d(np.asarray(self.right, dtype=float))
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "right", right)
        if left.shape[1] != core.shape[0] or right.shape[1] != core.shape[1]:
            raise ShapeError(
                f"factors do not conform: left {left.shape}, core {core.shape}, "
                f"right {right.shape}"
            )

    @classmethod
    def zeros(cls, n_rows: int, n_cols: int) -> "LowRankMatrix":
        """Canonical zero matrix with zero-width factors."""
        return cls(
            np.zeros((n_rows, 0)),
            np.zeros((0, 0)),
            np.zeros((n_cols, 0)),
            orthonormal=True,
        )

    @classmethod
    def from_factors(cls, left: np.ndarray, right: np.ndarray) -> "LowRankMatrix":
        """Two-factor form ``left @ right.T`` with an identity core."""
        left = np.atleast_2d(np.asarray(left, dtype=float))
        right = np.atleast_2d(np.asarray(right, dtype=float))
        return cls(left, np.eye(left.shape[1], right.shape[1]), right)

    @classmethod
    def from_dense(cls, dense: np.ndarray, tol: float = 0.0) -> "LowRankMatrix":
        """Factor a dense matrix through its SVD, dropping sigma <= tol * sigma_1."""
        dense = np.atleast_2d(np.asarray(dense, dtype=float))
        u, s, vt = sla.svd(dense, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return cls.zeros(*dense.shape)
        keep = int(np.count_nonzero(s > tol * s[0]))
        return cls(u[:, :keep], np.diag(s[:keep]), vt[:keep].T, orthonormal=True)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.left.shape[0], self.right.shape[0])

    @property
    def rank(self) -> int:
        """Width of the factorization (an upper bound on the matrix rank)."""
        return min(self.left.shape[1], self.right.shape[1])

    @property
    def is_zero(self) -> bool:
        return self.left.shape[1] == 0 or self.right.shape[1] == 0

    def densify(self, max_entries: int = DENSIFY_CAP) -> np.ndarray:
        """Form the represented matrix densely.

        Refuses when ``n_rows * n_cols`` exceeds ``max_entries``; large
        iterates must stay factored.
        """
        n_rows, n_cols = self.shape
        if n_rows * n_cols > max_entries:
            raise ValueError(
                f"refusing to densify a {n_rows} x {n_cols} matrix "
                f"({n_rows * n_cols} entries > cap {max_entries})"
            )
        if self.is_zero:
            return np.zeros((n_rows, n_cols))
        return self.left @ self.core @ self.right.T

    def norm_fro(self) -> float:
        """Frobenius norm, computed from the factors only.

        Orthonormal factors reduce to ``||core||_F``; otherwise the factors
        are compressed by skinny QR first, which avoids the cancellation
        a Gram-product evaluation would suffer.
        """
        if self.is_zero:
            return 0.0
        if self.orthonormal:
            return float(np.linalg.norm(self.core))
        rl = sla.qr(self.left, mode="economic")[1]
        rr = sla.qr(self.right, mode="economic")[1]
        return float(np.linalg.norm(rl @ self.core @ rr.T))


def select_rank(sigma: np.ndarray, cfg: TruncationConfig) -> int:
    """Number of singular values kept by the truncation rule.

    Keeps the longest prefix with ``sigma_j / sigma_1 > toltrank``, capped
    at ``cfg.maxrank``. An all-zero spectrum keeps nothing.
    """
    if sigma.size == 0 or sigma[0] <= 0.0:
        return 0
    keep = int(np.count_nonzero(sigma / sigma[0] > cfg.toltrank))
    return min(cfg.maxrank, keep)


def truncated_svd(
    left: np.ndarray,
    core: np.ndarray,
    right: np.ndarray,
    cfg: TruncationConfig,
) -> tuple[LowRankMatrix, np.ndarray]:
    """QR+SVD truncation of ``left @ core @ right.T``.

    Returns the truncated matrix (orthonormal factors, diagonal core) and
    the full singular-value vector of the compressed core, whose Frobenius
    norm equals the norm of the input matrix.
    """
    n_rows, n_cols = left.shape[0], right.shape[0]
    if left.shape[1] == 0 or right.shape[1] == 0:
        return LowRankMatrix.zeros(n_rows, n_cols), np.zeros(0)
    ql, rl = sla.qr(left, mode="economic")
    qr_, rr = sla.qr(right, mode="economic")
    u, sigma, vt = sla.svd(rl @ core @ rr.T, full_matrices=False)
    rank = select_rank(sigma, cfg)
    if rank == 0:
        return LowRankMatrix.zeros(n_rows, n_cols), sigma
    out = LowRankMatrix(
        ql @ u[:, :rank],
        np.diag(sigma[:rank]),
        qr_ @ vt[:rank].T,
        orthonormal=True,
    )
    return out, sigma


def truncate(m: LowRankMatrix, cfg: TruncationConfig) -> LowRankMatrix:
    """Rank-truncate a factored matrix.

    Skinny QR of both factors, SVD of the small compressed core, then the
    cutoff rule of ``cfg``. The Frobenius truncation error equals the norm
    of the discarded singular values. A numerically zero input yields the
    canonical zero matrix.
    """
    return truncated_svd(m.left, m.core, m.right, cfg)[0]


def factored_sum(
    x: LowRankMatrix, p: LowRankMatrix, coeff_core: np.ndarray
) -> LowRankMatrix:
    """Un-truncated factored form of ``x + p.left @ coeff_core @ p.right.T``.

    Stacks the factors and block-diagonalizes the cores; no arithmetic on
    the large dimensions is performed. ``coeff_core`` must conform to the
    inner dimensions of ``p``.
    """
    if x.shape != p.shape:
        raise ShapeError(f"outer dimensions differ: {x.shape} vs {p.shape}")
    coeff_core = np.atleast_2d(np.asarray(coeff_core, dtype=float))
    if coeff_core.shape != (p.left.shape[1], p.right.shape[1]):
        raise ShapeError(
            f"coefficient core {coeff_core.shape} does not conform to "
            f"direction factors ({p.left.shape[1]}, {p.right.shape[1]})"
        )
    return LowRankMatrix(
        np.hstack([x.left, p.left]),
        sla.block_diag(x.core, coeff_core),
        np.hstack([x.right, p.right]),
    )
