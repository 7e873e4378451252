"""Shared builders for random test equations."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from mteq import LowRankMatrix, MultitermEquation


def random_spd(rng, n, spread=(1.0, 2.0)):
    """Symmetric matrix with eigenvalues drawn uniformly from ``spread``."""
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    lam = rng.uniform(*spread, size=n)
    return (q * lam) @ q.T


def perturbation(rng, n, scale):
    """Random square matrix with spectral norm exactly ``scale``."""
    m = rng.standard_normal((n, n))
    return scale * m / np.linalg.norm(m, 2)


def random_posdef_equation(rng, n_a, n_b, p, q, nonsym=0.15):
    """Random equation whose vectorized operator is positive definite.

    Each coefficient is a dominant symmetric positive definite part plus a
    nonsymmetric perturbation of spectral norm ``nonsym``, which keeps the
    symmetric part of the Kronecker sum positive definite.
    """
    terms = []
    for _ in range(p):
        a = random_spd(rng, n_a) + perturbation(rng, n_a, nonsym)
        b = random_spd(rng, n_b) + perturbation(rng, n_b, nonsym)
        terms.append((sp.csr_matrix(a), sp.csr_matrix(b)))
    c = rng.standard_normal((n_a, q))
    d = rng.standard_normal((n_b, q))
    return MultitermEquation(terms=terms, C=c, D=d)


def random_lowrank(rng, n_rows, n_cols, rank):
    """Random factored matrix of the given width."""
    return LowRankMatrix(
        rng.standard_normal((n_rows, rank)),
        rng.standard_normal((rank, rank)),
        rng.standard_normal((n_cols, rank)),
    )
