"""Operator application and factored residuals against the Kronecker oracle."""

import numpy as np
import pytest
import scipy.sparse as sp

from mteq import (
    LowRankMatrix,
    MultitermEquation,
    ShapeError,
    apply_L,
    apply_Lstar,
    residual_factored,
)
from mteq.oracle import assemble_kron, direct_solve

from conftest import random_lowrank, random_posdef_equation


def identity_equation(n, q=2, seed=0):
    rng = np.random.default_rng(seed)
    eye = sp.identity(n, format="csr")
    return MultitermEquation(
        terms=[(eye, eye)],
        C=rng.standard_normal((n, q)),
        D=rng.standard_normal((n, q)),
    )


def test_equation_validation():
    rng = np.random.default_rng(0)
    eye = sp.identity(4, format="csr")
    with pytest.raises(ValueError):
        MultitermEquation(terms=[], C=rng.standard_normal((4, 1)),
                          D=rng.standard_normal((4, 1)))
    with pytest.raises(ShapeError):
        MultitermEquation(
            terms=[(eye, sp.identity(5, format="csr")), (eye, eye)],
            C=rng.standard_normal((4, 1)),
            D=rng.standard_normal((4, 1)),
        )
    with pytest.raises(ShapeError):
        MultitermEquation(terms=[(eye, eye)], C=rng.standard_normal((4, 1)),
                          D=rng.standard_normal((4, 2)))


def test_identity_operator_application():
    eq = identity_equation(10)
    rng = np.random.default_rng(1)
    x = random_lowrank(rng, 10, 10, 3)
    np.testing.assert_allclose(apply_L(eq, x).densify(), x.densify(), atol=1e-12)


def test_apply_L_matches_kronecker_oracle():
    rng = np.random.default_rng(2)
    eq = random_posdef_equation(rng, 20, 20, 2, 2)
    sys = assemble_kron(eq)
    x = random_lowrank(rng, 20, 20, 3)
    vec = sys.matrix @ x.densify().flatten(order="F")
    got = apply_L(eq, x).densify().flatten(order="F")
    np.testing.assert_allclose(got, vec, atol=1e-12)


def test_apply_L_zero_operand():
    eq = identity_equation(8)
    out = apply_L(eq, LowRankMatrix.zeros(8, 8))
    assert out.is_zero


def test_apply_L_linearity():
    rng = np.random.default_rng(3)
    eq = random_posdef_equation(rng, 12, 9, 3, 2)
    x = random_lowrank(rng, 12, 9, 2)
    y = random_lowrank(rng, 12, 9, 2)
    a, b = 0.7, -1.3
    combo = LowRankMatrix.from_dense(a * x.densify() + b * y.densify())
    lhs = apply_L(eq, combo).densify()
    rhs = a * apply_L(eq, x).densify() + b * apply_L(eq, y).densify()
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_apply_L_rank_growth_factor_p():
    rng = np.random.default_rng(4)
    eq = random_posdef_equation(rng, 10, 10, 3, 1)
    x = random_lowrank(rng, 10, 10, 2)
    out = apply_L(eq, x)
    assert out.left.shape[1] == eq.p * 2
    assert out.right.shape[1] == eq.p * 2


def test_adjoint_on_symmetric_terms_equals_forward():
    rng = np.random.default_rng(5)
    terms = []
    for _ in range(2):
        a = rng.standard_normal((9, 9))
        b = rng.standard_normal((9, 9))
        terms.append((sp.csr_matrix(a + a.T), sp.csr_matrix(b + b.T)))
    eq = MultitermEquation(terms=terms, C=rng.standard_normal((9, 1)),
                           D=rng.standard_normal((9, 1)))
    x = random_lowrank(rng, 9, 9, 2)
    np.testing.assert_allclose(
        apply_Lstar(eq, x).densify(), apply_L(eq, x).densify(), atol=1e-12
    )


def test_adjoint_identity_in_frobenius_inner_product():
    rng = np.random.default_rng(6)
    eq = random_posdef_equation(rng, 15, 15, 2, 2)
    x = random_lowrank(rng, 15, 15, 3)
    y = random_lowrank(rng, 15, 15, 3)
    lhs = np.sum(apply_L(eq, x).densify() * y.densify())
    rhs = np.sum(x.densify() * apply_Lstar(eq, y).densify())
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_adjoint_zero_operand():
    eq = identity_equation(6)
    assert apply_Lstar(eq, LowRankMatrix.zeros(6, 6)).is_zero


def test_residual_at_zero_guess_is_rhs():
    eq = identity_equation(7, q=2)
    r = residual_factored(eq, LowRankMatrix.zeros(7, 7))
    np.testing.assert_allclose(r.left, eq.C)
    np.testing.assert_allclose(r.right, eq.D)
    np.testing.assert_allclose(r.core, np.eye(2))


def test_residual_vanishes_at_exact_solution():
    rng = np.random.default_rng(7)
    eq = random_posdef_equation(rng, 12, 10, 2, 2)
    sys = assemble_kron(eq)
    x = LowRankMatrix.from_dense(direct_solve(sys))
    r = residual_factored(eq, x)
    assert r.norm_fro() <= 1e-10 * eq.rhs_norm()


def test_residual_matches_dense_evaluation():
    rng = np.random.default_rng(8)
    eq = random_posdef_equation(rng, 20, 20, 3, 2)
    x = random_lowrank(rng, 20, 20, 4)
    expected = eq.C @ eq.D.T - apply_L(eq, x).densify()
    np.testing.assert_allclose(
        residual_factored(eq, x).densify(), expected, atol=1e-12
    )


def test_rhs_norm_matches_dense():
    rng = np.random.default_rng(9)
    eq = random_posdef_equation(rng, 14, 11, 2, 2)
    assert eq.rhs_norm() == pytest.approx(
        np.linalg.norm(eq.C @ eq.D.T), rel=1e-12
    )


def test_shape_mismatch_raises():
    eq = identity_equation(9)
    rng = np.random.default_rng(10)
    with pytest.raises(ShapeError):
        apply_L(eq, random_lowrank(rng, 9, 8, 2))
