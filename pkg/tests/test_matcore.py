import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from impiqc.errors import SchurPivotError
from impiqc.matcore import (assert_negdef, assert_posdef, blockdiag, blockmat, kron,
                            nullspace_basis, schur_reduce, symmetrize)
from impiqc.systems import exa_syn

finite = st.floats(-10, 10, allow_nan=False)


def test_kron_examples():
    np.testing.assert_array_equal(kron(np.eye(2), [[5]]), np.diag([5.0, 5.0]))
    np.testing.assert_array_equal(kron([[1], [0]], np.eye(2)),
                                  [[1, 0], [0, 1], [0, 0], [0, 0]])
    P = np.array([[1.0, 2.0], [2.0, 3.0]])
    np.testing.assert_array_equal(kron(np.eye(3), P), blockdiag([P, P, P]))


@settings(max_examples=50, deadline=None)
@given(*(arrays(float, (3, 3), elements=finite) for _ in range(4)))
def test_kron_mixed_product(a, b, c, d):
    lhs = kron(a, b) @ kron(c, d)
    np.testing.assert_allclose(lhs, kron(a @ c, b @ d), atol=1e-8 * (1 + np.abs(lhs).max()))


@settings(max_examples=30, deadline=None)
@given(arrays(float, (2, 2), elements=finite), arrays(float, (2, 2), elements=finite),
       arrays(float, (2, 3), elements=finite), finite)
def test_kron_bilinear(a, a2, b, s):
    np.testing.assert_allclose(kron(a + s * a2, b), kron(a, b) + s * kron(a2, b), atol=1e-9)


def test_blockdiag():
    assert blockdiag([]).shape == (0, 0)
    np.testing.assert_array_equal(blockdiag([np.eye(2), -np.eye(1)]), np.diag([1.0, 1.0, -1.0]))
    assert blockdiag([np.eye(3), np.eye(2)]).shape == (5, 5)


def test_blockmat_with_empty_blocks():
    m = blockmat([[np.eye(2), None], [None, np.zeros((0, 0))]], [2, 0], [2, 0])
    assert m.shape == (2, 2)
    m = blockmat([[np.ones((1, 2)), np.zeros((1, 0))]])
    assert m.shape == (1, 2)


def test_nullspace_examples():
    N = nullspace_basis([[1.0, 0.0]])
    assert N.shape == (2, 1)
    np.testing.assert_allclose(np.abs(N[:, 0]), [0.0, 1.0])
    assert nullspace_basis(np.eye(3)).shape == (3, 0)


def test_nullspace_exa_syn_measurement():
    f = exa_syn().to_feedback()
    m = np.hstack([f.C_y, f.D_yw, f.D_yd])
    N = nullspace_basis(m)
    assert N.shape == (m.shape[1], m.shape[1] - 1)
    assert np.abs(m @ N).max() < 1e-12


@settings(max_examples=50, deadline=None)
@given(arrays(float, (2, 5), elements=finite))
def test_nullspace_properties(m):
    tol = 1e-9
    N = nullspace_basis(m, tol)
    np.testing.assert_allclose(N.T @ N, np.eye(N.shape[1]), atol=1e-10)
    assert np.linalg.norm(m @ N) <= 10 * tol * max(np.linalg.norm(m, 2), 1e-300) + 1e-300


def test_negdef_examples():
    assert assert_negdef(-np.eye(2), 0.5)
    assert not assert_negdef(np.zeros((1, 1)), 0.0)
    assert assert_posdef(np.eye(2), 1.0)
    with pytest.raises(ValueError):
        assert_negdef(-np.eye(2), -1.0)


def test_negdef_random_directions(rng):
    for _ in range(20):
        a = rng.normal(size=(4, 4))
        m = symmetrize(a) - 5 * np.eye(4)
        eps = 0.1
        if not assert_negdef(m, eps):
            continue
        x = rng.normal(size=(4, 200))
        x /= np.linalg.norm(x, axis=0)
        assert np.max(np.einsum("ij,ik,kj->j", x, m, x)) <= -eps + 1e-9


def test_schur_examples():
    a, b = 0.3, 2.0
    np.testing.assert_allclose(schur_reduce([[a, b], [b, -1.0]], 1), [[a + b * b]])
    A = np.diag([1.0, 2.0])
    np.testing.assert_allclose(schur_reduce(blockdiag([A, -np.eye(2)]), 2), A)
    with pytest.raises(SchurPivotError):
        schur_reduce([[1.0, 0.0], [0.0, 0.0]], 1)
    with pytest.raises(SchurPivotError):
        schur_reduce(np.diag([1.0, 1.0, -1.0]), 1)


def test_schur_sign_equivalence(rng):
    for _ in range(100):
        m = symmetrize(rng.normal(size=(6, 6))) - 2.5 * np.eye(6)
        d = m[3:, 3:]
        neg = assert_negdef(m)
        if assert_negdef(d):
            assert neg == assert_negdef(schur_reduce(m, 3))
        else:
            assert not neg
