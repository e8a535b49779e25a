import numpy as np
import pytest

from conftest import random_jump
from impiqc.errors import DimensionError, NotWellPosedError
from impiqc.model import (Estimator, FeedbackForm, JumpForm, PerfIndex, as_feedback,
                          closed_loop, feedback_to_jump, hold_system, jump_to_feedback, lift)
from impiqc.systems import exa1, exa_syn, hold_loop


def test_jump_feedback_round_trip(rng):
    for _ in range(10):
        j = random_jump(rng, n=3, n_d=2, n_e=2)
        back = feedback_to_jump(jump_to_feedback(j))
        for name in ("A", "B", "C", "D", "A_J", "B_J", "C_J", "D_J"):
            np.testing.assert_allclose(getattr(back, name), getattr(j, name), atol=1e-12)


def test_exa1_channels():
    j = exa1(1.0)
    f = as_feedback(j)
    assert (f.n, f.n_d, f.n_e, f.n_z, f.n_w) == (2, 0, 0, 2, 2)
    np.testing.assert_allclose(feedback_to_jump(f).A_J, [[0, -10], [0.1, 0]])


def test_resolved_loop_matches_hand_computation():
    # scalar loop: w = (1 - D_zw)^-1 (C_z x), x+ = (A + B_w C_z / (1 - D_zw)) x
    f = FeedbackForm(A=[[0.5]], B_w=[[1.0]], B=[[0.0]], C_z=[[2.0]], D_zw=[[0.5]],
                     D_zd=[[0.0]], C=[[1.0]], D_ew=[[1.0]], D=[[0.0]])
    j = feedback_to_jump(f)
    np.testing.assert_allclose(j.A_J, [[0.5 + 4.0]])
    np.testing.assert_allclose(j.C_J, [[1.0 + 4.0]])


def test_not_well_posed():
    f = FeedbackForm(A=[[0.5]], B_w=[[1.0]], B=np.zeros((1, 0)), C_z=[[1.0]], D_zw=[[1.0]],
                     D_zd=np.zeros((1, 0)), C=np.zeros((0, 1)), D_ew=np.zeros((0, 1)),
                     D=np.zeros((0, 0)))
    assert not f.is_well_posed()
    with pytest.raises(NotWellPosedError) as exc:
        feedback_to_jump(f)
    assert exc.value.code == "not-well-posed"


def test_dimension_checks():
    with pytest.raises(DimensionError):
        JumpForm(np.eye(2), np.zeros((3, 1)), np.zeros((1, 2)), np.zeros((1, 1)),
                 np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    with pytest.raises(DimensionError):
        closed_loop(exa_syn(), Estimator.zero(1, 2, 1))


def test_matrices_are_read_only():
    j = exa1(0.5)
    with pytest.raises(ValueError):
        j.A[0, 0] = 1.0


def test_closed_loop_zero_estimator():
    p = exa_syn()
    cl = closed_loop(p, Estimator.zero(1, 1, 1))
    pf = p.to_feedback()
    assert cl.n == p.n + 1
    np.testing.assert_allclose(cl.C, np.hstack([pf.C_v, np.zeros((1, 1))]))
    np.testing.assert_allclose(cl.A[p.n:, p.n:], [[0.0]])


def test_closed_loop_structure(rng):
    p = exa_syn()
    K = rng.normal(size=(3, 3))
    e = Estimator.from_block(K, 2)
    np.testing.assert_array_equal(e.block(), K)
    cl = closed_loop(p, e)
    pf = p.to_feedback()
    np.testing.assert_allclose(cl.C, np.hstack([pf.C_v - e.D_e @ pf.C_y, -e.C_e]))
    np.testing.assert_allclose(cl.A[2:, :2], e.B_e @ pf.C_y)
    np.testing.assert_allclose(cl.A[2:, 2:], e.A_e)


def test_hold_system():
    h = hold_system(2)
    np.testing.assert_array_equal(h.A, np.eye(2))
    np.testing.assert_array_equal(h.B_J, np.eye(2))
    np.testing.assert_array_equal(h.A_J, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        hold_system(0)
    j = hold_loop()
    assert (j.n, j.n_d, j.n_e) == (2, 1, 2)


def test_perf_index():
    P = PerfIndex.gain(4.0, 1, 2)
    np.testing.assert_array_equal(P.matrix, np.diag([1.0, -4.0, -4.0]))
    assert P.is_nonsingular()
    with pytest.raises(ValueError):
        PerfIndex(-np.eye(1), np.zeros((1, 1)), np.eye(1))


def test_lift_matches_recursion(rng):
    steps = [tuple(rng.normal(size=s) for s in ((2, 2), (2, 1), (1, 2), (1, 1))) for _ in range(4)]
    phi, outs = lift(steps)
    x0, d = rng.normal(size=2), rng.normal(size=4)
    v = np.concatenate([x0, d])
    x = x0
    for k, (A, B, C, D) in enumerate(steps):
        np.testing.assert_allclose(outs[k] @ v, C @ x + D @ d[k:k + 1])
        x = A @ x + B @ d[k:k + 1]
    np.testing.assert_allclose(phi @ v, x)
