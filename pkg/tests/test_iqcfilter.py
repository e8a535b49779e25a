import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_jump
from impiqc import analysis as an
from impiqc.dwell import DwellSpec, sample_sequence
from impiqc.errors import DimensionError
from impiqc.iqcfilter import (augment, auxiliary_impulsive, basis_filter, lift_filter,
                              simulate_filter, static_filter, verify_iqc_empirical)
from impiqc.model import jump_to_feedback
from impiqc.systems import exa1


def shift_register(u, nu):
    """Independent oracle: per channel, the last nu samples then the current one."""
    T, nc = u.shape
    pad = np.vstack([np.zeros((nu, nc)), u])
    return np.array([np.concatenate([pad[t:t + nu + 1, c] for c in range(nc)]) for t in range(T)])


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(0, 2), st.integers(0, 4), st.integers(0, 2**31))
def test_basis_filter_is_a_shift_register(n_z, n_w, nu, seed):
    psi = basis_filter(n_z, n_w, nu)
    nc = n_z + n_w
    assert (psi.n_xi, psi.m) == (nc * nu, nc * (nu + 1))
    if nu:
        assert not np.linalg.matrix_power(psi.A, nu).any()
    u = np.random.default_rng(seed).normal(size=(12, nc))
    y, _ = simulate_filter(psi, u)
    np.testing.assert_allclose(y, shift_register(u, nu), atol=1e-14)


def test_static_filter():
    psi = static_filter(2, 2)
    assert psi.n_xi == 0
    np.testing.assert_array_equal(psi.D, np.eye(4))
    with pytest.raises(ValueError):
        basis_filter(1, 1, -1)


def test_augment_matches_series_simulation(rng):
    f = jump_to_feedback(random_jump(rng, n=2, n_d=1, n_e=1))
    psi = basis_filter(f.n_z, f.n_w, 2)
    aug = augment(f, psi)
    x, xi = rng.normal(size=f.n), np.zeros(psi.n_xi)
    s = np.concatenate([xi, x])
    for _ in range(6):
        w, d = rng.normal(size=f.n_w), rng.normal(size=f.n_d)
        z = f.C_z @ x + f.D_zw @ w + f.D_zd @ d
        xi, y = psi.step(xi, np.concatenate([z, w]))
        e = f.C @ x + f.D_ew @ w + f.D @ d
        x = f.A @ x + f.B_w @ w + f.B @ d
        np.testing.assert_allclose(aug.C_y @ s + aug.D_yw @ w + aug.D_yd @ d, y, atol=1e-12)
        np.testing.assert_allclose(aug.C_e @ s + aug.D_ew @ w + aug.D_ed @ d, e, atol=1e-12)
        s = aug.A @ s + aug.B_w @ w + aug.B_d @ d
        np.testing.assert_allclose(s, np.concatenate([xi, x]), atol=1e-12)


def test_augment_channel_mismatch():
    f = jump_to_feedback(exa1(1.0))
    with pytest.raises(DimensionError):
        augment(f, basis_filter(1, 1, 1))


def test_auxiliary_and_lift(rng):
    psi = basis_filter(1, 1, 2)
    aux = auxiliary_impulsive(psi)
    z = rng.normal(size=(4, 1))
    k = 3
    # oracle: flow feeds (z, 0), the jump feeds (z, z)
    u = np.hstack([z, np.vstack([np.zeros((k, 1)), z[k:]])])
    y, xi_end = simulate_filter(psi, u)
    lf = lift_filter(psi, k)
    v = np.concatenate([np.zeros(psi.n_xi), z.ravel()])
    np.testing.assert_allclose(lf.state @ v, xi_end, atol=1e-13)
    for t in range(k + 1):
        np.testing.assert_allclose(lf.outputs[t] @ v, y[t], atol=1e-13)
    assert lf.outer().shape[0] == 2 * psi.n_xi + (k + 1) * psi.m
    assert aux.n == psi.n_xi
    with pytest.raises(ValueError):
        lift_filter(psi, 0)


def test_certified_multiplier_holds_empirically():
    spec = DwellSpec.rdt(3, 4)
    cert = an.run_test("iqc-lifting", exa1(1.0), spec=spec, nu=1)
    assert cert.feasible
    psi = basis_filter(2, 2, 1)
    seq = sample_sequence(spec, 60, "random", seed=3)
    rep = verify_iqc_empirical(psi, cert.values["M"], cert.values["Z"], seq, trials=30)
    assert rep.passed and rep.checks > 0
    bad = verify_iqc_empirical(psi, -np.eye(psi.m), np.zeros((psi.n_xi, psi.n_xi)), seq, trials=3)
    assert not bad.passed
