import cvxpy as cp
import numpy as np
import pytest

from impiqc import analysis as an
from impiqc import synthesis
from impiqc.dwell import DwellSpec
from impiqc.errors import DwellSpecError, ReconstructionError
from impiqc.model import closed_loop

SPEC = DwellSpec.rdt(4, 5)


def slack_oracle(j, tmin, tmax):
    """Same clock/slack synthesis LMIs written directly in cvxpy."""
    n, tiny = j.n, 1e-7
    K, L = cp.Variable((n, n)), cp.Variable((n, 1))
    M, N = cp.Variable((1, n)), cp.Variable((1, 1))
    g, Delta = cp.Variable(), cp.Variable((n, n))
    X = [cp.Variable((2 * n, 2 * n), symmetric=True) for _ in range(tmax + 1)]
    cons = [x >> tiny * np.eye(2 * n) for x in X]

    def lmi(Xn, Xk, A, B, Cv, Dv, Cy, Dy):
        H, G = cp.Variable((n, n)), cp.Variable((n, n))
        S = G + Delta
        Ab = cp.bmat([[H @ A, H @ A], [G @ A + K + L @ Cy, G @ A + L @ Cy]])
        Bb = cp.bmat([[H @ B], [G @ B + L @ Dy]])
        Cb = cp.hstack([Cv - M - N @ Cy, Cv - N @ Cy])
        Db = Dv - N @ Dy
        Gb = cp.bmat([[H, H], [S, G]])
        z = np.zeros
        F = cp.bmat([[Xn - Gb - Gb.T, Ab, Bb, z((2 * n, 1))],
                     [Ab.T, -Xk, z((2 * n, 1)), Cb.T],
                     [Bb.T, z((1, 2 * n)), -g * np.eye(1), Db.T],
                     [z((1, 2 * n)), Cb, Db, -np.eye(1)]])
        return 0.5 * (F + F.T) << -tiny * np.eye(4 * n + 2)

    flow = (j.A, j.B_d, j.C_v, j.D_vd, j.C_y, j.D_yd)
    jump = (j.A_J, j.B_Jd, j.C_Jv, j.D_Jvd, j.C_Jy, j.D_Jyd)
    cons += [lmi(X[k + 1], X[k], *flow) for k in range(tmax)]
    cons += [lmi(X[0], X[k], *jump) for k in range(tmin, tmax + 1)]
    prob = cp.Problem(cp.Minimize(g), cons)
    prob.solve(solver="CLARABEL")
    return float(np.sqrt(g.value))


def test_slack_matches_cvxpy_oracle(plant):
    res = synthesis.synthesize_slack(plant, SPEC)
    assert res.feasible
    assert res.gamma == pytest.approx(slack_oracle(plant, 4, 5), rel=2e-3)


def test_slack_estimator_is_certified_on_closed_loop(plant):
    res = synthesis.synthesize_slack(plant, SPEC)
    assert res.estimator.order == plant.n
    gamma, cert = an.min_gain("clock", closed_loop(plant, res.estimator), SPEC)
    assert cert.feasible
    assert gamma <= res.estimator_gamma * 1.01


def test_slack_fixed_gamma(plant):
    res = synthesis.synthesize_slack(plant, SPEC)
    assert synthesis.synthesize_slack(plant, SPEC, gamma=res.gamma * 1.05).feasible
    assert synthesis.synthesize_slack(plant, SPEC, gamma=res.gamma * 0.9).status == "infeasible"


def test_iqc_estimator_is_certified_on_closed_loop(plant):
    res = synthesis.synthesize_iqc(plant, SPEC, nu=1)
    assert res.feasible
    assert res.estimator_gamma >= res.gamma
    assert res.estimator.order == plant.n + 2 * (plant.n + plant.n_d)
    cl = closed_loop(plant, res.estimator)
    gamma, cert = an.min_gain("iqc-lifting", cl, SPEC, nu=1)
    assert cert.feasible
    assert gamma <= res.estimator_gamma * 1.01


def test_iqc_bound_non_increasing_in_nu(plant):
    spec = DwellSpec.rdt(9, 10)
    gains = [synthesis.synthesize_iqc(plant, spec, nu=nu, reconstruct=False).gamma for nu in (1, 2)]
    assert gains[1] <= gains[0] + 1e-3


def test_iqc_beats_slack(plant):
    g_iqc = synthesis.synthesize_iqc(plant, SPEC, nu=1, reconstruct=False).gamma
    g_slack = synthesis.synthesize_slack(plant, SPEC).gamma
    assert g_iqc <= g_slack


def test_singular_slack_difference():
    values = {"Delta": np.zeros((2, 2)), "K": np.eye(2), "L": np.zeros((2, 1)),
              "M": np.zeros((1, 2)), "N": np.zeros((1, 1))}
    with pytest.raises(ReconstructionError) as exc:
        synthesis.slack_estimator(values, 2)
    assert exc.value.code == "reconstruction-singular"


def test_bad_inputs(plant):
    with pytest.raises(DwellSpecError):
        synthesis.synthesize_slack(plant, DwellSpec.mdt(3))
    with pytest.raises(TypeError):
        synthesis.synthesize_slack(plant.to_feedback(), SPEC)
