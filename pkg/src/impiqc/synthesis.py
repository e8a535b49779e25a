"""Synthesis of non-impulsive LTI estimators for impulsive plants.

Two routes:

* ``synthesize_iqc`` - elimination-based LMIs on the filtered plant with a
  lifted IQC multiplier, followed by a second LMI solve for the estimator
  matrices (``reconstruct_estimator``);
* ``synthesize_slack`` - clock LMIs with structured slack variables; the
  estimator follows from an explicit formula.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .analysis import _pad_z, iqc_lifting_lmis, main_lmi
from .dwell import DwellSpec
from .errors import DimensionError, DwellSpecError, ReconstructionError
from .iqcfilter import augment, basis_filter
from .matcore import blockmat, nullspace_basis
from .model import Estimator, EstimationPlant, FeedbackForm, JumpEstimationPlant
from .sdp import FEAS_RADIUS, LmiProgram, bdiag, bmat, minimize_gain, scal, solve

ROUTES = ("iqc", "slack")
BACKOFF = (1e-3, 1e-2)


@dataclass
class SynthesisResult:
    route: str
    status: str
    gamma: float = float("nan")
    estimator: Estimator | None = None
    values: dict = field(default_factory=dict)
    spec: DwellSpec | None = None
    nu: int | None = None
    solve_time: float = 0.0
    message: str = ""
    estimator_gamma: float = float("nan")

    @property
    def feasible(self):
        return self.status == "feasible"


def _ranged(spec):
    if spec is None or spec.kind not in ("EDT", "RDT"):
        raise DwellSpecError(f"estimator synthesis needs an EDT/RDT spec, got {spec}")
    return spec.ranged()


def _as_estimation_plant(p):
    if isinstance(p, JumpEstimationPlant):
        return p.to_feedback()
    if isinstance(p, EstimationPlant):
        return p
    raise TypeError(f"expected an estimation plant, got {type(p).__name__}")


def _v_form(p):
    """Plant with the to-be-estimated output v as performance output."""
    return FeedbackForm(p.A, p.B_w, p.B_d, p.C_z, p.D_zw, p.D_zd, p.C_v, p.D_vw, p.D_vd)


def _no_output_form(p):
    z = np.zeros
    return FeedbackForm(p.A, p.B_w, p.B_d, p.C_z, p.D_zw, p.D_zd,
                        z((0, p.n)), z((0, p.n_w)), z((0, p.n_d)))


def _annihilator(p, n_xi):
    Vt = nullspace_basis(np.hstack([p.C_y, p.D_yw, p.D_yd]))
    return blockmat([[np.eye(n_xi), None], [None, Vt]],
                    [n_xi, Vt.shape[0]], [n_xi, Vt.shape[1]])


def iqc_synthesis_program(p, spec, nu, gamma=None):
    """LMIs in (X, Y, Z, M, g) whose feasibility is equivalent to an estimator.

    Returns ``(prog, g, psi)``; ``g`` is a decision variable or, with
    ``gamma`` given, the fixed number ``gamma**2``.
    """
    p = _as_estimation_plant(p)
    if p.n_z != p.n_w:
        raise DimensionError("synthesis needs n_z == n_w")
    tmin, tmax = _ranged(spec)
    psi = basis_filter(p.n_z, p.n_w, nu)
    aug_v = augment(_v_form(p), psi)
    aug_0 = augment(_no_output_form(p), psi)
    N = aug_v.n
    V = _annihilator(p, psi.n_xi)

    prog = LmiProgram()
    X, Y = prog.sym("X", N), prog.sym("Y", N)
    Z, M = prog.sym("Z", psi.n_xi), prog.sym("M", psi.m)
    g = prog.scalar("g") if gamma is None else float(gamma) ** 2
    Xt, Yt = X - _pad_z(Z, p.n), Y - _pad_z(Z, p.n)
    prog.add(bmat([[Xt, Yt], [Yt, Yt]]), "strict-pos", "coupling")
    Pg = bdiag([np.eye(p.n_v), scal(g, -np.eye(p.n_d))])
    prog.add(V.T @ main_lmi(aug_v, X, M, Pg) @ V, "strict-neg", "primal")
    prog.add(main_lmi(aug_0, Y, M, scal(g, -np.eye(p.n_d))), "strict-neg", "dual")
    for label, kind, expr in iqc_lifting_lmis(psi, Z, M, tmin, tmax, False):
        prog.add(expr, kind, label)
    return prog, g, psi


def _closed_loop_factors(p, psi):
    """Outer factor ``W + U K V`` of the closed-loop IQC inequality.

    Rows are grouped as (next state, error) and the rest; columns are
    (xi, x, x_e, w, d) with an estimator of order ``n_xi + n``.
    """
    aug = augment(_v_form(p), psi)
    N, n_w, n_d = aug.n, p.n_w, p.n_d
    n_v, n_y = p.n_v, p.n_y
    z = np.zeros
    cols = [N, N, n_w, n_d]
    C_y = np.hstack([z((n_y, psi.n_xi)), p.C_y])
    W_next = blockmat([[aug.A, None, aug.B_w, aug.B_d], [None, None, None, None]], [N, N], cols)
    W_err = blockmat([[aug.C_e, None, aug.D_ew, aug.D_ed]], [n_v], cols)
    W_rest = blockmat([[np.eye(N), None, None, None],
                       [None, np.eye(N), None, None],
                       [aug.C_y, None, aug.D_yw, aug.D_yd],
                       [None, None, None, np.eye(n_d)]],
                      [N, N, psi.m, n_d], cols)
    U_next = blockmat([[None, None], [np.eye(N), None]], [N, N], [N, n_v])
    U_err = np.hstack([z((n_v, N)), -np.eye(n_v)])
    Vk = blockmat([[None, np.eye(N), None, None], [C_y, None, p.D_yw, p.D_yd]], [N, n_y], cols)
    return W_next, W_err, W_rest, U_next, U_err, Vk


def reconstruct_estimator(p, psi, X, Y, Z, M, gamma, eps=None, backend=None):
    """Estimator of order ``n_xi + n`` from a feasible point of the synthesis LMIs.

    The closed-loop Lyapunov matrix is [[X, Y-X], [Y-X, X-Y]].  Completing
    the square in its estimator-state block leaves Y on the plant rows and
    X-Y (positive definite by the coupling LMI) on a term that is affine in
    the estimator block, so one Schur complement gives an LMI in K.
    """
    p = _as_estimation_plant(p)
    X, Y, M = (np.asarray(a, dtype=float) for a in (X, Y, M))
    N = X.shape[0]
    Xcl = np.block([[X, Y - X], [Y - X, X - Y]])
    W_next, W_err, W_rest, U_next, U_err, Vk = _closed_loop_factors(p, psi)
    n_d, n_v, n_y = p.n_d, p.n_v, p.n_y
    F1 = W_next[:N]
    R = W_rest.T @ bdiag([-Xcl, M, -float(gamma) ** 2 * np.eye(n_d)]) @ W_rest + F1.T @ Y @ F1

    prog = LmiProgram()
    K = prog.full("K", N + n_v, N + n_y)
    F2 = W_next[N:] + U_next[N:] @ K @ Vk
    Gx = (X - Y) @ (F2 - F1)
    F_err = W_err + U_err @ K @ Vk
    big = bmat([[R, Gx.T, F_err.T],
                [Gx, -(X - Y), None],
                [F_err, None, -np.eye(n_v)]],
               [R.shape[0], N, n_v], [R.shape[0], N, n_v])
    prog.add(big, "strict-neg", "closed-loop")
    res = solve(prog, eps, backend)
    if not res.feasible:
        raise ReconstructionError(f"estimator LMI {res.status}: {res.message}")
    return Estimator.from_block(res.values["K"], N)


def synthesize_iqc(p, spec, nu=1, gamma=None, eps=None, backend=None, reconstruct=True):
    """Estimator via the IQC/elimination route.

    With ``gamma=None`` the bound is minimized and reported as ``gamma``; the
    estimator is then built at a slightly backed-off level (reported as
    ``estimator_gamma``) so that the estimator LMI has room.  Otherwise
    feasibility at the given ``gamma`` is decided.  ``reconstruct=False``
    skips the estimator and only returns the bound.
    """
    start = time.perf_counter()
    g_opt = None
    if gamma is None:
        prog, g, psi = iqc_synthesis_program(p, spec, nu)
        g_opt, res = minimize_gain(prog, g, eps, backend)
        if not res.feasible:
            return SynthesisResult("iqc", res.status, spec=spec, nu=nu,
                                   solve_time=time.perf_counter() - start, message=res.message)
        if not reconstruct:
            return SynthesisResult("iqc", "feasible", g_opt, None, dict(res.values, g=g_opt ** 2),
                                   spec, nu, time.perf_counter() - start, res.message)
        targets = [g_opt * (1 + d) for d in BACKOFF]
    else:
        targets = [float(gamma)]
    last = None
    for gam in targets:
        prog, _, psi = iqc_synthesis_program(p, spec, nu, gamma=gam)
        res = solve(prog, eps, backend)
        last = res
        if not res.feasible:
            continue
        v = res.values
        if not reconstruct:
            return SynthesisResult("iqc", "feasible", gam, None, dict(v, g=gam ** 2), spec, nu,
                                   time.perf_counter() - start, res.message)
        try:
            est = reconstruct_estimator(p, psi, v["X"], v["Y"], v["Z"], v["M"], gam, eps, backend)
        except ReconstructionError as exc:
            last.message = str(exc)
            continue
        return SynthesisResult("iqc", "feasible", gam if g_opt is None else g_opt, est,
                               dict(v, g=gam ** 2), spec, nu, time.perf_counter() - start,
                               res.message, estimator_gamma=gam)
    status = "infeasible" if (gamma is not None and last.status == "infeasible") else "inaccurate"
    return SynthesisResult("iqc", status, spec=spec, nu=nu,
                           solve_time=time.perf_counter() - start, message=last.message)


def _slack_step(Xn, Xc, H, G, S, K, L, Mv, N, g, mats):
    A, B, C_v, D_v, C_y, D_y = mats
    n, n_d, n_v = A.shape[0], B.shape[1], C_v.shape[0]
    HA, GA = H @ A, G @ A
    A_k = bmat([[HA, HA], [GA + K + L @ C_y, GA + L @ C_y]])
    B_k = bmat([[H @ B], [G @ B + L @ D_y]])
    C_k = bmat([[C_v - Mv - N @ C_y, C_v - N @ C_y]])
    D_k = D_v - N @ D_y
    Gb = bmat([[H, H], [S, G]])
    sizes = [2 * n, 2 * n, n_d, n_v]
    return bmat([[Xn - Gb - Gb.T, A_k, B_k, None],
                 [A_k.T, -Xc, None, C_k.T],
                 [B_k.T, None, scal(g, -np.eye(n_d)), D_k.T],
                 [None, C_k, D_k, -np.eye(n_v)]], sizes, sizes)


def slack_synthesis_program(j, spec, gamma=None):
    """Clock/slack synthesis LMIs; S_k = G_k + Delta with one common Delta."""
    if not isinstance(j, JumpEstimationPlant):
        raise TypeError("slack synthesis needs a JumpEstimationPlant")
    tmin, tmax = _ranged(spec)
    n, n_v, n_y = j.n, j.n_v, j.n_y
    prog = LmiProgram()
    X = [prog.sym(f"X{k}", 2 * n) for k in range(tmax + 1)]
    G = {k: prog.full(f"G{k}", n, n) for k in range(tmax)}
    H = {k: prog.full(f"H{k}", n, n) for k in range(tmax)}
    GJ = {k: prog.full(f"GJ{k}", n, n) for k in range(tmin, tmax + 1)}
    HJ = {k: prog.full(f"HJ{k}", n, n) for k in range(tmin, tmax + 1)}
    Delta = prog.full("Delta", n, n)
    K, L = prog.full("K", n, n), prog.full("L", n, n_y)
    Mv, N = prog.full("M", n_v, n), prog.full("N", n_v, n_y)
    g = prog.scalar("g") if gamma is None else float(gamma) ** 2
    flow = (j.A, j.B_d, j.C_v, j.D_vd, j.C_y, j.D_yd)
    jump = (j.A_J, j.B_Jd, j.C_Jv, j.D_Jvd, j.C_Jy, j.D_Jyd)
    for k in range(tmax + 1):
        prog.add(X[k], "strict-pos", f"X{k}>0")
    for k in range(tmax):
        prog.add(_slack_step(X[k + 1], X[k], H[k], G[k], G[k] + Delta, K, L, Mv, N, g, flow),
                 "strict-neg", f"flow[{k}]")
    for k in range(tmin, tmax + 1):
        prog.add(_slack_step(X[0], X[k], HJ[k], GJ[k], GJ[k] + Delta, K, L, Mv, N, g, jump),
                 "strict-neg", f"jump[{k}]")
    return prog, g


def slack_estimator(values, n):
    """Explicit estimator diag(Delta, I)^-1 [[K, L], [M, N]]."""
    D = np.asarray(values["Delta"], dtype=float)
    if np.linalg.cond(D) > 1e10:
        raise ReconstructionError("slack difference S_k - G_k is singular", code="reconstruction-singular")
    Di = np.linalg.inv(D)
    return Estimator(Di @ values["K"], Di @ values["L"], values["M"], values["N"])


def synthesize_slack(j, spec, gamma=None, eps=None, backend=None):
    """Estimator of order n via the clock/slack route."""
    start = time.perf_counter()
    prog, g = slack_synthesis_program(j, spec, gamma)
    if gamma is None:
        gam, res = minimize_gain(prog, g, eps, backend)
    else:
        res = solve(prog, eps, backend, radius=FEAS_RADIUS)
        gam = float(gamma)
    elapsed = time.perf_counter() - start
    if not res.feasible:
        return SynthesisResult("slack", res.status, spec=spec, solve_time=elapsed, message=res.message)
    est = slack_estimator(res.values, j.n)
    values = dict(res.values, g=gam ** 2)
    return SynthesisResult("slack", "feasible", gam, est, values, spec, None, elapsed, res.message,
                           estimator_gamma=gam)
