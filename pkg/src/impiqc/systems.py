"""Example systems and disturbance signals used by the reproduction harness."""

import numpy as np

from .model import JumpEstimationPlant, JumpForm, hold_system

BETA_GRID = np.linspace(0.1, 5.0, 50)
TRACE_HORIZON = 200


def exa1(beta):
    """Autonomous impulsive system with a rotation-like flow and an anti-diagonal jump."""
    A = np.eye(2) + beta / 100.0 * np.array([[-1.0, -1.0], [1.0, -1.0]])
    A_J = np.array([[0.0, -10.0], [0.1, 0.0]])
    z = np.zeros
    return JumpForm(A, z((2, 0)), z((0, 2)), z((0, 0)), A_J, z((2, 0)), z((0, 2)), z((0, 0)))


def exa_syn():
    """Estimation plant whose flow matrix is unstable; only flow samples are measured."""
    return JumpEstimationPlant(
        A=[[0.18, 0.34], [-0.58, 1.08]], B_d=[[-0.02], [-0.01]],
        C_v=[[0.0, 1.0]], D_vd=[[0.0]], C_y=[[1.0, 0.0]], D_yd=[[0.0]],
        A_J=[[0.47, 0.41], [-0.01, -0.02]], B_Jd=[[0.0], [1.32]],
        C_Jv=[[0.0, 1.0]], D_Jvd=[[0.0]], C_Jy=[[0.0, 0.0]], D_Jyd=[[0.0]])


def random_jump(rng, n=2, n_d=1, n_e=1, rho=0.9, rho_j=None):
    """Random flow/jump system with spectral radii ``rho`` (flow) and ``rho_j`` (jump)."""
    def scaled(m, r):
        cur = max(abs(np.linalg.eigvals(m)))
        return m * (r / cur) if cur > 0 else m

    rho_j = rho if rho_j is None else rho_j
    A = scaled(rng.normal(size=(n, n)), rho)
    A_J = scaled(rng.normal(size=(n, n)), rho_j)
    return JumpForm(A, rng.normal(size=(n, n_d)), rng.normal(size=(n_e, n)),
                    0.1 * rng.normal(size=(n_e, n_d)),
                    A_J, rng.normal(size=(n, n_d)), rng.normal(size=(n_e, n)),
                    0.1 * rng.normal(size=(n_e, n_d)))


def d1(t):
    if 0 <= t <= 60:
        return 4.0
    if 60 < t <= TRACE_HORIZON:
        return -2.0
    return 0.0


def d2(t):
    if 0 <= t <= 60:
        return -2.0 * np.cos(t / 2.0)
    if 60 < t <= TRACE_HORIZON:
        return 3.0 * np.sin(t / 4.0)
    return 0.0


def hold_loop(a=1.0, b=1.0, k=0.3, w_u=0.1):
    """Scalar plant under static output feedback through a sample-and-hold.

    Plant x+ = a x + b u + d with measured output x; the controller sees the
    held sample and applies u = -k * held.  Performance output (x, w_u * u).
    State is (x, held sample); this stands in for a tracking loop whose
    controller is not available.
    """
    h = hold_system(1)
    # held value: flow output h.C @ x_v, jump output h.D_J @ x
    A = np.array([[a, -b * k * h.C[0, 0]], [0.0, h.A[0, 0]]])
    A_J = np.array([[a - b * k * h.D_J[0, 0], 0.0], [h.B_J[0, 0], h.A_J[0, 0]]])
    B = np.array([[1.0], [0.0]])
    C = np.array([[1.0, 0.0], [0.0, -w_u * k]])
    C_J = np.array([[1.0, 0.0], [-w_u * k, 0.0]])
    D = np.zeros((2, 1))
    return JumpForm(A, B, C, D, A_J, B, C_J, D)
