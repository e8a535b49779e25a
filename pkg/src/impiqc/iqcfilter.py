"""IQC outer filters for the impulsive operator.

The basis filter stacks, per channel of ``u = (z, w)``, the current value and
the last ``nu`` values.  Channels are the slow index and taps the fast index,
so ``y = (u_1(t-nu), ..., u_1(t), u_2(t-nu), ..., u_2(t), ...)``.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError
from .matcore import as_mat, blockmat, kron
from .model import JumpForm, lift


@dataclass(frozen=True, eq=False)
class FilterPsi:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n_z: int
    n_w: int
    nu: int | None = None

    def __post_init__(self):
        nxi = np.asarray(self.A).shape[0] if np.asarray(self.A).size else np.asarray(self.B).shape[0]
        nu_in = self.n_z + self.n_w
        m = np.asarray(self.D).shape[0]
        object.__setattr__(self, "A", as_mat(self.A, nxi, nxi))
        object.__setattr__(self, "B", as_mat(self.B, nxi, nu_in))
        object.__setattr__(self, "C", as_mat(self.C, m, nxi))
        object.__setattr__(self, "D", as_mat(self.D, m, nu_in))
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                v.setflags(write=False)

    @property
    def n_xi(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.D.shape[0]

    def step(self, xi, u):
        return self.A @ xi + self.B @ u, self.C @ xi + self.D @ u


@dataclass(frozen=True, eq=False)
class AugmentedSystem:
    """Plant and filter in series; state (xi, x), inputs (w, d), outputs (y, e)."""

    A: np.ndarray
    B_w: np.ndarray
    B_d: np.ndarray
    C_y: np.ndarray
    D_yw: np.ndarray
    D_yd: np.ndarray
    C_e: np.ndarray
    D_ew: np.ndarray
    D_ed: np.ndarray
    n_xi: int

    @property
    def n(self):
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class LiftedFilter:
    """Filter driven through k flow steps and one jump, from (xi_0, z_0..z_k)."""

    state: np.ndarray
    outputs: list

    def outer(self):
        nxi = self.state.shape[0]
        init = np.hstack([np.eye(nxi), np.zeros((nxi, self.state.shape[1] - nxi))])
        return np.vstack([self.state, init] + list(self.outputs))


def basis_filter(n_z, n_w, nu):
    if nu < 0:
        raise ValueError("nu must be >= 0")
    nc = n_z + n_w
    J = np.eye(nu, k=1)
    e_nu = np.zeros((nu, 1))
    if nu:
        e_nu[-1, 0] = 1.0
    C_nu = np.vstack([np.eye(nu), np.zeros((1, nu))])
    e_last = np.zeros((nu + 1, 1))
    e_last[-1, 0] = 1.0
    I = np.eye(nc)
    return FilterPsi(
        A=kron(I, J).reshape(nc * nu, nc * nu),
        B=kron(I, e_nu).reshape(nc * nu, nc),
        C=kron(I, C_nu).reshape(nc * (nu + 1), nc * nu),
        D=kron(I, e_last),
        n_z=n_z, n_w=n_w, nu=nu)


def static_filter(n_z, n_w):
    return basis_filter(n_z, n_w, 0)


def _check_channels(f, psi):
    if (psi.n_z, psi.n_w) != (f.n_z, f.n_w):
        raise DimensionError(
            f"filter channels ({psi.n_z}, {psi.n_w}) do not match system ({f.n_z}, {f.n_w})")


def augment(f, psi):
    """Series connection of ``f`` (feedback form) with the filter on u = (z, w)."""
    _check_channels(f, psi)
    nxi, n = psi.n_xi, f.n
    n_w, n_d = f.n_w, f.n_d
    # u = Cu x + Du_w w + Du_d d
    Cu = np.vstack([f.C_z, np.zeros((n_w, n))])
    Duw = np.vstack([f.D_zw, np.eye(n_w)])
    Dud = np.vstack([f.D_zd, np.zeros((n_w, n_d))])
    A = blockmat([[psi.A, psi.B @ Cu], [None, f.A]], [nxi, n], [nxi, n])
    return AugmentedSystem(
        A=A,
        B_w=np.vstack([psi.B @ Duw, f.B_w]),
        B_d=np.vstack([psi.B @ Dud, f.B]),
        C_y=np.hstack([psi.C, psi.D @ Cu]),
        D_yw=psi.D @ Duw,
        D_yd=psi.D @ Dud,
        C_e=np.hstack([np.zeros((f.n_e, nxi)), f.C]),
        D_ew=f.D_ew,
        D_ed=f.D,
        n_xi=nxi)


def _selectors(n):
    flow = np.vstack([np.eye(n), np.zeros((n, n))])
    jump = np.vstack([np.eye(n), np.eye(n)])
    return flow, jump


def auxiliary_impulsive(psi):
    """Filter fed by (z, Delta(z)) as an impulsive system with input z and output y."""
    if psi.n_z != psi.n_w:
        raise DimensionError("auxiliary system needs n_z == n_w")
    fl, ju = _selectors(psi.n_z)
    return JumpForm(psi.A, psi.B @ fl, psi.C, psi.D @ fl,
                    psi.A, psi.B @ ju, psi.C, psi.D @ ju)


def lift_filter(psi, k):
    """Lifted auxiliary filter over k flow steps followed by one jump."""
    if k < 1:
        raise ValueError("k must be >= 1")
    aux = auxiliary_impulsive(psi)
    state, outs = lift([aux.flow()] * k + [aux.jump()])
    return LiftedFilter(state, outs)


def simulate_filter(psi, u):
    """Filter output for input samples ``u`` (rows are time), from xi(0) = 0."""
    xi = np.zeros(psi.n_xi)
    ys = []
    for ut in np.atleast_2d(u):
        xi, y = psi.step(xi, ut)
        ys.append(y)
    return np.array(ys), xi


@dataclass
class IqcReport:
    min_lhs: float
    checks: int
    trials: int

    @property
    def passed(self):
        return self.min_lhs >= -1e-7


def verify_iqc_empirical(psi, M, Z, seq, trials=100, seed=0):
    """Evaluate the IQC left-hand side at every impulse instant.

    ``Z`` is either one matrix (lifting multipliers) or the list Z_0..Z_T of a
    clock multiplier, in which case Z_0 is used at the impulse instants.
    Inputs z are i.i.d. uniform on [-1, 1].
    """
    M = np.asarray(M, dtype=float)
    if isinstance(Z, (list, tuple)):
        Z = Z[0]
    Z = np.asarray(Z, dtype=float).reshape(psi.n_xi, psi.n_xi)
    if M.shape != (psi.m, psi.m):
        raise DimensionError(f"M has shape {M.shape}, expected {(psi.m, psi.m)}")
    aux = auxiliary_impulsive(psi)
    flags = seq.flags()
    rng = np.random.default_rng(seed)
    worst = np.inf
    checks = 0
    for _ in range(trials):
        z = rng.uniform(-1.0, 1.0, size=(seq.horizon + 1, psi.n_z))
        xi = np.zeros(psi.n_xi)
        acc = 0.0
        for t in range(seq.horizon + 1):
            A, B, C, D = aux.jump() if flags[t] else aux.flow()
            y = C @ xi + D @ z[t]
            acc += float(y @ M @ y)
            xi = A @ xi + B @ z[t]
            if flags[t]:
                worst = min(worst, float(xi @ Z @ xi) + acc)
                checks += 1
    if checks == 0:
        worst = 0.0
    return IqcReport(float(worst), checks, trials)

