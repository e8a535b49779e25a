"""System descriptions for discrete-time impulsive systems.

Two descriptions are used:

* :class:`FeedbackForm` - an LTI system in feedback with the impulsive operator
  ``w(t) = z(t)`` at impulse instants and ``w(t) = 0`` otherwise.  This is the
  canonical form used by the IQC machinery.
* :class:`JumpForm` - separate flow and jump matrices, the classical
  description of an impulsive system.

Estimation problems have their own plant types, :class:`EstimationPlant`
(feedback form with ``v``/``y`` channels) and :class:`JumpEstimationPlant`
(flow/jump form), plus the LTI :class:`Estimator`.
"""

from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, NotWellPosedError
from .matcore import as_mat, blockmat, lambda_min, symmetrize

WELL_POSED_RCOND = 1e-12


def _freeze(obj):
    for f in fields(obj):
        v = getattr(obj, f.name)
        if isinstance(v, np.ndarray):
            v.setflags(write=False)


def _check(name, m, rows, cols):
    if m.shape != (rows, cols):
        raise DimensionError(f"{name} has shape {m.shape}, expected {(rows, cols)}")


@dataclass(frozen=True, eq=False)
class FeedbackForm:
    A: np.ndarray
    B_w: np.ndarray
    B: np.ndarray
    C_z: np.ndarray
    D_zw: np.ndarray
    D_zd: np.ndarray
    C: np.ndarray
    D_ew: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, as_mat(getattr(self, f.name)))
        n = self.A.shape[0]
        n_w = self.B_w.shape[1]
        n_d = self.B.shape[1]
        n_z = self.C_z.shape[0]
        n_e = self.C.shape[0]
        _check("A", self.A, n, n)
        _check("B_w", self.B_w, n, n_w)
        _check("B", self.B, n, n_d)
        _check("C_z", self.C_z, n_z, n)
        _check("D_zw", self.D_zw, n_z, n_w)
        _check("D_zd", self.D_zd, n_z, n_d)
        _check("C", self.C, n_e, n)
        _check("D_ew", self.D_ew, n_e, n_w)
        _check("D", self.D, n_e, n_d)
        _freeze(self)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_w(self):
        return self.B_w.shape[1]

    @property
    def n_z(self):
        return self.C_z.shape[0]

    @property
    def n_d(self):
        return self.B.shape[1]

    @property
    def n_e(self):
        return self.C.shape[0]

    def well_posedness_rcond(self):
        """Reciprocal condition number of ``I - D_zw`` (1.0 when there is no loop)."""
        if self.n_z != self.n_w:
            raise DimensionError("impulsive loop needs n_z == n_w")
        if self.n_z == 0:
            return 1.0
        return 1.0 / np.linalg.cond(np.eye(self.n_z) - self.D_zw)

    def is_well_posed(self):
        return self.well_posedness_rcond() >= WELL_POSED_RCOND

    def scaled_output(self, s):
        return FeedbackForm(self.A, self.B_w, self.B, self.C_z, self.D_zw, self.D_zd,
                            s * self.C, s * self.D_ew, s * self.D)

    def stability_part(self):
        """Same loop with the performance channels d and e removed."""
        n = self.n
        return FeedbackForm(self.A, self.B_w, np.zeros((n, 0)), self.C_z, self.D_zw,
                            np.zeros((self.n_z, 0)), np.zeros((0, n)),
                            np.zeros((0, self.n_w)), np.zeros((0, 0)))


@dataclass(frozen=True, eq=False)
class JumpForm:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    A_J: np.ndarray
    B_J: np.ndarray
    C_J: np.ndarray
    D_J: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, as_mat(getattr(self, f.name)))
        n = self.A.shape[0]
        n_d = self.B.shape[1]
        n_e = self.C.shape[0]
        for name in ("A", "A_J"):
            _check(name, getattr(self, name), n, n)
        for name in ("B", "B_J"):
            _check(name, getattr(self, name), n, n_d)
        for name in ("C", "C_J"):
            _check(name, getattr(self, name), n_e, n)
        for name in ("D", "D_J"):
            _check(name, getattr(self, name), n_e, n_d)
        _freeze(self)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_d(self):
        return self.B.shape[1]

    @property
    def n_e(self):
        return self.C.shape[0]

    def flow(self):
        return self.A, self.B, self.C, self.D

    def jump(self):
        return self.A_J, self.B_J, self.C_J, self.D_J

    def scaled_output(self, s):
        return JumpForm(self.A, self.B, s * self.C, s * self.D,
                        self.A_J, self.B_J, s * self.C_J, s * self.D_J)

    def stability_part(self):
        n = self.n
        z = np.zeros
        return JumpForm(self.A, z((n, 0)), z((0, n)), z((0, 0)),
                        self.A_J, z((n, 0)), z((0, n)), z((0, 0)))


@dataclass(frozen=True, eq=False)
class EstimationPlant:
    A: np.ndarray
    B_w: np.ndarray
    B_d: np.ndarray
    C_z: np.ndarray
    D_zw: np.ndarray
    D_zd: np.ndarray
    C_v: np.ndarray
    D_vw: np.ndarray
    D_vd: np.ndarray
    C_y: np.ndarray
    D_yw: np.ndarray
    D_yd: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, as_mat(getattr(self, f.name)))
        n = self.A.shape[0]
        n_w, n_d = self.B_w.shape[1], self.B_d.shape[1]
        _check("A", self.A, n, n)
        _check("B_w", self.B_w, n, n_w)
        _check("B_d", self.B_d, n, n_d)
        for o in ("z", "v", "y"):
            rows = getattr(self, f"C_{o}").shape[0]
            _check(f"C_{o}", getattr(self, f"C_{o}"), rows, n)
            _check(f"D_{o}w", getattr(self, f"D_{o}w"), rows, n_w)
            _check(f"D_{o}d", getattr(self, f"D_{o}d"), rows, n_d)
        _freeze(self)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_w(self):
        return self.B_w.shape[1]

    @property
    def n_z(self):
        return self.C_z.shape[0]

    @property
    def n_d(self):
        return self.B_d.shape[1]

    @property
    def n_v(self):
        return self.C_v.shape[0]

    @property
    def n_y(self):
        return self.C_y.shape[0]


@dataclass(frozen=True, eq=False)
class JumpEstimationPlant:
    """Estimation plant with separate flow and jump matrices for x, v and y."""

    A: np.ndarray
    B_d: np.ndarray
    C_v: np.ndarray
    D_vd: np.ndarray
    C_y: np.ndarray
    D_yd: np.ndarray
    A_J: np.ndarray
    B_Jd: np.ndarray
    C_Jv: np.ndarray
    D_Jvd: np.ndarray
    C_Jy: np.ndarray
    D_Jyd: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, as_mat(getattr(self, f.name)))
        n, n_d = self.A.shape[0], self.B_d.shape[1]
        n_v, n_y = self.C_v.shape[0], self.C_y.shape[0]
        for name, shape in (("A", (n, n)), ("A_J", (n, n)), ("B_d", (n, n_d)), ("B_Jd", (n, n_d)),
                            ("C_v", (n_v, n)), ("C_Jv", (n_v, n)), ("D_vd", (n_v, n_d)),
                            ("D_Jvd", (n_v, n_d)), ("C_y", (n_y, n)), ("C_Jy", (n_y, n)),
                            ("D_yd", (n_y, n_d)), ("D_Jyd", (n_y, n_d))):
            _check(name, getattr(self, name), *shape)
        _freeze(self)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def n_d(self):
        return self.B_d.shape[1]

    @property
    def n_v(self):
        return self.C_v.shape[0]

    @property
    def n_y(self):
        return self.C_y.shape[0]

    def to_feedback(self):
        """Feedback-form plant with z = (x, d) and w the jump increment."""
        n, n_d = self.n, self.n_d
        C_z = np.vstack([np.eye(n), np.zeros((n_d, n))])
        D_zd = np.vstack([np.zeros((n, n_d)), np.eye(n_d)])
        return EstimationPlant(
            A=self.A, B_w=np.hstack([self.A_J - self.A, self.B_Jd - self.B_d]), B_d=self.B_d,
            C_z=C_z, D_zw=np.zeros((n + n_d, n + n_d)), D_zd=D_zd,
            C_v=self.C_v, D_vw=np.hstack([self.C_Jv - self.C_v, self.D_Jvd - self.D_vd]),
            D_vd=self.D_vd,
            C_y=self.C_y, D_yw=np.hstack([self.C_Jy - self.C_y, self.D_Jyd - self.D_yd]),
            D_yd=self.D_yd)


@dataclass(frozen=True, eq=False)
class Estimator:
    A_e: np.ndarray
    B_e: np.ndarray
    C_e: np.ndarray
    D_e: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, as_mat(getattr(self, f.name)))
        ne, ny = self.A_e.shape[0], self.B_e.shape[1]
        nu = self.C_e.shape[0]
        _check("A_e", self.A_e, ne, ne)
        _check("B_e", self.B_e, ne, ny)
        _check("C_e", self.C_e, nu, ne)
        _check("D_e", self.D_e, nu, ny)
        _freeze(self)

    @property
    def order(self):
        return self.A_e.shape[0]

    @classmethod
    def zero(cls, order, n_u, n_y):
        z = np.zeros
        return cls(z((order, order)), z((order, n_y)), z((n_u, order)), z((n_u, n_y)))

    @classmethod
    def from_block(cls, K, order):
        K = np.asarray(K, dtype=float)
        return cls(K[:order, :order], K[:order, order:], K[order:, :order], K[order:, order:])

    def block(self):
        return np.block([[self.A_e, self.B_e], [self.C_e, self.D_e]])


@dataclass(frozen=True, eq=False)
class PerfIndex:
    """Quadratic performance index [[Q, S], [S^T, R]] on (e, d)."""

    Q: np.ndarray
    S: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = symmetrize(as_mat(self.Q))
        R = symmetrize(as_mat(self.R))
        S = as_mat(self.S, Q.shape[0], R.shape[0])
        if Q.size and lambda_min(Q) < -1e-10:
            raise ValueError("performance index needs Q >= 0")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "R", R)
        _freeze(self)

    @property
    def n_e(self):
        return self.Q.shape[0]

    @property
    def n_d(self):
        return self.R.shape[0]

    @property
    def matrix(self):
        return np.block([[self.Q, self.S], [self.S.T, self.R]])

    def is_nonsingular(self):
        m = self.matrix
        return m.size == 0 or np.linalg.cond(m) < 1e12

    @classmethod
    def gain(cls, gamma2, n_e, n_d):
        """Energy-gain index diag(I, -gamma^2 I)."""
        return cls(np.eye(n_e), np.zeros((n_e, n_d)), -gamma2 * np.eye(n_d))


def gain_index(gamma2, n_e, n_d):
    return PerfIndex.gain(gamma2, n_e, n_d)


def jump_to_feedback(j):
    """Embed a flow/jump system into feedback form with z = (x, d)."""
    n, n_d = j.n, j.n_d
    nz = n + n_d
    return FeedbackForm(
        A=j.A,
        B_w=np.hstack([j.A_J - j.A, j.B_J - j.B]),
        B=j.B,
        C_z=np.vstack([np.eye(n), np.zeros((n_d, n))]),
        D_zw=np.zeros((nz, nz)),
        D_zd=np.vstack([np.zeros((n, n_d)), np.eye(n_d)]),
        C=j.C,
        D_ew=np.hstack([j.C_J - j.C, j.D_J - j.D]),
        D=j.D)


def feedback_to_jump(f):
    """Resolve the impulsive loop at impulse instants to obtain jump matrices."""
    if f.n_z != f.n_w:
        raise DimensionError("impulsive loop needs n_z == n_w")
    if not f.is_well_posed():
        raise NotWellPosedError(f"I - D_zw is singular (rcond={f.well_posedness_rcond():.2e})")
    if f.n_z:
        gain = np.linalg.solve(np.eye(f.n_z) - f.D_zw, np.hstack([f.C_z, f.D_zd]))
    else:
        gain = np.zeros((0, f.n + f.n_d))
    base = np.block([[f.A, f.B], [f.C, f.D]]) if (f.n + f.n_e) else np.zeros((0, f.n + f.n_d))
    left = np.vstack([f.B_w, f.D_ew])
    J = base + left @ gain
    n = f.n
    return JumpForm(f.A, f.B, f.C, f.D, J[:n, :n], J[:n, n:], J[n:, :n], J[n:, n:])


def as_feedback(system):
    if isinstance(system, FeedbackForm):
        return system
    if isinstance(system, JumpForm):
        return jump_to_feedback(system)
    raise TypeError(f"cannot convert {type(system).__name__} to feedback form")


def as_jump(system):
    if isinstance(system, JumpForm):
        return system
    if isinstance(system, FeedbackForm):
        return feedback_to_jump(system)
    raise TypeError(f"cannot convert {type(system).__name__} to jump form")


def closed_loop(p, e):
    """Interconnect an estimation plant with an LTI estimator; error e = v - u."""
    if isinstance(p, JumpEstimationPlant):
        p = p.to_feedback()
    if e.B_e.shape[1] != p.n_y or e.C_e.shape[0] != p.n_v:
        raise DimensionError(
            f"estimator maps {e.B_e.shape[1]} -> {e.C_e.shape[0]} but plant has "
            f"n_y={p.n_y}, n_v={p.n_v}")
    n, ne = p.n, e.order
    A = blockmat([[p.A, None], [e.B_e @ p.C_y, e.A_e]], [n, ne], [n, ne])
    return FeedbackForm(
        A=A,
        B_w=np.vstack([p.B_w, e.B_e @ p.D_yw]),
        B=np.vstack([p.B_d, e.B_e @ p.D_yd]),
        C_z=np.hstack([p.C_z, np.zeros((p.n_z, ne))]),
        D_zw=p.D_zw,
        D_zd=p.D_zd,
        C=np.hstack([p.C_v - e.D_e @ p.C_y, -e.C_e]),
        D_ew=p.D_vw - e.D_e @ p.D_yw,
        D=p.D_vd - e.D_e @ p.D_yd)


def hold_system(dim):
    """Sample-and-hold: output holds the last sampled input between impulses."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    I, Z = np.eye(dim), np.zeros((dim, dim))
    return JumpForm(A=I, B=Z, C=I, D=Z, A_J=Z, B_J=I, C_J=Z, D_J=I)


def lift(steps):
    """Stack ``len(steps)`` steps of a time-varying system into one map.

    ``steps`` is a list of ``(A, B, C, D)``.  The lifted map acts on
    ``(x_0, d_0, ..., d_{k-1})`` and returns ``(state, outputs)`` where
    ``state`` gives ``x_k`` and ``outputs[j]`` gives the output at step j.
    """
    n = steps[0][0].shape[0]
    sizes = [s[1].shape[1] for s in steps]
    offsets = np.concatenate([[n], n + np.cumsum(sizes)]).astype(int)
    total = int(offsets[-1])
    phi = np.zeros((n, total))
    phi[:, :n] = np.eye(n)
    outs = []
    for j, (A, B, C, D) in enumerate(steps):
        sel = np.zeros((sizes[j], total))
        sel[:, offsets[j]:offsets[j + 1]] = np.eye(sizes[j])
        outs.append(C @ phi + D @ sel)
        phi = A @ phi + B @ sel
    return phi, outs
