"""Simulation of impulsive interconnections, empirical gains and dissipation checks."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dwell import ImpulseSequence, clock_values, sample_sequence
from .errors import DimensionError, NotWellPosedError
from .model import as_feedback, as_jump

DEFAULT_HORIZON = 400
DISTURBANCE_FRACTION = 0.8


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples over t = 0..horizon; ``x`` has one extra row, x(horizon + 1)."""

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    d: np.ndarray
    e: np.ndarray
    flags: np.ndarray

    def __post_init__(self):
        for name in ("t", "x", "z", "w", "d", "e", "flags"):
            getattr(self, name).setflags(write=False)

    @property
    def horizon(self):
        return len(self.t) - 1

    def residual(self, f):
        """Largest deviation from the defining recursions of ``f``."""
        f = as_feedback(f)
        worst = 0.0
        for t in range(len(self.t)):
            xt, wt, dt = self.x[t], self.w[t], self.d[t]
            r_x = self.x[t + 1] - (f.A @ xt + f.B_w @ wt + f.B @ dt)
            r_z = self.z[t] - (f.C_z @ xt + f.D_zw @ wt + f.D_zd @ dt)
            r_e = self.e[t] - (f.C @ xt + f.D_ew @ wt + f.D @ dt)
            r_w = self.w[t] - (self.z[t] if self.flags[t] else 0.0)
            worst = max(worst, *(float(np.max(np.abs(r), initial=0.0)) for r in (r_x, r_z, r_e, r_w)))
        return worst

    def to_csv(self, fh, extra=None):
        """Columns t, x*, d*, e*, impulse, plus any ``extra`` name -> array columns."""
        extra = extra or {}
        header = (["t"] + [f"x{i}" for i in range(self.x.shape[1])]
                  + [f"d{i}" for i in range(self.d.shape[1])]
                  + [f"e{i}" for i in range(self.e.shape[1])] + ["impulse"] + list(extra))
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(len(self.t)):
            row = [int(self.t[t])] + [repr(float(v)) for v in self.x[t]]
            row += [repr(float(v)) for v in self.d[t]] + [repr(float(v)) for v in self.e[t]]
            row.append(int(self.flags[t]))
            row += [repr(float(np.ravel(col)[t])) for col in extra.values()]
            w.writerow(row)


def _signal(d, horizon, n_d):
    if d is None:
        return np.zeros((horizon + 1, n_d))
    if callable(d):
        out = np.array([np.ravel(d(t)) for t in range(horizon + 1)], dtype=float)
    else:
        out = np.asarray(d, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
    out = out.reshape(len(out), -1) if out.size else np.zeros((len(out), n_d))
    if out.shape[1] != n_d:
        raise DimensionError(f"disturbance has {out.shape[1]} channels, system has {n_d}")
    if len(out) < horizon + 1:
        out = np.vstack([out, np.zeros((horizon + 1 - len(out), n_d))])
    return out[:horizon + 1]


def simulate(f, seq, x0=None, d=None, horizon=None):
    """Run the interconnection of ``f`` with the impulsive operator along ``seq``.

    ``d`` is an array with one row per step, a callable ``t -> d(t)`` or None
    (zero).  At impulse instants the loop w = z is resolved by a linear solve.
    """
    f = as_feedback(f)
    if f.n_z != f.n_w:
        raise DimensionError("impulsive loop needs n_z == n_w")
    horizon = seq.horizon if horizon is None else int(horizon)
    if horizon > seq.horizon:
        raise ValueError(f"horizon {horizon} exceeds the sequence horizon {seq.horizon}")
    flags = seq.flags()[:horizon + 1]
    if flags.any() and not f.is_well_posed():
        raise NotWellPosedError(f"I - D_zw is singular (rcond={f.well_posedness_rcond():.2e})")
    n = f.n
    x = np.zeros((horizon + 2, n))
    if x0 is not None:
        x[0] = np.ravel(x0)
    dd = _signal(d, horizon, f.n_d)
    z = np.zeros((horizon + 1, f.n_z))
    w = np.zeros((horizon + 1, f.n_w))
    e = np.zeros((horizon + 1, f.n_e))
    loop = None
    if f.n_z:
        # D_zw is constant, so the loop matrix is factored once
        loop = np.linalg.inv(np.eye(f.n_z) - f.D_zw)
    for t in range(horizon + 1):
        xt, dt = x[t], dd[t]
        if flags[t] and f.n_z:
            w[t] = loop @ (f.C_z @ xt + f.D_zd @ dt)
        z[t] = f.C_z @ xt + f.D_zw @ w[t] + f.D_zd @ dt
        e[t] = f.C @ xt + f.D_ew @ w[t] + f.D @ dt
        x[t + 1] = f.A @ xt + f.B_w @ w[t] + f.B @ dt
    return Trajectory(np.arange(horizon + 1), x, z, w, dd, e, flags.copy())


def simulate_jump(j, seq, x0=None, d=None, horizon=None):
    """Direct flow/jump recursion; returns (x, e) with x including x(horizon + 1)."""
    j = as_jump(j)
    horizon = seq.horizon if horizon is None else int(horizon)
    flags = seq.flags()
    x = np.zeros((horizon + 2, j.n))
    if x0 is not None:
        x[0] = np.ravel(x0)
    dd = _signal(d, horizon, j.n_d)
    e = np.zeros((horizon + 1, j.n_e))
    for t in range(horizon + 1):
        A, B, C, D = j.jump() if flags[t] else j.flow()
        e[t] = C @ x[t] + D @ dd[t]
        x[t + 1] = A @ x[t] + B @ dd[t]
    return x, e


def energy(sig):
    """Squared l2 norm with compensated summation."""
    sig = np.asarray(sig, dtype=float)
    return math.fsum((sig * sig).ravel().tolist())


def _random_disturbance(rng, kind, horizon, n_d):
    active = int(DISTURBANCE_FRACTION * horizon)
    d = np.zeros((horizon + 1, n_d))
    t = np.arange(active + 1)
    if kind == "white":
        d[:active + 1] = rng.uniform(-1.0, 1.0, size=(active + 1, n_d))
    else:
        omega = rng.uniform(0.0, np.pi, size=n_d)
        phase = rng.uniform(0.0, 2 * np.pi, size=n_d)
        d[:active + 1] = np.cos(np.outer(t, omega) + phase)
    return d


def empirical_gain(f, spec, trials=20, horizon=DEFAULT_HORIZON, seed=0, disturbances=None,
                   bounds=None):
    """Largest ||e|| / ||d|| seen over random admissible sequences from x(0) = 0.

    Random disturbances alternate between white noise and sinusoids and are
    zero on the last 20% of the horizon.  ``disturbances`` replaces them with
    fixed signals (arrays or callables), each run against every sequence.
    This is a lower bound on the true energy gain.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    f = as_feedback(f)
    rng = np.random.default_rng(seed)
    best = 0.0
    for k in range(trials):
        seq = sample_sequence(spec, horizon, "random", seed=int(rng.integers(2**32)),
                              bounds=bounds if not spec.bounded else None)
        if disturbances is None:
            ds = [_random_disturbance(rng, "white" if k % 2 == 0 else "sine", horizon, f.n_d)]
        else:
            ds = disturbances
        for d in ds:
            traj = simulate(f, seq, d=d)
            den = energy(traj.d)
            if den > 0.0:
                best = max(best, math.sqrt(energy(traj.e) / den))
    return best


def check_dissipation(cert, traj, P=None, eps=0.0, tol=1e-7):
    """Replay the clock dissipation inequality of a certificate along ``traj``.

    For every k the storage increment plus the accumulated supply must not
    exceed ``-eps * sum ||d||^2 + tol``.  Supplies and sums use compensated
    summation.
    """
    if cert.test != "clock" or not cert.feasible:
        raise ValueError("check_dissipation needs a feasible clock certificate")
    X = [np.asarray(m) for m in cert.values["X"]]
    n = X[0].shape[0]
    if traj.x.shape[1] != n:
        raise DimensionError(f"trajectory state has dimension {traj.x.shape[1]}, certificate {n}")
    if cert.mode == "stability":
        Pm = None
    elif P is not None:
        Pm = P.matrix
    else:
        Pm = cert._numeric_perf()
    if Pm is not None and Pm.shape[0] != traj.e.shape[1] + traj.d.shape[1]:
        raise DimensionError("performance index does not match the trajectory channels")
    sat = cert.spec.tmin if cert.spec.kind == "MDT" else None
    theta = clock_values(ImpulseSequence(tuple(np.flatnonzero(traj.flags)), traj.horizon), sat)
    theta = np.append(theta, 0 if traj.flags[-1] else theta[-1] + 1)
    if sat is not None:
        theta = np.minimum(theta, sat)
    v0 = float(traj.x[0] @ X[theta[0]] @ traj.x[0])
    supply, dsum = [], []
    for k in range(traj.horizon + 1):
        if Pm is not None:
            ed = np.concatenate([traj.e[k], traj.d[k]])
            supply.append(float(ed @ Pm @ ed))
        dsum.append(float(traj.d[k] @ traj.d[k]))
        xk = traj.x[k + 1]
        vk = float(xk @ X[theta[k + 1]] @ xk)
        lhs = math.fsum([vk, -v0] + supply)
        if lhs > -eps * math.fsum(dsum) + tol:
            return False
    return True
