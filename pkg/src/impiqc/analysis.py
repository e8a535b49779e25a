"""Stability and quadratic-performance tests for impulsive systems.

Every test assembles its LMIs through a builder ``build(V, Pm)`` that works
both on decision expressions and on plain numeric values.  The same builder is
used to replay a certificate by eigenvalue checks.

Modes:

* ``"stability"`` - performance rows and columns are removed;
* ``"performance"`` - a fixed :class:`~impiqc.model.PerfIndex`;
* ``"gain"`` - ``P = diag(I, -g I)`` with ``g = gamma^2`` minimized.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .dwell import DwellSpec, enumerate_paths, postadmissible
from .errors import DimensionError, ImpiqcError
from .iqcfilter import augment, auxiliary_impulsive, basis_filter, lift_filter
from .model import PerfIndex, as_feedback, as_jump, lift
from .sdp import LmiProgram, bdiag, check_constraints, minimize_gain, quadsum, scal, solve

TESTS = ("lifting", "path", "clock", "clock-slack", "adt-static", "iqc-clock", "iqc-lifting")
MODES = ("stability", "performance", "gain")


@dataclass
class Certificate:
    test: str
    status: str
    spec: DwellSpec | None
    mode: str
    values: dict = field(default_factory=dict)
    gamma: float = float("nan")
    eps: float = float("nan")
    solve_time: float = 0.0
    message: str = ""
    params: dict = field(default_factory=dict)
    perf: PerfIndex | None = None
    _build: object = None

    @property
    def feasible(self):
        return self.status == "feasible"

    def lmis(self):
        """Numeric LMIs ``(label, kind, matrix)`` at the certificate values."""
        if not self.feasible:
            return []
        return self._build(self.values, self._numeric_perf())

    def _numeric_perf(self):
        if self.mode == "stability":
            return np.zeros((0, 0))
        if self.mode == "gain":
            n_e, n_d = self.params["n_e"], self.params["n_d"]
            return bdiag([np.eye(n_e), -float(self.values["g"]) * np.eye(n_d)])
        return self.perf.matrix

    def replay(self, eps=None):
        """Labels of LMIs that fail an independent eigenvalue check (empty when sound)."""
        return check_constraints(self.lmis(), self.eps if eps is None else eps)


class _Values:
    """Stand-in for LmiProgram that hands back solved values instead of expressions."""

    def __init__(self, flat):
        self.flat = flat

    def sym(self, name, n):
        return np.asarray(self.flat[name]).reshape(n, n)

    def full(self, name, rows, cols):
        return np.asarray(self.flat[name]).reshape(rows, cols)

    def scalar(self, name):
        return float(self.flat[name])


def _perf_setup(prog, mode, P, n_e, n_d):
    if mode == "stability":
        return np.zeros((0, 0)), None
    if mode == "gain":
        g = prog.scalar("g")
        return bdiag([np.eye(n_e), scal(g, -np.eye(n_d))]), g
    if mode == "performance":
        if P is None:
            raise ValueError("performance mode needs a PerfIndex")
        if (P.n_e, P.n_d) != (n_e, n_d):
            raise DimensionError(f"performance index is {P.n_e}x{P.n_d}, system has n_e={n_e}, n_d={n_d}")
        return P.matrix, None
    raise ValueError(f"unknown mode {mode!r}")


def _run(test, spec, mode, P, n_e, n_d, declare, build, eps, backend, params=None):
    prog = LmiProgram()
    V = declare(prog)
    Pm, g = _perf_setup(prog, mode, P, n_e, n_d)
    for label, kind, expr in build(V, Pm):
        prog.add(expr, kind, label)
    start = time.perf_counter()
    if g is not None:
        gamma, res = minimize_gain(prog, g, eps, backend)
    else:
        res = solve(prog, eps, backend)
        gamma = float("nan")
    params = dict(params or {}, n_e=n_e, n_d=n_d, n_constraints=len(prog.constraints))
    values = {}
    if res.feasible:
        values = declare(_Values(res.values))
        if g is not None:
            values["g"] = res.values["g"]
    return Certificate(test, res.status, spec, mode, values, gamma,
                       res.eps, time.perf_counter() - start, res.message, params,
                       P if mode == "performance" else None, build)


def _prep_jump(system, mode):
    j = as_jump(system)
    return j.stability_part() if mode == "stability" else j


def _prep_feedback(system, mode):
    f = as_feedback(system)
    if f.n_z != f.n_w:
        raise DimensionError("IQC tests need n_z == n_w")
    return f.stability_part() if mode == "stability" else f


def _ranged(spec):
    if spec.kind == "MDT":
        return spec.tmin, spec.tmin, True
    tmin, tmax = spec.ranged()
    return tmin, tmax, False


def _size(W):
    return int(np.prod(W.shape))


def _step_lmi(Xn, Xc, A, B, C, D, Pm, supply_on_input=True):
    """One-step inequality; the supply acts on (out; in) or, for filters, on out only."""
    n, nd = A.shape[0], B.shape[1]
    nxt = np.hstack([A, B])
    cur = np.hstack([np.eye(n), np.zeros((n, nd))])
    if not _size(Pm):
        out = np.zeros((0, n + nd))
    elif supply_on_input:
        out = np.block([[C, D], [np.zeros((nd, n)), np.eye(nd)]])
    else:
        out = np.hstack([C, D])
    dim = n + nd
    return quadsum([(nxt, Xn)], dim) - quadsum([(cur, Xc)], dim) + quadsum([(out, Pm)], dim)


def _lifted_lmi(Xn, Xc, state, outs, nd, Pm):
    n = state.shape[0]
    total = state.shape[1]
    cur = np.hstack([np.eye(n), np.zeros((n, total - n))])
    expr = quadsum([(state, Xn)], total) - quadsum([(cur, Xc)], total)
    if _size(Pm):
        pairs = []
        for j, out in enumerate(outs):
            sel = np.zeros((nd, total))
            sel[:, n + j * nd:n + (j + 1) * nd] = np.eye(nd)
            pairs.append((np.vstack([out, sel]), Pm))
        expr = expr + quadsum(pairs)
    return expr


def test_lifting(system, P=None, spec=None, mode="stability", eps=None, backend=None):
    """Lifting test: one Lyapunov matrix, one LMI per admissible dwell time."""
    j = _prep_jump(system, mode)
    tmin, tmax = spec.ranged()
    n = j.n
    steps = {k: lift([j.flow()] * k + [j.jump()]) for k in range(tmin, tmax + 1)}

    def declare(prog):
        return {"X": prog.sym("X", n)}

    def build(V, Pm):
        X = V["X"]
        out = [("X>0", "strict-pos", X)]
        for k, (state, outs) in steps.items():
            out.append((f"lift[{k}]", "strict-neg", _lifted_lmi(X, X, state, outs, j.n_d, Pm)))
        return out

    return _run("lifting", spec, mode, P, j.n_e, j.n_d, declare, build, eps, backend)


def _path_step(bit, j):
    return j.jump() if bit else j.flow()


def path_product(v, A, A_J):
    """A_v: apply A or A_J per entry, first entry first (rightmost factor)."""
    n = A.shape[0]
    out = np.eye(n)
    for b in v:
        out = (A_J if b else A) @ out
    return out


def test_path(system, P=None, spec=None, L=1, mode="stability", eps=None, backend=None):
    """Path test: one Lyapunov matrix per admissible impulse path of length L."""
    j = _prep_jump(system, mode)
    tmin, tmax = spec.ranged()
    paths = enumerate_paths(tmin, tmax, L)
    if not paths:
        raise ImpiqcError(f"no admissible paths for ({tmin},{tmax},{L})", code="no-admissible-paths")
    index = {p: i for i, p in enumerate(paths)}
    lifted = {p: lift([_path_step(b, j) for b in p]) for p in paths}
    succ = {p: postadmissible(p, tmin, tmax) for p in paths}
    n = j.n

    def declare(prog):
        return {"X": [prog.sym(f"X_{''.join(map(str, p))}", n) for p in paths]}

    def build(V, Pm):
        X = V["X"]
        out = [(f"X[{''.join(map(str, p))}]>0", "strict-pos", X[index[p]]) for p in paths]
        for p in paths:
            state, outs = lifted[p]
            for q in succ[p]:
                out.append((f"path[{''.join(map(str, p))}->{''.join(map(str, q))}]", "strict-neg",
                            _lifted_lmi(X[index[q]], X[index[p]], state, outs, j.n_d, Pm)))
        return out

    cert = _run("path", spec, mode, P, j.n_e, j.n_d, declare, build, eps, backend,
                {"L": L, "paths": len(paths)})
    if cert.feasible:
        cert.values["paths"] = paths
    return cert


def test_clock(system, P=None, spec=None, mode="stability", eps=None, backend=None):
    """Clock test: Lyapunov matrices X_0..X_Tmax indexed by time since the last impulse."""
    j = _prep_jump(system, mode)
    tmin, tmax, mdt = _ranged(spec)
    n = j.n

    def declare(prog):
        return {"X": [prog.sym(f"X{k}", n) for k in range(tmax + 1)]}

    def build(V, Pm):
        X = V["X"]
        out = [(f"X{k}>0", "strict-pos", X[k]) for k in range(tmax + 1)]
        for k in range(tmax):
            out.append((f"flow[{k}]", "strict-neg", _step_lmi(X[k + 1], X[k], *j.flow(), Pm)))
        if mdt:
            out.append((f"flow[{tmax}*]", "strict-neg", _step_lmi(X[tmax], X[tmax], *j.flow(), Pm)))
        for k in range(tmin, tmax + 1):
            out.append((f"jump[{k}]", "strict-neg", _step_lmi(X[0], X[k], *j.jump(), Pm)))
        return out

    return _run("clock", spec, mode, P, j.n_e, j.n_d, declare, build, eps, backend)


def _slack_lmi(Xn, Xc, G, A, B, C, D, Pm):
    n, nd = A.shape[0], B.shape[1]
    z = np.zeros
    r1 = np.hstack([z((n, n)), A, B])
    r2 = np.hstack([np.eye(n), z((n, n + nd))])
    r3 = np.hstack([z((n, n)), np.eye(n), z((n, nd))])
    cross = r1.T @ G @ r2
    gg = r2.T @ G @ r2
    expr = cross + cross.T + quadsum([(r2, Xn)]) - gg - gg.T - quadsum([(r3, Xc)])
    if _size(Pm):
        perf = np.block([[z((C.shape[0], n)), C, D], [z((nd, 2 * n)), np.eye(nd)]])
        expr = expr + quadsum([(perf, Pm)])
    return expr


def test_clock_slack(system, P=None, spec=None, mode="stability", eps=None, backend=None):
    """Clock test with common slack variables G (flow) and G_J (jump)."""
    j = _prep_jump(system, mode)
    tmin, tmax, mdt = _ranged(spec)
    n = j.n

    def declare(prog):
        return {"X": [prog.sym(f"X{k}", n) for k in range(tmax + 1)],
                "G": prog.full("G", n, n), "G_J": prog.full("G_J", n, n)}

    def build(V, Pm):
        X, G, GJ = V["X"], V["G"], V["G_J"]
        out = [(f"X{k}>0", "strict-pos", X[k]) for k in range(tmax + 1)]
        for k in range(tmax):
            out.append((f"flow[{k}]", "strict-neg", _slack_lmi(X[k + 1], X[k], G, *j.flow(), Pm)))
        if mdt:
            out.append((f"flow[{tmax}*]", "strict-neg", _slack_lmi(X[tmax], X[tmax], G, *j.flow(), Pm)))
        for k in range(tmin, tmax + 1):
            out.append((f"jump[{k}]", "strict-neg", _slack_lmi(X[0], X[k], GJ, *j.jump(), Pm)))
        return out

    return _run("clock-slack", spec, mode, P, j.n_e, j.n_d, declare, build, eps, backend)


def main_lmi(aug, X, M, Pm):
    """The IQC main inequality for the filtered system, columns (xi, x, w, d)."""
    N = aug.n
    n_w, n_d = aug.B_w.shape[1], aug.B_d.shape[1]
    z = np.zeros
    nxt = np.hstack([aug.A, aug.B_w, aug.B_d])
    cur = np.hstack([np.eye(N), z((N, n_w + n_d))])
    y = np.hstack([aug.C_y, aug.D_yw, aug.D_yd])
    expr = quadsum([(nxt, X)]) - quadsum([(cur, X)]) + quadsum([(y, M)])
    if _size(Pm):
        perf = np.block([[aug.C_e, aug.D_ew, aug.D_ed], [z((n_d, N + n_w)), np.eye(n_d)]])
        expr = expr + quadsum([(perf, Pm)])
    return expr


def _pad_z(Z, n):
    return bdiag([Z, np.zeros((n, n))])


def iqc_clock_lmis(psi, Z, M, tmin, tmax, mdt):
    """Clock-based multiplier constraints on (M, Z_0..Z_Tmax), all ``>= 0``."""
    aux = auxiliary_impulsive(psi)
    out = []
    for k in range(tmax):
        out.append((f"iqc-flow[{k}]", "nonneg", _step_lmi(Z[k + 1], Z[k], *aux.flow(), M, False)))
    if mdt:
        out.append((f"iqc-flow[{tmax}*]", "nonneg", _step_lmi(Z[tmax], Z[tmax], *aux.flow(), M, False)))
    for k in range(tmin, tmax + 1):
        out.append((f"iqc-jump[{k}]", "nonneg",
                    _step_lmi(Z[0], Z[k], *aux.jump(), M, False)))
    return out


def iqc_lifting_lmis(psi, Z, M, tmin, tmax, mdt):
    """Lifting-based multiplier constraints on (M, Z), all ``>= 0``."""
    out = []
    for k in range(max(tmin, 1), tmax + 1):
        lf = lift_filter(psi, k)
        out.append((f"iqc-lift[{k}]", "nonneg", _lifted_lmi(Z, Z, lf.state, lf.outputs, 0, np.zeros((0, 0)))
                    + quadsum([(y, M) for y in lf.outputs])))
    if mdt:
        aux = auxiliary_impulsive(psi)
        out.append((f"iqc-flow[{tmax}*]", "nonneg", _step_lmi(Z, Z, *aux.flow(), M, False)))
    return out


def test_adt_static(system, P=None, spec=None, mode="stability", eps=None, backend=None):
    """Static-multiplier test, valid for arbitrary dwell times."""
    f = _prep_feedback(system, mode)
    psi = basis_filter(f.n_z, f.n_w, 0)
    aug = augment(f, psi)
    nz = f.n_z
    sel_flow = np.vstack([np.eye(nz), np.zeros((nz, nz))])
    sel_jump = np.vstack([np.eye(nz), np.eye(nz)])

    def declare(prog):
        return {"X": prog.sym("X", f.n), "M": prog.sym("M", psi.m)}

    def build(V, Pm):
        X, M = V["X"], V["M"]
        return [("X>0", "strict-pos", X),
                ("main", "strict-neg", main_lmi(aug, X, M, Pm)),
                ("M-flow", "nonneg", quadsum([(sel_flow, M)])),
                ("M-jump", "nonneg", quadsum([(sel_jump, M)]))]

    return _run("adt-static", spec or DwellSpec.adt(), mode, P, f.n_e, f.n_d, declare, build, eps, backend,
                {"nu": 0})


def test_iqc_clock(system, P=None, spec=None, nu=1, mode="stability", eps=None, backend=None):
    """IQC test with clock-dependent terminal costs Z_0..Z_Tmax."""
    f = _prep_feedback(system, mode)
    tmin, tmax, mdt = _ranged(spec)
    psi = basis_filter(f.n_z, f.n_w, nu)
    aug = augment(f, psi)

    def declare(prog):
        return {"X": prog.sym("X", aug.n), "M": prog.sym("M", psi.m),
                "Z": [prog.sym(f"Z{k}", psi.n_xi) for k in range(tmax + 1)]}

    def build(V, Pm):
        X, M, Z = V["X"], V["M"], V["Z"]
        out = [("main", "strict-neg", main_lmi(aug, X, M, Pm))]
        out += [(f"X-Z{k}>0", "strict-pos", X - _pad_z(Z[k], f.n)) for k in range(tmax + 1)]
        out += iqc_clock_lmis(psi, Z, M, tmin, tmax, mdt)
        return out

    return _run("iqc-clock", spec, mode, P, f.n_e, f.n_d, declare, build, eps, backend, {"nu": nu})


def test_iqc_lifting(system, P=None, spec=None, nu=1, mode="stability", eps=None, backend=None):
    """IQC test with a lifted multiplier and a single terminal cost Z."""
    f = _prep_feedback(system, mode)
    tmin, tmax, mdt = _ranged(spec)
    psi = basis_filter(f.n_z, f.n_w, nu)
    aug = augment(f, psi)

    def declare(prog):
        return {"X": prog.sym("X", aug.n), "M": prog.sym("M", psi.m), "Z": prog.sym("Z", psi.n_xi)}

    def build(V, Pm):
        X, M, Z = V["X"], V["M"], V["Z"]
        out = [("main", "strict-neg", main_lmi(aug, X, M, Pm)),
               ("X-Z>0", "strict-pos", X - _pad_z(Z, f.n))]
        out += iqc_lifting_lmis(psi, Z, M, tmin, tmax, mdt)
        return out

    return _run("iqc-lifting", spec, mode, P, f.n_e, f.n_d, declare, build, eps, backend, {"nu": nu})


_DISPATCH = {
    "lifting": test_lifting,
    "path": test_path,
    "clock": test_clock,
    "clock-slack": test_clock_slack,
    "adt-static": test_adt_static,
    "iqc-clock": test_iqc_clock,
    "iqc-lifting": test_iqc_lifting,
}


def run_test(test, system, P=None, spec=None, mode="stability", nu=1, L=1, eps=None, backend=None):
    """Dispatch by test name; ``nu`` and ``L`` are passed where they apply."""
    if test not in _DISPATCH:
        raise ValueError(f"unknown test {test!r}; choose from {', '.join(TESTS)}")
    fn = _DISPATCH[test]
    kw = {"P": P, "spec": spec, "mode": mode, "eps": eps, "backend": backend}
    if test.startswith("iqc-"):
        kw["nu"] = nu
    if test == "path":
        kw["L"] = L
    return fn(system, **kw)


def min_gain(test, system, spec=None, nu=1, L=1, eps=None, backend=None):
    """Smallest certified energy gain bound gamma for the chosen test."""
    cert = run_test(test, system, spec=spec, mode="gain", nu=nu, L=L, eps=eps, backend=backend)
    return cert.gamma, cert


CSV_FIELDS = ("test", "system", "spec", "nu_or_L", "mode", "status", "gamma", "solve_time")


def certificate_row(cert, system_id=""):
    extra = cert.params.get("nu", cert.params.get("L", ""))
    gamma = "" if np.isnan(cert.gamma) else f"{cert.gamma:.6g}"
    return {"test": cert.test, "system": system_id, "spec": str(cert.spec) if cert.spec else "",
            "nu_or_L": extra, "mode": cert.mode, "status": cert.status, "gamma": gamma,
            "solve_time": f"{cert.solve_time:.4f}"}


def write_csv(rows, fh):
    w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
    w.writeheader()
    for r in rows:
        w.writerow(r)

