"""A small LMI modeling layer on top of a conic solver.

Decision variables are stacked into one real vector.  Matrix-valued affine
expressions (:class:`Affine`) keep a dense constant plus, per variable, a
coefficient tensor of shape ``(rows, cols, dofs)``.  All LMI builders in the
package are written against plain ``@``/``+``/``.T`` so they run unchanged on
numeric matrices, which is how certificates are replayed.

The default backend calls Clarabel directly; ``IMPIQC_SDP_BACKEND=cvxpy``
routes through cvxpy instead.
"""

import os
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, SolverError
from .matcore import blockmat, lambda_max, lambda_min, symmetrize

KINDS = ("strict-neg", "strict-pos", "nonneg", "nonpos", "eq")
STATUSES = ("feasible", "infeasible", "inaccurate", "error")


class Affine:
    """Matrix-valued affine function of the program variables."""

    __array_ufunc__ = None  # keep numpy from swallowing ``ndarray @ Affine``

    def __init__(self, const, terms=None):
        self.const = np.atleast_2d(np.asarray(const, dtype=float))
        self.terms = dict(terms or {})

    @property
    def shape(self):
        return self.const.shape

    def _coerce(self, other):
        if isinstance(other, Affine):
            return other
        if np.isscalar(other):
            if other != 0:
                raise TypeError("only 0 may be added to a matrix expression as a scalar")
            return Affine(np.zeros(self.shape))
        return Affine(other)

    def __add__(self, other):
        other = self._coerce(other)
        if other.shape != self.shape:
            raise DimensionError(f"cannot add shapes {self.shape} and {other.shape}")
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(self.const + other.const, terms)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.const, {k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, s):
        if not np.isscalar(s):
            return NotImplemented
        s = float(s)
        return Affine(s * self.const, {k: s * v for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __matmul__(self, R):
        if isinstance(R, Affine):
            raise TypeError("product of two decision-dependent matrices is not affine")
        R = np.atleast_2d(np.asarray(R, dtype=float))
        return Affine(self.const @ R, {k: np.einsum("ijd,jk->ikd", v, R) for k, v in self.terms.items()})

    def __rmatmul__(self, L):
        L = np.atleast_2d(np.asarray(L, dtype=float))
        return Affine(L @ self.const, {k: np.einsum("ai,ijd->ajd", L, v) for k, v in self.terms.items()})

    @property
    def T(self):
        return Affine(self.const.T, {k: v.transpose(1, 0, 2) for k, v in self.terms.items()})

    def __getitem__(self, idx):
        if not isinstance(idx, tuple) or len(idx) != 2:
            raise IndexError("use two-dimensional slicing")
        c = self.const[idx]
        if c.ndim != 2:
            raise IndexError("slices must keep both dimensions")
        return Affine(c, {k: v[idx] for k, v in self.terms.items()})

    def value(self, x_by_var):
        out = self.const.copy()
        for k, v in self.terms.items():
            out += v @ x_by_var[k]
        return out

    def __repr__(self):
        return f"Affine(shape={self.shape}, vars={sorted(self.terms)})"


def is_affine(x):
    return isinstance(x, Affine)


def scal(g, M):
    """Scalar (float or 1x1 Affine) times a constant matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if isinstance(g, Affine):
        if g.shape != (1, 1):
            raise DimensionError("scal needs a 1x1 expression")
        return Affine(g.const[0, 0] * M, {k: M[:, :, None] * v[0, 0][None, None, :] for k, v in g.terms.items()})
    return float(np.asarray(g).reshape(())) * M


def bmat(blocks, row_sizes=None, col_sizes=None):
    """Block matrix of numbers or expressions; ``None`` entries are zero blocks."""
    if not any(isinstance(b, Affine) for row in blocks for b in row):
        return blockmat(blocks, row_sizes, col_sizes)
    consts = [[b.const if isinstance(b, Affine) else b for b in row] for row in blocks]
    # blockmat infers and checks the sizes for us
    nr, nc = len(blocks), len(blocks[0])
    rs = list(row_sizes) if row_sizes is not None else [None] * nr
    cs = list(col_sizes) if col_sizes is not None else [None] * nc
    for i, row in enumerate(consts):
        for j, b in enumerate(row):
            if b is None or (np.isscalar(b) and b == 0):
                continue
            b = np.atleast_2d(b)
            rs[i] = b.shape[0] if rs[i] is None else rs[i]
            cs[j] = b.shape[1] if cs[j] is None else cs[j]
    const = blockmat(consts, rs, cs)
    r0 = np.concatenate([[0], np.cumsum(rs)]).astype(int)
    c0 = np.concatenate([[0], np.cumsum(cs)]).astype(int)
    terms = {}
    for i, row in enumerate(blocks):
        for j, b in enumerate(row):
            if not isinstance(b, Affine):
                continue
            for k, v in b.terms.items():
                if k not in terms:
                    terms[k] = np.zeros(const.shape + (v.shape[2],))
                terms[k][r0[i]:r0[i + 1], c0[j]:c0[j + 1], :] += v
    return Affine(const, terms)


def bdiag(parts):
    """Block diagonal of numbers or expressions."""
    n = len(parts)
    sizes = [np.atleast_2d(p.const if isinstance(p, Affine) else p).shape for p in parts]
    return bmat([[parts[i] if i == j else None for j in range(n)] for i in range(n)],
                [s[0] for s in sizes], [s[1] for s in sizes])


def quadsum(pairs, dim=None):
    """Sum of ``F^T B F`` over ``(F, B)`` pairs; ``B`` may be an expression.

    ``B=None`` stands for the identity.  Pairs with zero-row ``F`` are skipped.
    """
    total = None
    for F, B in pairs:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        if F.shape[0] == 0:
            continue
        if B is None:
            term = F.T @ F
        elif isinstance(B, Affine):
            term = Affine(F.T @ B.const @ F, {
                k: np.einsum("ajd,jb->abd", np.einsum("ia,ijd->ajd", F, v), F)
                for k, v in B.terms.items()})
        else:
            term = F.T @ np.atleast_2d(B) @ F
        total = term if total is None else total + term
    if total is None:
        if dim is None:
            raise DimensionError("quadsum of nothing needs an explicit dimension")
        return np.zeros((dim, dim))
    return total


def sym(expr):
    return 0.5 * (expr + expr.T)


@dataclass
class _Var:
    name: str
    kind: str  # "sym" | "full" | "scalar"
    shape: tuple
    offset: int
    ndof: int


@dataclass
class Constraint:
    expr: object
    kind: str
    label: str


@dataclass
class SolveResult:
    status: str
    values: dict = field(default_factory=dict)
    objective: float = float("nan")
    margin: float = float("nan")
    message: str = ""
    solve_time: float = 0.0
    eps: float = float("nan")

    @property
    def feasible(self):
        return self.status == "feasible"


def _sym_basis(n):
    iu = np.triu_indices(n)
    nd = len(iu[0])
    basis = np.zeros((n, n, nd))
    d = np.arange(nd)
    basis[iu[0], iu[1], d] = 1.0
    basis[iu[1], iu[0], d] = 1.0
    return basis


class LmiProgram:
    """Named decision variables, LMI constraints and an optional linear objective."""

    def __init__(self):
        self.vars = {}
        self.constraints = []
        self.objective = None
        self.ndof = 0

    def copy(self):
        """Shallow copy sharing variables; constraints can be added independently."""
        other = LmiProgram()
        other.vars = dict(self.vars)
        other.constraints = list(self.constraints)
        other.objective = self.objective
        other.ndof = self.ndof
        return other

    def _declare(self, name, kind, shape, ndof):
        if name in self.vars:
            raise ValueError(f"variable {name!r} declared twice")
        v = _Var(name, kind, shape, self.ndof, ndof)
        self.vars[name] = v
        self.ndof += ndof
        return v

    def sym(self, name, n):
        self._declare(name, "sym", (n, n), n * (n + 1) // 2)
        if n == 0:
            return Affine(np.zeros((0, 0)))
        return Affine(np.zeros((n, n)), {name: _sym_basis(n)})

    def full(self, name, rows, cols):
        self._declare(name, "full", (rows, cols), rows * cols)
        if rows * cols == 0:
            return Affine(np.zeros((rows, cols)))
        return Affine(np.zeros((rows, cols)), {name: np.eye(rows * cols).reshape(rows, cols, rows * cols)})

    def scalar(self, name):
        self._declare(name, "scalar", (1, 1), 1)
        return Affine(np.zeros((1, 1)), {name: np.ones((1, 1, 1))})

    def add(self, expr, kind, label=""):
        if kind not in KINDS:
            raise ValueError(f"unknown constraint kind {kind!r}")
        if not isinstance(expr, Affine):
            expr = Affine(expr)
        if kind != "eq":
            if expr.shape[0] != expr.shape[1]:
                raise DimensionError(f"LMI {label!r} is not square: {expr.shape}")
            expr = sym(expr)
        for k in expr.terms:
            if k not in self.vars:
                raise ValueError(f"constraint {label!r} references undeclared variable {k!r}")
        if expr.shape[0] == 0:
            return
        self.constraints.append(Constraint(expr, kind, label or f"c{len(self.constraints)}"))

    def minimize(self, expr):
        if not isinstance(expr, Affine) or expr.shape != (1, 1):
            raise DimensionError("objective must be a scalar expression")
        self.objective = expr

    def default_eps(self):
        scale = 0.0
        for c in self.constraints:
            if c.expr.const.size:
                scale = max(scale, float(np.max(np.abs(c.expr.const))))
        return 1e-7 * (1.0 + scale)

    def split(self, x):
        return {name: x[v.offset:v.offset + v.ndof] for name, v in self.vars.items()}

    def unpack(self, x):
        out = {}
        for name, v in self.vars.items():
            xs = x[v.offset:v.offset + v.ndof]
            if v.kind == "sym":
                n = v.shape[0]
                m = np.zeros((n, n))
                m[np.triu_indices(n)] = xs
                out[name] = m + np.triu(m, 1).T
            elif v.kind == "full":
                out[name] = xs.reshape(v.shape)
            else:
                out[name] = float(xs[0])
        return out

    def check(self, x, eps):
        """Worst violation per constraint kind at point ``x``.

        Returns ``(ok, margin)`` where ``margin`` is the smallest slack over the
        strict constraints (positive is good).
        """
        xv = self.split(x)
        ok = True
        margin = np.inf
        for c in self.constraints:
            v = c.expr.value(xv)
            ok &= _satisfied(v, c.kind, eps)
            if c.kind == "strict-neg":
                margin = min(margin, -lambda_max(v))
            elif c.kind == "strict-pos":
                margin = min(margin, lambda_min(v))
        return bool(ok), float(margin)

    def nonstrict_violation(self, x):
        """Largest violation of the non-strict LMIs at ``x`` (0 if none)."""
        xv = self.split(x)
        worst = 0.0
        for c in self.constraints:
            if c.kind == "nonneg":
                worst = max(worst, -lambda_min(c.expr.value(xv)))
            elif c.kind == "nonpos":
                worst = max(worst, lambda_max(c.expr.value(xv)))
        return worst

    def dump(self):
        lines = ["variables:"]
        for v in self.vars.values():
            lines.append(f"  {v.name}: {v.kind} {v.shape[0]}x{v.shape[1]} ({v.ndof} dofs)")
        lines.append("constraints:")
        for c in self.constraints:
            lines.append(f"  [{c.kind}] {c.label}: {c.expr.shape[0]}x{c.expr.shape[1]} "
                         f"in {', '.join(sorted(c.expr.terms)) or '-'}")
            with np.printoptions(precision=4, suppress=True, linewidth=120):
                for row in str(c.expr.const).splitlines():
                    lines.append("      " + row)
        if self.objective is not None:
            lines.append(f"minimize: scalar in {', '.join(sorted(self.objective.terms))}")
        return "\n".join(lines)


def _satisfied(v, kind, eps):
    if kind == "strict-neg":
        return lambda_max(v) <= -eps / 2
    if kind == "strict-pos":
        return lambda_min(v) >= eps / 2
    if kind == "nonneg":
        return lambda_min(v) >= -eps / 10
    if kind == "nonpos":
        return lambda_max(v) <= eps / 10
    scale = 1.0 + float(np.max(np.abs(v))) if v.size else 1.0
    return v.size == 0 or float(np.max(np.abs(v))) <= 1e-7 * scale


def check_constraints(named, eps):
    """Replay numeric LMIs: ``named`` is a list of ``(label, kind, matrix)``.

    Returns the labels that fail at the same thresholds used by :func:`solve`.
    """
    return [label for label, kind, m in named if not _satisfied(np.asarray(m, dtype=float), kind, eps)]


# -- backends -------------------------------------------------------------


def _svec_index(n):
    """Row/col pairs of the upper triangle in column-major order and weights."""
    rows, cols = [], []
    for j in range(n):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    rows, cols = np.array(rows), np.array(cols)
    w = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, w


def _psd_form(c, eps, tighten=0.0):
    """Return (sign, shift) so that sign*expr - shift*I >= 0 encodes the constraint.

    ``tighten`` shifts the non-strict constraints inward; any point feasible
    for the tightened program is feasible for the original one.
    """
    if c.kind == "strict-neg":
        return -1.0, eps
    if c.kind == "strict-pos":
        return 1.0, eps
    if c.kind == "nonneg":
        return 1.0, tighten
    return -1.0, tighten


def _conic_data(prog, eps, margin=None, radius=None, tighten=0.0):
    """Assemble Clarabel data (A, b, cones, q) for ``prog``.

    With ``margin=(lo, cap)`` an extra variable t in [lo, cap] replaces the
    fixed strict margin and is maximized; ``lo`` may be ``-inf``.  ``radius``
    bounds the Euclidean norm of the decision vector.
    """
    import clarabel

    nx = prog.ndof + (1 if margin is not None else 0)
    t_idx = prog.ndof
    blocks_A, blocks_b, cones = [], [], []
    for c in prog.constraints:
        if c.kind == "eq":
            r, k = c.expr.shape
            A = sp.lil_matrix((r * k, nx))
            for name, v in c.expr.terms.items():
                var = prog.vars[name]
                A[:, var.offset:var.offset + var.ndof] = -v.reshape(r * k, -1)
            blocks_A.append(A.tocsc())
            blocks_b.append(c.expr.const.reshape(-1))
            cones.append(clarabel.ZeroConeT(r * k))
            continue
        n = c.expr.shape[0]
        sign, shift = _psd_form(c, eps, tighten)
        ri, ci, w = _svec_index(n)
        const = sign * c.expr.const
        strict = c.kind in ("strict-neg", "strict-pos")
        if strict and margin is not None:
            shift = 0.0
        const = const - shift * np.eye(n)
        b = w * const[ri, ci]
        coo_r, coo_c, coo_v = [], [], []
        for name, v in c.expr.terms.items():
            var = prog.vars[name]
            dense = -(sign * w[:, None] * v[ri, ci, :])
            nz = np.nonzero(dense)
            coo_r.append(nz[0])
            coo_c.append(nz[1] + var.offset)
            coo_v.append(dense[nz])
        if strict and margin is not None:
            # s = b - A x must equal svec(sign*expr - t*I): A[:, t] = +svec(I)
            diag = np.nonzero(ri == ci)[0]
            coo_r.append(diag)
            coo_c.append(np.full(len(diag), t_idx))
            coo_v.append(np.ones(len(diag)))
        if coo_r:
            A = sp.coo_matrix((np.concatenate(coo_v), (np.concatenate(coo_r), np.concatenate(coo_c))),
                              shape=(len(b), nx)).tocsc()
        else:
            A = sp.csc_matrix((len(b), nx))
        blocks_A.append(A)
        blocks_b.append(b)
        cones.append(clarabel.PSDTriangleConeT(n))
    q = np.zeros(nx)
    if margin is not None:
        lo, cap = margin
        rows, vals, rhs = [], [], []
        if np.isfinite(lo):
            rows.append(len(rows)); vals.append(-1.0); rhs.append(-lo)
        if cap is not None and np.isfinite(cap):
            rows.append(len(rows)); vals.append(1.0); rhs.append(cap)
        if rows:
            blocks_A.append(sp.csc_matrix((vals, (rows, [t_idx] * len(rows))), shape=(len(rows), nx)))
            blocks_b.append(np.array(rhs))
            cones.append(clarabel.NonnegativeConeT(len(rows)))
        q[t_idx] = -1.0
    elif prog.objective is not None:
        for name, v in prog.objective.terms.items():
            var = prog.vars[name]
            q[var.offset:var.offset + var.ndof] += v[0, 0]
    if radius is not None and prog.ndof:
        # (radius, x) in the second-order cone
        A = sp.vstack([sp.csc_matrix((1, nx)),
                       sp.hstack([-sp.identity(prog.ndof), sp.csc_matrix((prog.ndof, nx - prog.ndof))])])
        blocks_A.append(A.tocsc())
        blocks_b.append(np.concatenate([[radius], np.zeros(prog.ndof)]))
        cones.append(clarabel.SecondOrderConeT(prog.ndof + 1))
    A = sp.vstack(blocks_A).tocsc() if blocks_A else sp.csc_matrix((0, nx))
    b = np.concatenate(blocks_b) if blocks_b else np.zeros(0)
    return A, b, cones, q


def _solve_clarabel(prog, eps, margin, radius, tol, tighten=0.0):
    import clarabel

    A, b, cones, q = _conic_data(prog, eps, margin, radius, tighten)
    nx = A.shape[1]
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = 500
    settings.tol_feas = tol
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_infeas_abs = tol
    settings.tol_infeas_rel = tol
    P = sp.csc_matrix((nx, nx))
    sol = clarabel.DefaultSolver(P, q, A, b, cones, settings).solve()
    return str(sol.status), np.asarray(sol.x, dtype=float)


def _solve_cvxpy(prog, eps, margin, radius, tol, tighten=0.0):
    import cvxpy as cp

    nx = prog.ndof
    x = cp.Variable(nx) if nx else None
    t = cp.Variable() if margin is not None else None
    cons = []

    def expr_of(e):
        out = e.const
        for name, v in e.terms.items():
            var = prog.vars[name]
            r, c, nd = v.shape
            lin = v.reshape(r * c, nd) @ x[var.offset:var.offset + var.ndof]
            out = out + cp.reshape(lin, (r, c), order="C")
        return out

    for c in prog.constraints:
        e = expr_of(c.expr)
        if c.kind == "eq":
            cons.append(e == 0)
            continue
        n = c.expr.shape[0]
        sign, shift = _psd_form(c, eps, tighten)
        strict = c.kind in ("strict-neg", "strict-pos")
        S = cp.Variable((n, n), symmetric=True)
        shift_term = t * np.eye(n) if (strict and t is not None) else shift * np.eye(n)
        cons += [S == sign * e - shift_term, S >> 0]
    if radius is not None and x is not None:
        cons.append(cp.norm(x, 2) <= radius)
    if t is not None:
        lo, cap = margin
        if np.isfinite(lo):
            cons.append(t >= lo)
        if cap is not None and np.isfinite(cap):
            cons.append(t <= cap)
        obj = cp.Maximize(t)
    elif prog.objective is not None:
        obj = cp.Minimize(expr_of(prog.objective)[0, 0])
    else:
        obj = cp.Minimize(0)
    problem = cp.Problem(obj, cons)
    solver = "CLARABEL" if "CLARABEL" in cp.installed_solvers() else None
    problem.solve(solver=solver)
    status = {"optimal": "Solved", "optimal_inaccurate": "AlmostSolved",
              "infeasible": "PrimalInfeasible", "infeasible_inaccurate": "AlmostPrimalInfeasible",
              "unbounded": "DualInfeasible"}.get(problem.status, str(problem.status))
    xv = np.zeros(nx)
    if x is not None and x.value is not None:
        xv = np.asarray(x.value, dtype=float)
    tv = [] if t is None else [float(t.value) if t.value is not None else -np.inf]
    return status, np.concatenate([xv, tv])


def backend_name(backend=None):
    name = (backend or os.environ.get("IMPIQC_SDP_BACKEND") or "clarabel").lower()
    if name not in ("clarabel", "cvxpy"):
        raise SolverError(f"unknown SDP backend {name!r}")
    return name


FEAS_RADIUS = 1e4


def solve(prog, eps=None, backend=None, margin_cap=None, tol=1e-8, radius=None):
    """Solve ``prog``; strict LMIs are imposed with margin ``eps``.

    Pure feasibility programs are posed as margin maximization over a ball of
    radius ``radius`` (default ``FEAS_RADIUS``): the strict margin t is a free
    variable, capped at ``margin_cap`` if given.  The program is feasible when
    the returned point passes the check at ``eps`` and infeasible when the
    solver certifies a maximal margin below ``eps``.  This avoids the
    unbounded, badly centred iterates a zero objective produces on homogeneous
    LMIs.  Programs with an objective keep the fixed margin ``eps``.
    """
    if eps is None:
        eps = prog.default_eps()
    if eps <= 0:
        raise ValueError("eps must be positive")
    name = backend_name(backend)
    feas = prog.objective is None
    has_strict = any(c.kind in ("strict-neg", "strict-pos") for c in prog.constraints)
    margin = None
    if feas and has_strict:
        cap = margin_cap if margin_cap is not None else 1.0
        margin = (-np.inf, max(cap, 10 * eps))
        if radius is None:
            radius = FEAS_RADIUS
    runner = _solve_clarabel if name == "clarabel" else _solve_cvxpy
    start = time.perf_counter()
    tighten = 0.0
    for attempt in range(3):
        try:
            raw, x = runner(prog, eps, margin, radius, tol, tighten)
        except Exception as exc:  # backend failures are reported, not raised
            return SolveResult("error", message=f"{type(exc).__name__}: {exc}",
                               solve_time=time.perf_counter() - start, eps=eps)
        elapsed = time.perf_counter() - start
        if raw == "PrimalInfeasible" and attempt == 0:
            return SolveResult("infeasible", message=raw, solve_time=elapsed, eps=eps)
        if raw == "DualInfeasible":
            return SolveResult("error", message="objective unbounded below", solve_time=elapsed, eps=eps)
        xp = x[:prog.ndof]
        if not np.all(np.isfinite(xp)):
            return SolveResult("inaccurate", message=raw, solve_time=elapsed, eps=eps)
        ok, vmargin = prog.check(xp, eps)
        values = prog.unpack(xp)
        objective = (float(prog.objective.value(prog.split(xp))[0, 0])
                     if prog.objective is not None else float("nan"))
        if ok:
            return SolveResult("feasible", values, objective, vmargin, raw, elapsed, eps)
        if attempt == 0 and margin is not None and raw in ("Solved", "AlmostSolved") and x[-1] < eps / 2:
            return SolveResult("infeasible", message=f"{raw}: maximal margin {x[-1]:.3e} < eps",
                               margin=float(x[-1]), solve_time=elapsed, eps=eps)
        # The solver's relative accuracy can leave non-strict LMIs violated by
        # a hair at large scale; retry with those LMIs pushed inward.
        slack = prog.nonstrict_violation(xp)
        if not (0 < slack and vmargin >= eps / 2 and raw in ("Solved", "AlmostSolved")):
            break
        tighten = max(10 * (slack + tighten), eps)
    return SolveResult("inaccurate", values, objective, vmargin, raw, elapsed, eps)


BACKOFF = (1e-6, 1e-5, 1e-4, 1e-3, 1e-2)


def minimize_gain(prog, g, eps=None, backend=None):
    """Minimize the scalar ``g`` (standing for gamma squared) subject to ``prog``.

    Returns ``(gamma, result)``; gamma is the square root of ``g`` at the
    verified point, so it is a certified bound rather than a solver estimate.
    The optimum sits on the boundary of the strict LMIs, where round-off can
    break verification; then g is backed off by a small relative amount and a
    margin-maximizing feasibility problem is solved with g fixed.
    """
    prog.add(g, "nonneg", "g>=0")
    prog.minimize(g)
    res = solve(prog, eps, backend)
    if res.status not in ("feasible", "inaccurate") or not res.values:
        return float("nan"), res
    gstar = float(g.value(prog.split(_pack(prog, res.values)))[0, 0])
    first = res
    if not res.feasible:
        scale = max(FEAS_RADIUS, 10 * float(np.max(np.abs(_pack(prog, res.values)))))
        for delta in BACKOFF:
            fixed = prog.copy()
            fixed.objective = None
            fixed.add(g - np.array([[gstar * (1 + delta) + 1e-3 * delta]]), "eq", "g-fixed")
            res = solve(fixed, eps, backend, radius=scale)
            if res.feasible:
                res.solve_time += first.solve_time
                res.objective = float(res.values[g_name(prog, g)])
                break
        else:
            return float("nan"), first
    gval = float(g.value(prog.split(_pack(prog, res.values)))[0, 0])
    return float(np.sqrt(max(gval, 0.0))), res


def g_name(prog, g):
    (name,) = g.terms
    return name


def _pack(prog, values):
    x = np.zeros(prog.ndof)
    for name, v in prog.vars.items():
        val = values[name]
        if v.kind == "sym":
            x[v.offset:v.offset + v.ndof] = symmetrize(val)[np.triu_indices(v.shape[0])]
        elif v.kind == "full":
            x[v.offset:v.offset + v.ndof] = np.asarray(val).reshape(-1)
        else:
            x[v.offset] = float(val)
    return x
