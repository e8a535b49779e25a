"""Dense real matrix helpers used when assembling LMIs.

Plain ``numpy.ndarray`` objects are used throughout; empty matrices (a zero
row or column count) are legal everywhere and compose like any other block.
"""

import numpy as np

from .errors import DimensionError, SchurPivotError

DEFAULT_RANK_TOL = 1e-9


def as_mat(a, rows=None, cols=None):
    """Return ``a`` as a finite 2-D float array.

    ``None`` becomes a zero matrix of the requested shape.  Scalars and 1-D
    sequences are promoted to 1x1 and column form respectively only when no
    shape is given; otherwise their size must match.
    """
    if a is None:
        if rows is None or cols is None:
            raise DimensionError("cannot infer shape of an omitted matrix")
        return np.zeros((rows, cols))
    m = np.array(a, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    elif m.ndim == 1:
        if rows is not None and cols is not None:
            m = m.reshape(rows, cols)
        elif m.size == 0:
            m = m.reshape(rows or 0, cols or 0)
        else:
            m = m.reshape(1, -1)
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of ndim {m.ndim}")
    if m.size == 0 and (rows is not None or cols is not None):
        m = np.zeros((m.shape[0] if rows is None else rows,
                      m.shape[1] if cols is None else cols))
    if rows is not None and m.shape[0] != rows:
        raise DimensionError(f"expected {rows} rows, got {m.shape[0]}")
    if cols is not None and m.shape[1] != cols:
        raise DimensionError(f"expected {cols} columns, got {m.shape[1]}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    return m


def symmetrize(m):
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def kron(a, b):
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def blockdiag(parts):
    parts = [np.atleast_2d(np.asarray(p, dtype=float)) for p in parts]
    rows = sum(p.shape[0] for p in parts)
    cols = sum(p.shape[1] for p in parts)
    out = np.zeros((rows, cols))
    r = c = 0
    for p in parts:
        out[r:r + p.shape[0], c:c + p.shape[1]] = p
        r += p.shape[0]
        c += p.shape[1]
    return out


def blockmat(blocks, row_sizes=None, col_sizes=None):
    """Assemble a block matrix where ``None`` or ``0`` entries become zeros.

    Unlike ``np.block`` this copes with zero-sized blocks, provided the block
    sizes can be inferred from some entry in each row/column or are given.
    """
    nr = len(blocks)
    nc = len(blocks[0]) if nr else 0
    row_sizes = list(row_sizes) if row_sizes is not None else [None] * nr
    col_sizes = list(col_sizes) if col_sizes is not None else [None] * nc
    for i, row in enumerate(blocks):
        if len(row) != nc:
            raise DimensionError("ragged block rows")
        for j, b in enumerate(row):
            if b is None or (np.isscalar(b) and b == 0):
                continue
            b = np.atleast_2d(np.asarray(b, dtype=float))
            for sizes, k, s in ((row_sizes, i, b.shape[0]), (col_sizes, j, b.shape[1])):
                if sizes[k] is None:
                    sizes[k] = s
                elif sizes[k] != s:
                    raise DimensionError(f"block ({i},{j}) has inconsistent size")
    if any(s is None for s in row_sizes) or any(s is None for s in col_sizes):
        raise DimensionError("could not infer all block sizes")
    out = np.zeros((sum(row_sizes), sum(col_sizes)))
    r0 = np.concatenate([[0], np.cumsum(row_sizes)]).astype(int)
    c0 = np.concatenate([[0], np.cumsum(col_sizes)]).astype(int)
    for i, row in enumerate(blocks):
        for j, b in enumerate(row):
            if b is None or (np.isscalar(b) and b == 0):
                continue
            out[r0[i]:r0[i + 1], c0[j]:c0[j + 1]] = b
    return out


def vstack(parts, cols=None):
    parts = [np.atleast_2d(np.asarray(p, dtype=float)) for p in parts]
    if not parts:
        return np.zeros((0, cols or 0))
    return blockmat([[p] for p in parts], col_sizes=[cols if cols is not None else parts[0].shape[1]])


def hstack(parts, rows=None):
    parts = [np.atleast_2d(np.asarray(p, dtype=float)) for p in parts]
    if not parts:
        return np.zeros((rows or 0, 0))
    return blockmat([parts], row_sizes=[rows if rows is not None else parts[0].shape[0]])


def lambda_max(m):
    m = symmetrize(m)
    if m.size == 0:
        return -np.inf
    return float(np.linalg.eigvalsh(m)[-1])


def lambda_min(m):
    m = symmetrize(m)
    if m.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(m)[0])


def nullspace_basis(m, tol=DEFAULT_RANK_TOL):
    """Orthonormal basis of the numerical kernel of ``m``.

    Singular values below ``tol * sigma_max`` count as zero.  A full column
    rank ``m`` yields a matrix with zero columns.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = np.atleast_2d(np.asarray(m, dtype=float))
    ncols = m.shape[1]
    if m.shape[0] == 0 or not np.any(m):
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(s > tol * s[0]))
    return vt[rank:].T.copy()


def assert_negdef(m, margin=0.0):
    """True iff the largest eigenvalue of the symmetric ``m`` is <= -margin.

    An empty matrix is vacuously negative definite.
    """
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if m.size == 0:
        return True
    lam = lambda_max(m)
    if margin == 0:
        return lam < 0
    return lam <= -margin


def assert_posdef(m, margin=0.0):
    return assert_negdef(-np.asarray(m, dtype=float), margin)


def schur_reduce(m, split):
    """Schur complement of ``m`` with respect to its trailing block ``m[split:, split:]``."""
    m = symmetrize(m)
    a = m[:split, :split]
    b = m[:split, split:]
    d = m[split:, split:]
    if d.size == 0:
        return a
    eig = np.linalg.eigvalsh(d)
    scale = max(1.0, float(np.max(np.abs(eig))))
    if not (np.all(eig < -1e-12 * scale) or np.all(eig > 1e-12 * scale)):
        raise SchurPivotError("trailing block is singular or indefinite")
    return symmetrize(a - b @ np.linalg.solve(d, b.T))


def mpow(a, k):
    return np.linalg.matrix_power(np.asarray(a, dtype=float), k)


def spectral_radius(a):
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(a))))
