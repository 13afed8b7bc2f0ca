"""Exact sparse Gaussian elimination over a field.

Works with any element type supporting ``+ - * /`` and truthiness for the
zero test: :class:`fractions.Fraction`, :class:`~aperiodica.quadratic.QuadElement`.
Rows are dicts ``{column: value}`` with zero entries omitted.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

Row = dict


def _axpy(target: Row, factor, source: Row) -> None:
    """target -= factor * source, dropping exact zeros."""
    for col, val in source.items():
        new = target.get(col, 0) - factor * val
        if new:
            target[col] = new
        else:
            target.pop(col, None)


def row_reduce(rows: Iterable[Row], ncols: int) -> tuple[list[Row], list[int]]:
    """Reduced row echelon form of a sparse matrix.

    Returns the non-zero reduced rows (each normalised to a unit pivot) and
    their pivot columns, sorted by pivot column.
    """
    work = [dict(r) for r in rows if r]
    pivots: dict[int, Row] = {}
    for col in range(ncols):
        cands = [i for i, r in enumerate(work) if col in r]
        if not cands:
            continue
        best = min(cands, key=lambda i: len(work[i]))
        prow = work.pop(best)
        inv = 1 / prow[col]
        prow = {c: v * inv for c, v in prow.items()}
        for r in work:
            if col in r:
                _axpy(r, r[col], prow)
        for r in pivots.values():
            if col in r:
                _axpy(r, r[col], prow)
        pivots[col] = prow
        work = [r for r in work if r]
    cols = sorted(pivots)
    return [pivots[c] for c in cols], cols


def nullspace(rows: Iterable[Row], ncols: int, one=None) -> list[list]:
    """Basis of the right nullspace ``{x : A x = 0}`` as dense lists.

    ``one`` is the multiplicative identity of the field (defaults to ``1``);
    free entries of each basis vector are set to it.
    """
    if one is None:
        one = 1
    zero = one - one
    reduced, pcols = row_reduce(rows, ncols)
    pset = set(pcols)
    free = [c for c in range(ncols) if c not in pset]
    basis = []
    for f in free:
        vec = [zero] * ncols
        vec[f] = one
        for prow, pc in zip(reduced, pcols):
            v = prow.get(f)
            if v:
                vec[pc] = -v
        basis.append(vec)
    return basis


def rank(rows: Iterable[Row], ncols: int) -> int:
    return len(row_reduce(rows, ncols)[1])


def solve_unique(rows: Sequence[Row], rhs: Sequence, ncols: int, one=None):
    """Solve ``A x = b`` exactly; return ``None`` if singular or inconsistent."""
    if one is None:
        one = 1
    aug = []
    for r, b in zip(rows, rhs):
        row = dict(r)
        if b:
            row[ncols] = b
        aug.append(row)
    reduced, pcols = row_reduce(aug, ncols + 1)
    if ncols in pcols or len(pcols) < ncols:
        return None
    zero = one - one
    return [prow.get(ncols, zero) for prow in reduced]


def dense_rows(matrix) -> list[Row]:
    """Convert a dense 2D sequence to sparse rows."""
    return [{j: v for j, v in enumerate(row) if v} for row in matrix]


def float_nullspace(a: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal nullspace basis (columns) via SVD."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] == 0:
        return np.eye(a.shape[1])
    _, s, vh = np.linalg.svd(a)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    r = int(np.sum(s > tol * scale))
    return vh[r:].conj().T
