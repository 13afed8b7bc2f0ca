"""The algebra generated by the digit matrices of an inflation.

Digit matrices have 0/1 entries, so the span closure is computed exactly
over the rationals; the dimension is never a numerical estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg
from .inflation import DisplacementStructure, InflationRule, detect_bar_swap


@dataclass(frozen=True)
class MatrixAlgebraBasis:
    basis: tuple[np.ndarray, ...]
    n: int
    generators: tuple[np.ndarray, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def contains(self, m: np.ndarray) -> bool:
        span = _Span(self.n * self.n)
        for b in self.basis:
            span.add(b)
        return not span.reduce(m)

    def closure_residual(self) -> float:
        """Largest least-squares residual of basis products projected onto the span."""
        if not self.basis:
            return 0.0
        a = np.array([b.ravel() for b in self.basis], dtype=float).T
        worst = 0.0
        for x in self.basis:
            for y in self.basis:
                p = (x @ y).ravel().astype(float)
                coef, *_ = np.linalg.lstsq(a, p, rcond=None)
                worst = max(worst, float(np.abs(a @ coef - p).max()))
        return worst


class _Span:
    """Incremental exact row echelon form over Q for flattened integer matrices."""

    def __init__(self, ncols: int):
        self.ncols = ncols
        self.pivots: dict[int, dict] = {}

    def reduce(self, m) -> dict:
        row = {i: Fraction(int(v)) for i, v in enumerate(np.asarray(m).ravel()) if v}
        for col in sorted(self.pivots):
            if col in row:
                linalg._axpy(row, row[col], self.pivots[col])
        return row

    def add(self, m) -> bool:
        row = self.reduce(m)
        if not row:
            return False
        col = min(row)
        inv = 1 / row[col]
        row = {c: v * inv for c, v in row.items()}
        for prow in self.pivots.values():
            if col in prow:
                linalg._axpy(prow, prow[col], row)
        self.pivots[col] = row
        return True


def ida_basis(disp: DisplacementStructure) -> MatrixAlgebraBasis:
    """Span closure of the digit matrices under two-sided multiplication."""
    gens = [m for m in disp.digit_matrices().values() if m.any()]
    if not gens:
        raise ValueError("no non-zero digit matrices")
    n = gens[0].shape[0]
    span = _Span(n * n)
    basis: list[np.ndarray] = []
    frontier = []
    for g in gens:
        if span.add(g):
            basis.append(g)
            frontier.append(g)
    while frontier:
        new = []
        for x in frontier:
            for g in gens:
                for prod in (g @ x, x @ g):
                    if span.add(prod):
                        basis.append(prod)
                        new.append(prod)
            if len(basis) == n * n:
                break
        frontier = new if len(basis) < n * n else []
    return MatrixAlgebraBasis(tuple(basis), n, tuple(gens))


def is_irreducible(alg: MatrixAlgebraBasis) -> bool:
    """Burnside: a subalgebra of Mat(n, C) acts irreducibly iff it is all of it."""
    return alg.dimension == alg.n * alg.n


def common_kernel(disp: DisplacementStructure) -> list[tuple[int, ...]]:
    """Integer basis vectors of the intersection of the kernels of all digit matrices."""
    mats = list(disp.digit_matrices().values())
    n = len(disp.alphabet)
    rows = [{j: Fraction(int(v)) for j, v in enumerate(r) if v} for m in mats for r in m]
    out = []
    for vec in linalg.nullspace(rows, n, Fraction(1)):
        den = math.lcm(*(v.denominator for v in vec))
        ints = [int(v * den) for v in vec]
        g = math.gcd(*ints) or 1
        ints = [x // g for x in ints]
        if next(x for x in ints if x) < 0:
            ints = [-x for x in ints]
        out.append(tuple(ints))
    return out


def cyclic_probe(alg: MatrixAlgebraBasis, probes: int = 100, seed: int = 0) -> int:
    """Smallest dimension of span{v, A v : A in the algebra} over random vectors v.

    A value below ``n`` exhibits a non-trivial invariant subspace.
    """
    rng = np.random.default_rng(seed)
    n = alg.n
    smallest = n
    for _ in range(probes):
        v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        vecs = np.array([v] + [b @ v for b in alg.basis])
        s = np.linalg.svd(vecs, compute_uv=False)
        smallest = min(smallest, int(np.sum(s > 1e-9 * s[0])))
    return smallest


def bar_swap_conjugator(rule: InflationRule) -> np.ndarray:
    """The involution ``(1/sqrt 2)[[1, 1], [1, -1]]`` coupling each letter with its bar partner.

    For an alphabet ordered as unbarred letters followed by their partners in
    the same order this is ``(1/sqrt 2)[[1, 1], [1, -1]] (x) 1``.
    """
    P = detect_bar_swap(rule)
    if P is None:
        raise ValueError(f"rule {rule.name!r} has no bar swap")
    idx = rule.index
    n = len(rule)
    t = np.zeros((n, n))
    r = 1 / np.sqrt(2)
    for x in rule.alphabet:
        i, j = idx[x], idx[P[x]]
        t[i, i] = r if i < j else -r
        t[i, j] = r
    return t


def block_forms(rule: InflationRule, disp: DisplacementStructure) -> dict:
    """Digit matrices conjugated by the bar-swap involution."""
    t = bar_swap_conjugator(rule)
    return {k: t @ m @ t for k, m in disp.digit_matrices().items()}


def ida_report(rule: InflationRule, disp: DisplacementStructure) -> dict:
    alg = ida_basis(disp)
    return {
        "rule": rule.name,
        "letters": list(rule.alphabet),
        "dimension": alg.dimension,
        "full_dimension": alg.n * alg.n,
        "irreducible": is_irreducible(alg),
        "common_kernel": [list(v) for v in common_kernel(disp)],
        "probe_min_cyclic_dimension": cyclic_probe(alg),
    }
