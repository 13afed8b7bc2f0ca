"""Exact renormalisation of pair-correlation coefficients.

The coefficients satisfy, for every displacement z,

    nu[a, b](z) = (1/lam) * sum over c, d, t in T[a, c], s in T[b, d] of nu[c, d]((z + t - s) / lam)

On the core |z| <= R = D / (lam - 1) this closes into a finite homogeneous
linear system (the self-consistency part); outside the core every argument
is strictly smaller in modulus and the relation is a recursion.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import linalg
from .inflation import DisplacementStructure, InflationRule, RuleError, displacement_sets, perron_data
from .patch import Coords, generate_patch, harvest_differences, lattice_basis
from .quadratic import QuadElement

# float-mode positions are identified on this grid; distinct support points
# are far apart, while accumulated rounding stays many orders below it
KEY_SCALE = 1e6


class InconsistencyError(RuntimeError):
    """The renormalisation system has no admissible solution."""


def core_radius(disp: DisplacementStructure, lam):
    """``R = D / (lam - 1)`` with D the largest spread between two offsets."""
    if float(lam) <= 1:
        raise RuleError(f"inflation multiplier must exceed 1, got {float(lam)}")
    return disp.max_spread() / (lam - 1)


def _fkey(x: float) -> int:
    return int(round(float(x) * KEY_SCALE))


# -- support ------------------------------------------------------------------------


def seed_support(rule: InflationRule, radius, seed=None, exact: bool = True) -> dict:
    """Displacement sets ``S[a, b]`` within ``radius`` harvested from fixed-point patches.

    The patch is inflated further until the harvest no longer changes.
    """
    r = float(radius)
    steps = 1
    patch = generate_patch(rule, seed, steps)
    while min(-patch.span()[0], patch.span()[1]) < 2 * r + 2:
        steps += 1
        patch = generate_patch(rule, patch.seed, steps)
    def signature(h):
        return h if patch.exact else {p: {_fkey(z) for z in zs} for p, zs in h.items()}

    current = harvest_differences(patch, r)
    while True:
        steps += 1
        patch = generate_patch(rule, patch.seed, steps)
        nxt = harvest_differences(patch, r)
        if signature(nxt) == signature(current):
            break
        current = nxt
        if len(patch) > 5_000_000:
            raise RuleError("support harvest did not stabilise")
    support = {(a, b): set() for a in rule.alphabet for b in rule.alphabet}
    for pair, zs in current.items():
        support[pair] = set(zs) if exact or not patch.exact else {float(z) for z in zs}
    return support


class _Module:
    """Membership test for the Z-span of the tile lengths."""

    def __init__(self, lengths: Iterable[QuadElement]):
        lengths = list(lengths)
        d = next((v.d for v in lengths if not v.is_rational()), lengths[0].d)
        den = math.lcm(*(v.ints[2] for v in lengths))
        self.coords = Coords(d, den)
        self.basis = lattice_basis([self.coords.encode(v) for v in lengths])

    def __contains__(self, z: QuadElement) -> bool:
        try:
            a, b = self.coords.encode(z)
        except ValueError:
            return False
        if len(self.basis) == 2:
            (p, q), (r, s) = self.basis
            det = p * s - q * r
            u, v = a * s - b * r, p * b - q * a
            return u % det == 0 and v % det == 0
        (p, q), = self.basis
        if p:
            return a % p == 0 and a // p * q == b
        return a == 0 and b % q == 0


# -- system -------------------------------------------------------------------------


@dataclass
class RenormSystem:
    rule: InflationRule
    disp: DisplacementStructure
    lam: object
    exact: bool
    radius: object
    support: dict
    unknowns: list
    index: dict
    rows: list
    symmetric: bool
    shifts: dict = field(repr=False, default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.unknowns)

    def key(self, z):
        return z if self.exact else _fkey(z)

    def terms(self, a: str, b: str, z) -> list:
        """``(c, d, w)`` with w = (z + t - s) / lam for every term of the relation."""
        inv = self.shifts["inv"]
        out = []
        for (c, d), diffs in self.shifts[a, b]:
            for delta in diffs:
                out.append((c, d, (z + delta) * inv))
        return out

    def one(self):
        return QuadElement(1, 0, self.lam.d) if self.exact else 1.0


def _shift_table(rule: InflationRule, disp: DisplacementStructure, exact: bool) -> dict:
    table = {}
    for a in rule.alphabet:
        for b in rule.alphabet:
            entries = []
            for c in rule.alphabet:
                for d in rule.alphabet:
                    diffs = [t - s for t in disp.T[a, c] for s in disp.T[b, d]]
                    if not exact:
                        diffs = [float(x) for x in diffs]
                    if diffs:
                        entries.append(((c, d), diffs))
            table[a, b] = entries
    return table


def _resolve_mode(rule: InflationRule, mode: str) -> bool:
    if mode not in ("exact", "float"):
        raise ValueError(f"mode must be 'exact' or 'float', got {mode!r}")
    pf = perron_data(rule)
    if mode == "exact" and not pf.exact:
        warnings.warn(f"multiplier of {rule.name!r} is not quadratic; using float mode", RuntimeWarning)
        return False
    return mode == "exact"


def build_system(
    rule: InflationRule,
    disp: DisplacementStructure | None = None,
    support: dict | None = None,
    *,
    mode: str = "exact",
    support_mode: str = "pairwise",
    extra_positions: Iterable = (),
    symmetric: bool = True,
    seed=None,
) -> RenormSystem:
    """Self-consistency equations on the core ``|z| <= R``.

    ``support_mode`` selects the unknowns: ``"pairwise"`` uses S[a, b] for
    each pair, ``"common"`` the union over all pairs, ``"free"`` every point
    of the (rank one) length module inside the core.  ``extra_positions``
    are added to every pair.  Relations are also imposed at core points
    outside the support, where the left side is zero.
    """
    exact = _resolve_mode(rule, mode)
    pf = perron_data(rule)
    disp = disp or displacement_sets(rule)
    if exact:
        lam = pf.lam_exact
        radius = core_radius(disp, lam)
    else:
        lam = pf.lam
        disp = DisplacementStructure(disp.alphabet, {k: tuple(float(t) for t in v) for k, v in disp.T.items()},
                                     lam, False)
        radius = float(core_radius(disp, lam))
    fr = float(radius)
    letters = rule.alphabet
    key = (lambda z: z) if exact else _fkey

    def inside(z) -> bool:
        return abs(z) <= radius if exact else abs(z) <= fr + 1e-9

    if support_mode == "free":
        lengths = list(pf.lengths.values())
        if not exact or len(_Module(lengths).basis) != 1:
            raise RuleError("free support needs an exact rank-one length module")
        gen = _Module(lengths)
        (ga, gb), = gen.basis
        g = gen.coords.decode(ga, gb)
        n = int(math.floor(fr / float(g) + 1e-9))
        pts = {g * k for k in range(-n, n + 1)}
        support = {(a, b): set(pts) for a in letters for b in letters}
    else:
        if support is None:
            support = seed_support(rule, fr, seed, exact)
        support = {p: {z for z in zs if inside(z)} for p, zs in support.items()}
        if support_mode == "common":
            union = set().union(*support.values())
            support = {(a, b): set(union) for a in letters for b in letters}
        elif support_mode != "pairwise":
            raise ValueError(f"unknown support mode {support_mode!r}")
    for z in extra_positions:
        z = z if exact else float(z)
        if inside(z):
            for p in support:
                support[p].add(z)

    unknowns = []
    for a in letters:
        for b in letters:
            for z in sorted(support.get((a, b), ()), key=float):
                unknowns.append((a, b, z))
    index = {(a, b, key(z)): i for i, (a, b, z) in enumerate(unknowns)}
    shifts = _shift_table(rule, disp, exact)
    shifts["inv"] = lam.inverse() if exact else 1.0 / lam
    system = RenormSystem(rule, disp, lam, exact, radius, support, unknowns, index, [], symmetric, shifts)
    one = system.one()
    inv = shifts["inv"]

    def rhs_row(a, b, z) -> dict:
        row: dict = {}
        for c, d, w in system.terms(a, b, z):
            j = index.get((c, d, key(w)))
            if j is not None:
                new = row.get(j, 0) - inv
                if new:
                    row[j] = new
                else:
                    row.pop(j)
        return row

    rows = []
    for i, (a, b, z) in enumerate(unknowns):
        row = rhs_row(a, b, z)
        row[i] = row.get(i, 0) + one
        rows.append({j: v for j, v in row.items() if v})
    # relations at core points off the support: 0 = right-hand side
    lam_ = lam
    for a in letters:
        for b in letters:
            seen = set()
            for c, d, w in unknowns:
                for (c2, d2), diffs in shifts[a, b]:
                    if (c2, d2) != (c, d):
                        continue
                    for delta in diffs:
                        z = lam_ * w - delta
                        k = key(z)
                        if k in seen or (a, b, k) in index or not inside(z):
                            continue
                        seen.add(k)
                        row = rhs_row(a, b, z)
                        if row:
                            rows.append(row)
    if symmetric:
        for i, (a, b, z) in enumerate(unknowns):
            j = index.get((b, a, key(-z)))
            if j is None:
                rows.append({i: one})
            elif j > i:
                rows.append({i: one, j: -one})
    system.rows = rows
    return system


def solve_selfconsistency(system: RenormSystem) -> list:
    """Basis of the solution space (list of vectors over the unknowns)."""
    n = system.size
    if n == 0:
        raise InconsistencyError("no unknowns in the core")
    if system.exact:
        basis = linalg.nullspace(system.rows, n, system.one())
    else:
        dense = np.zeros((len(system.rows), n))
        for r, row in enumerate(system.rows):
            for j, v in row.items():
                dense[r, j] = float(v)
        null = linalg.float_nullspace(dense, tol=1e-10)
        basis = [null[:, k] for k in range(null.shape[1])]
    if not basis:
        raise InconsistencyError("self-consistency system has only the zero solution")
    return basis


# -- tables -------------------------------------------------------------------------


def normalize(system: RenormSystem, basis: list) -> CorrelationTable:
    """Scale the solution so nu[a, a](0) = freq(a) and nu[a, b](0) = 0 for a != b.

    If these conditions leave freedom, the particular solution with the free
    coefficients set to zero is returned and the remaining directions are kept
    in ``table.extra``.
    """
    pf = perron_data(system.rule)
    letters = system.rule.alphabet
    zero = system.one() * 0
    cons, rhs = [], []
    for a in letters:
        for b in letters:
            i = system.index.get((a, b, system.key(zero)))
            if i is None:
                continue
            cons.append([v[i] for v in basis])
            target = pf.frequencies[a] if a == b else zero
            rhs.append(target if system.exact else float(target))
    dim = len(basis)
    if system.exact:
        one = system.one()
        aug = []
        for row, r in zip(cons, rhs):
            d = {j: v for j, v in enumerate(row) if v}
            if r:
                d[dim] = r
            aug.append(d)
        reduced, pcols = linalg.row_reduce(aug, dim + 1)
        if dim in pcols:
            raise InconsistencyError("no solution matches the letter frequencies")
        coef = [zero] * dim
        for prow, pc in zip(reduced, pcols):
            coef[pc] = prow.get(dim, zero)
        extra_dirs = linalg.nullspace([{j: v for j, v in enumerate(row) if v} for row in cons], dim, one)
        combine = lambda c: [sum((c[k] * basis[k][i] for k in range(dim) if c[k]), zero)
                             for i in range(system.size)]
    else:
        k = np.array(cons, dtype=float).reshape(len(cons), dim)
        coef, *_ = np.linalg.lstsq(k, np.array(rhs, dtype=float), rcond=None)
        if np.abs(k @ coef - rhs).max(initial=0) > 1e-9:
            raise InconsistencyError("no solution matches the letter frequencies")
        null = linalg.float_nullspace(k, tol=1e-10) if len(cons) else np.eye(dim)
        extra_dirs = [null[:, j] for j in range(null.shape[1])]
        mat = np.array(basis).T
        combine = lambda c: list(mat @ np.asarray(c, dtype=float))
    values = combine(coef)
    extra = [combine(c) for c in extra_dirs]
    return CorrelationTable(system, values, extra, dim)


class CorrelationTable:
    """Normalised pair-correlation coefficients with recursive evaluation beyond the core.

    Lookups are memoised; the cache only ever receives deterministic values,
    so concurrent callers at worst repeat work.
    """

    def __init__(self, system: RenormSystem, values: list, extra: list | None = None, dimension: int = 1):
        self.system = system
        self.rule = system.rule
        self.exact = system.exact
        self.lam = system.lam
        self.core_radius = system.radius
        self.dimension = dimension
        self.core = {}
        for (a, b, z), v in zip(system.unknowns, values):
            self.core[a, b, system.key(z)] = v
        self.extra = [
            {(a, b, system.key(z)): v for (a, b, z), v in zip(system.unknowns, vec)} for vec in (extra or [])
        ]
        self._zero = system.one() * 0
        self._memo: dict = {}
        self._harvest = None
        self._prune = self._make_pruner()

    @property
    def support(self) -> dict:
        return self.system.support

    def _make_pruner(self):
        if not self.exact:
            return None
        pf = perron_data(self.rule)
        module = _Module(pf.lengths.values())
        lam = self.lam
        if lam.is_rational():
            return lambda z: z in module
        lam_star = abs(float(lam.star()))
        if lam_star >= 1:
            return lambda z: z in module
        offsets = [float(t.star()) for ts in self.system.disp.T.values() for t in ts]
        d_star = max(offsets) - min(offsets)
        bound = max([abs(float(z.star())) for (_, _, z), v in self.core.items() if v] + [d_star / (1 - lam_star)])
        bound = bound * (1 + 1e-9) + 1e-9
        return lambda z: abs(float(z.star())) <= bound and z in module

    def _inside(self, z) -> bool:
        if self.exact:
            return abs(z) <= self.core_radius
        return abs(z) <= float(self.core_radius) + 1e-9

    def use_harvested_support(self, radius: float, seed=None) -> None:
        """Prune float-mode recursion with displacement sets counted in a patch."""
        self._harvest = (float(radius), seed_support(self.rule, radius, seed, exact=False))
        self._harvest = (float(radius), {p: {_fkey(z) for z in zs} for p, zs in self._harvest[1].items()})

    def evaluate(self, a: str, b: str, z):
        """``nu[a, b](z)``; zero off the support."""
        if not self.exact:
            z = float(z)
        elif not isinstance(z, QuadElement):
            z = QuadElement(z, 0, self.system.lam.d)
        key = self.system.key(z)
        if self._inside(z):
            return self.core.get((a, b, key), self._zero)
        memo_key = (a, b, key)
        if memo_key in self._memo:
            return self._memo[memo_key]
        if self.exact:
            if not self._prune(z):
                return self._zero
        else:
            if self._harvest is None or abs(z) > self._harvest[0]:
                raise ValueError(f"float-mode evaluation at |z| = {abs(z):.4g} needs a harvested support; "
                                 f"call use_harvested_support(radius)")
            if key not in self._harvest[1].get((a, b), ()):
                return self._zero
        total = self._zero
        for c, d, w in self.system.terms(a, b, z):
            v = self.evaluate(c, d, w)
            if v:
                total = total + v
        value = total * self.system.shifts["inv"]
        self._memo[memo_key] = value
        return value

    def __call__(self, a: str, b: str, z):
        return self.evaluate(a, b, z)

    def eta_total(self, z):
        """Sum of all nu[a, b](z), i.e. eta(z) / dens."""
        letters = self.rule.alphabet
        total = self._zero
        for a in letters:
            for b in letters:
                total = total + self.evaluate(a, b, z)
        return total

    def residual(self, a: str, b: str, z):
        """Left minus right side of the renormalisation relation at (a, b, z)."""
        rhs = self._zero
        for c, d, w in self.system.terms(a, b, z):
            rhs = rhs + self.evaluate(c, d, w)
        return self.evaluate(a, b, z) - rhs * self.system.shifts["inv"]

    def candidate_points(self, radius) -> dict:
        """All positions within ``radius`` where some coefficient can be non-zero."""
        letters = self.rule.alphabet
        shifts = self.system.shifts
        lam = self.lam
        r = float(radius)
        points = {p: {} for p in ((a, b) for a in letters for b in letters)}
        frontier = []
        for a, b, z in self.system.unknowns:
            k = self.system.key(z)
            if self.core.get((a, b, k)):
                if abs(float(z)) <= r + 1e-9:
                    points[a, b][k] = z
                frontier.append((a, b, z))
        while frontier:
            nxt = []
            for c, d, w in frontier:
                for a in letters:
                    for b in letters:
                        for (c2, d2), diffs in shifts[a, b]:
                            if (c2, d2) != (c, d):
                                continue
                            for delta in diffs:
                                z = lam * w - delta
                                if abs(float(z)) > r + 1e-9 or self._inside(z):
                                    continue
                                k = self.system.key(z)
                                if k not in points[a, b]:
                                    points[a, b][k] = z
                                    nxt.append((a, b, z))
            frontier = nxt
        return {p: list(v.values()) for p, v in points.items()}

    def support_points(self, radius) -> dict:
        """Positions with non-zero coefficient within ``radius``, sorted."""
        out = {}
        for (a, b), zs in self.candidate_points(radius).items():
            keep = [z for z in zs if self.evaluate(a, b, z)]
            out[a, b] = sorted(keep, key=float)
        return out

    def rows(self, radius) -> list:
        """``(alpha, beta, z, nu)`` over the non-zero coefficients, sorted by alpha, beta, z."""
        order = self.rule.index
        out = []
        for (a, b), zs in self.support_points(radius).items():
            for z in zs:
                out.append((a, b, z, self.evaluate(a, b, z)))
        out.sort(key=lambda r: (order[r[0]], order[r[1]], float(r[2])))
        return out


def solve_correlations(rule: InflationRule, mode: str = "exact", **kwargs) -> CorrelationTable:
    """Build, solve and normalise the self-consistency system in one call."""
    system = build_system(rule, mode=mode, **kwargs)
    basis = solve_selfconsistency(system)
    return normalize(system, basis)


# -- output -------------------------------------------------------------------------

CSV_COLUMNS = ("alpha", "beta", "z_exact", "z_float", "nu_exact", "nu_float")


def _fmt_exact(v) -> str:
    if isinstance(v, (QuadElement, Fraction, int)):
        return str(v)
    return ""


def format_rows(rows: Iterable) -> str:
    """CSV text for ``(alpha, beta, z, nu)`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for a, b, z, v in rows:
        w.writerow([a, b, _fmt_exact(z), f"{float(z):.15g}", _fmt_exact(v), f"{float(v):.15g}"])
    return buf.getvalue()
