"""Spectral diagnostics for bar-swap extensions.

The odd sector under the bar swap is probed through signed correlations:
exactly via pattern-pair overlaps and triple frequencies, and empirically
through patch counting along a geometric sequence ``v * lam**n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy

from . import linalg
from .ida import ida_basis, is_irreducible
from .inflation import (
    InflationRule,
    RuleError,
    collar,
    detect_bar_swap,
    displacement_sets,
    inflate_word,
    legal_words,
    perron_data,
    quotient_by_bar_swap,
    substitution_matrix,
)
from .patch import Patch, generate_patch, return_modules, signed_correlation_at
from .quadratic import QuadElement

OVERLAP_PAIR_CAP = 10_000
NONDECAY_TOL = 0.02

PURITY_NOTE = (
    "assumes spectral purity of the odd sector for index-2 bar-swap extensions; "
    "non-decay then implies singular continuous spectrum there"
)


def _bar_swap(rule: InflationRule) -> dict[str, str]:
    P = detect_bar_swap(rule)
    if P is None:
        raise RuleError(f"rule {rule.name!r} has no bar swap")
    return P


def _as_word(rule: InflationRule, w) -> tuple[str, ...]:
    if isinstance(w, str):
        if w in rule.index:
            return (w,)
        w = tuple(w) if all(len(x) == 1 for x in rule.alphabet) else tuple(w.split())
    w = tuple(w)
    bad = [x for x in w if x not in rule.index]
    if bad:
        raise ValueError(f"unknown letters {bad} for rule {rule.name!r}")
    return w


def _exact_lengths(rule: InflationRule):
    pf = perron_data(rule)
    if not pf.exact:
        raise RuleError(f"rule {rule.name!r} needs an exact quadratic multiplier")
    d = pf.lam_exact.d
    return pf.lam_exact, {x: _quad(pf.lengths[x], d) for x in rule.alphabet}


def _quad(v, d: int) -> QuadElement:
    return v if isinstance(v, QuadElement) else QuadElement(v, 0, d)


# -- eta sectors -----------------------------------------------------------------------


def eta_pm(table, z):
    """Even and odd combinations ``(sum nu, sum w w' nu)`` of the pair correlations at z."""
    rule = table.system.rule
    _bar_swap(rule)
    w = rule.weights()
    plus = minus = None
    for a in rule.alphabet:
        for b in rule.alphabet:
            v = table(a, b, z)
            plus = v if plus is None else plus + v
            s = v if w[a] * w[b] > 0 else -v
            minus = s if minus is None else minus + s
    return plus, minus


def tm_split_step(values, n: int, sign: int = -1):
    """``eta(2n) = eta(n)`` and ``eta(2n+1) = sign * (eta(n) + eta(n+1)) / 2``."""
    return values[n], sign * (values[n] + values[n + 1]) / 2


def tm_eta_sequence(table, n_max: int) -> dict[int, tuple]:
    """``(eta_plus(n), eta_minus(n))`` for ``|n| <= n_max`` from the halving recursion."""
    rule = table.system.rule
    _bar_swap(rule)
    if any(len(img) != 2 for img in rule.images.values()):
        raise RuleError("the halving recursion needs a constant-length-2 rule")
    seqs = []
    for k, sign in ((0, 1), (1, -1)):
        vals = {0: eta_pm(table, 0)[k], 1: eta_pm(table, 1)[k]}
        for n in range(1, n_max // 2 + 1):
            vals[2 * n] = vals[n]
            vals[2 * n + 1] = tm_split_step(vals, n, sign)[1]
        seqs.append(vals)
    out = {}
    for n in range(-n_max, n_max + 1):
        out[n] = (seqs[0][abs(n)], seqs[1][abs(n)])
    return out


# -- word frequencies ------------------------------------------------------------------


@dataclass(frozen=True)
class TriplePattern:
    word: tuple[str, ...]
    frequency: object
    inflation_image: tuple[str, ...]


def exact_word_frequencies(rule: InflationRule, k: int) -> dict[tuple[str, ...], object]:
    """Per-tile frequencies of legal k-words from the PF vector of the (k-1)-fold collared rule."""
    key = ("wordfreq", k)
    if key in rule._cache:
        return rule._cache[key]
    r = rule
    for _ in range(k - 1):
        r = collar(r)
    pf = perron_data(r)
    out = {r.words[x]: pf.frequencies[x] for x in r.alphabet}
    rule._cache[key] = out
    return out


def triple_frequencies(rule: InflationRule, canonical: bool = False) -> list[TriplePattern]:
    """Legal triples with their frequencies; ``canonical`` keeps one word per bar orbit."""
    freqs = exact_word_frequencies(rule, 3)
    idx = rule.index
    keep = None
    if canonical:
        P = _bar_swap(rule)
        keep = lambda w: idx[w[0]] < idx[P[w[0]]]  # noqa: E731
    out = []
    for w in legal_words(rule, 3):
        if keep is not None and not keep(w):
            continue
        out.append(TriplePattern(w, freqs[w], inflate_word(rule, w)))
    return out


# -- asymptotic overlaps ---------------------------------------------------------------


@dataclass
class OverlapResult:
    value: object | None
    determined: bool
    pairs: dict = field(default_factory=dict)

    def __float__(self) -> float:
        if self.value is None:
            raise ValueError("overlap undetermined")
        return float(self.value)


class _OverlapSystem:
    """Unknowns ``c(u, v)`` for minimal aligned pattern pairs, one equation per inflation."""

    def __init__(self, rule: InflationRule, cap: int = OVERLAP_PAIR_CAP):
        self.rule = rule
        self.P = _bar_swap(rule)
        self.lam, self.L = _exact_lengths(rule)
        self.cap = cap
        self.index: dict = {}
        self.pairs: list = []
        self.equations: list = []
        self.overflow = False

    def length(self, w):
        total = self.L[w[0]]
        for x in w[1:]:
            total = total + self.L[x]
        return total

    def canonical(self, u, v):
        P, idx = self.P, self.rule.index
        pu = tuple(P[x] for x in u)
        pv = tuple(P[x] for x in v)
        variants = [((u, v), 1), ((v, u), 1), ((pu, pv), 1), ((pv, pu), 1),
                    ((u, pv), -1), ((pv, u), -1), ((pu, v), -1), ((v, pu), -1)]
        return min(variants, key=lambda t: ([idx[x] for x in t[0][0]], [idx[x] for x in t[0][1]]))

    def decompose(self, u, v) -> list:
        """Split equal-length words at common tile boundaries into terms ``(length, sign | pair)``."""
        L, P = self.L, self.P
        out = []
        i = j = 0
        while i < len(u):
            x, y = u[i], v[j]
            if x == y or P[x] == y:
                out.append((L[x], 1 if x == y else -1))
                i += 1
                j += 1
                continue
            si, sj = i, j
            eu, ev = L[x], L[y]
            i += 1
            j += 1
            while eu != ev:
                if eu < ev:
                    eu = eu + L[u[i]]
                    i += 1
                else:
                    ev = ev + L[v[j]]
                    j += 1
            out.append((eu, (u[si:i], v[sj:j])))
        if j != len(v):
            raise ValueError("pattern words differ in length")
        return out

    def expression(self, u, v) -> tuple[object, dict]:
        """``c(u, v)`` as a constant plus a combination of unknowns."""
        total = self.length(u)
        if total != self.length(v):
            raise ValueError(f"patterns {''.join(u)} and {''.join(v)} have different lengths")
        const = total - total
        coeffs: dict[int, object] = {}
        for ell, term in self.decompose(u, v):
            w = ell / total
            if isinstance(term, int):
                const = const + w * term
            else:
                (cu, cv), sign = self.canonical(*term)
                k = self._unknown(cu, cv)
                coeffs[k] = coeffs.get(k, const - const) + w * sign
        return const, coeffs

    def _unknown(self, u, v) -> int:
        key = (u, v)
        if key not in self.index:
            self.index[key] = len(self.pairs)
            self.pairs.append(key)
        return self.index[key]

    def close(self) -> bool:
        done = 0
        while done < len(self.pairs):
            if len(self.pairs) > self.cap:
                self.overflow = True
                return False
            u, v = self.pairs[done]
            su, sv = inflate_word(self.rule, u), inflate_word(self.rule, v)
            self.equations.append(self.expression(su, sv))
            done += 1
        return True

    def solve(self) -> list | None:
        if not self.close():
            return None
        n = len(self.pairs)
        one = self.lam / self.lam
        rows, rhs = [], []
        for k, (const, coeffs) in enumerate(self.equations):
            row = {j: -c for j, c in coeffs.items() if c}
            row[k] = row.get(k, one - one) + one
            rows.append({j: c for j, c in row.items() if c})
            rhs.append(const)
        return linalg.solve_unique(rows, rhs, n, one)

    def evaluate(self, expr, sol):
        const, coeffs = expr
        for k, c in coeffs.items():
            const = const + c * sol[k]
        return const


def asymptotic_overlap(rule: InflationRule, p1, p2, cap: int = OVERLAP_PAIR_CAP) -> OverlapResult:
    """``lim (n+ - n-) / (n+ + n-)`` for the inflated patterns ``sigma^n(p1)`` and ``sigma^n(p2)``."""
    u, v = _as_word(rule, p1), _as_word(rule, p2)
    system = _OverlapSystem(rule, cap)
    expr = system.expression(u, v)
    sol = system.solve()
    if sol is None:
        return OverlapResult(None, False, {})
    pairs = {(''.join(a), ''.join(b)) if _single(rule) else (a, b): sol[k] for k, (a, b) in enumerate(system.pairs)}
    return OverlapResult(system.evaluate(expr, sol), True, pairs)


def _single(rule: InflationRule) -> bool:
    return all(len(x) == 1 for x in rule.alphabet)


def _window_pair(system: _OverlapSystem, word, v, max_inflations: int = 8):
    """Pattern of the first tile and the equal-length stretch at offset v, aligned after inflating."""
    rule, lam, L = system.rule, system.lam, system.L
    first_len = L[word[0]]
    scale = lam / lam
    w = tuple(word)
    n_first = 1
    for _ in range(max_inflations + 1):
        start, stop = v * scale, (v + first_len) * scale
        pos = start - start
        bounds = {}
        for i, x in enumerate(w):
            bounds[pos] = i
            pos = pos + L[x]
        bounds[pos] = len(w)
        if start in bounds and stop in bounds:
            return w[:n_first], w[bounds[start]:bounds[stop]]
        n_first = len(inflate_word(rule, w[:n_first]))
        w = inflate_word(rule, w)
        scale = scale * lam
    raise RuleError("offset never aligns with tile boundaries")


@dataclass(frozen=True)
class LimitCorrelation:
    value: object | None
    v: object
    window: int
    contributions: tuple


def limit_correlation(rule: InflationRule, v=None, cap: int = OVERLAP_PAIR_CAP) -> LimitCorrelation:
    """``lim nu(v * lam**n)`` of the signed (odd-sector) correlation, computed exactly.

    Each legal word starting with a tile t contributes the overlap of the
    inflated t with the inflated stretch at offset v, weighted by word
    frequency and tile length.
    """
    system = _OverlapSystem(rule, cap)
    lam, L = system.lam, system.L
    v = lam + 1 if v is None else _quad(v, lam.d)
    k = 2
    while True:
        words = legal_words(rule, k)
        if all(system.length(w[1:]) >= v for w in words):
            break
        k += 1
        if k > 12:
            raise RuleError(f"offset {v} exceeds every reachable word window")
    freqs = exact_word_frequencies(rule, k)
    exprs = []
    for w in words:
        p1, p2 = _window_pair(system, w, v)
        exprs.append((w, p1, p2, system.expression(p1, p2)))
    sol = system.solve()
    if sol is None:
        return LimitCorrelation(None, v, k, ())
    num = den = lam - lam
    parts = []
    for w, p1, p2, expr in exprs:
        c = system.evaluate(expr, sol)
        weight = freqs[w] * L[w[0]]
        num = num + weight * c
        den = den + weight
        parts.append((w, p1, p2, freqs[w], c))
    return LimitCorrelation(num / den, v, k, tuple(parts))


def tsm_limit_correlation(rule: InflationRule):
    """Limit of the signed correlation along ``(1 + lam) lam**n``."""
    res = limit_correlation(rule)
    if res.value is None:
        raise RuleError("overlap system did not close")
    return res.value


# -- empirical non-decay ---------------------------------------------------------------


@dataclass(frozen=True)
class NondecayResult:
    v: object
    z: tuple
    values: tuple[float, ...]
    n_tiles: int

    @property
    def tail(self) -> float:
        return self.values[-1]

    @property
    def converged(self) -> bool:
        return len(self.values) < 2 or abs(self.values[-1] - self.values[-2]) < NONDECAY_TOL

    @property
    def decaying(self) -> bool:
        return abs(self.tail) < NONDECAY_TOL

    @property
    def verdict(self) -> str:
        if self.decaying:
            return "decaying"
        return "non-decaying" if self.converged else "inconclusive"

    def as_dict(self) -> dict:
        return {
            "v": str(self.v),
            "z": [str(z) for z in self.z],
            "values": list(self.values),
            "tail": self.tail,
            "converged": self.converged,
            "verdict": self.verdict,
            "n_tiles": self.n_tiles,
        }


def large_patch(rule: InflationRule, min_tiles: int = 1_000_000) -> Patch:
    patch = generate_patch(rule, steps=1)
    while len(patch) < min_tiles:
        patch = generate_patch(rule, patch.seed, patch.steps + 1)
    return patch


def nondecay_test(rule: InflationRule, v, n_max: int = 6, patch: Patch | None = None,
                  min_tiles: int = 1_000_000) -> NondecayResult:
    """Signed correlation counted at ``v * lam**n`` for ``n <= n_max``."""
    lam, _ = _exact_lengths(rule)
    _bar_swap(rule)
    v = _quad(v, lam.d)
    if patch is None:
        patch = large_patch(rule, min_tiles)
    weights = rule.weights()
    zs, vals = [], []
    z = v
    for _ in range(n_max + 1):
        zs.append(z)
        vals.append(signed_correlation_at(patch, z, weights))
        z = z * lam
    return NondecayResult(v, tuple(zs), tuple(vals), len(patch))


# -- report ----------------------------------------------------------------------------


def is_pisot(rule: InflationRule) -> bool:
    """The PF eigenvalue is an algebraic integer whose other conjugates lie inside the unit disc."""
    pf = perron_data(rule)
    if pf.exact:
        lam = pf.lam_exact
        return lam.is_rational() or abs(float(lam.star())) < 1
    x = sympy.Symbol("x")
    poly = sympy.Matrix(substitution_matrix(rule).tolist()).charpoly(x)
    lam = float(pf.lam)
    for fac, _ in sympy.factor_list(poly.as_expr(), x)[1]:
        roots = np.roots([float(c) for c in sympy.Poly(fac, x).all_coeffs()])
        near = np.abs(roots - lam) < 1e-8 * max(1.0, lam)
        if near.any():
            others = roots[~near]
            return bool(np.all(np.abs(others) < 1 - 1e-12))
    return False


@dataclass(frozen=True)
class SpectralReport:
    rule: str
    pisot: bool
    bar_swap: bool
    psi_multiplicity: int | None
    pure_point_expected: bool
    ida_irreducible: bool
    ida_dimension: int
    nondecay_witness: dict | None
    verdict: str
    notes: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "rule": self.rule,
            "pisot": self.pisot,
            "bar_swap": self.bar_swap,
            "psi_multiplicity": self.psi_multiplicity,
            "pure_point_expected": self.pure_point_expected,
            "ida_irreducible": self.ida_irreducible,
            "ida_dimension": self.ida_dimension,
            "nondecay_witness": self.nondecay_witness,
            "verdict": self.verdict,
            "notes": list(self.notes),
        }


def psi_multiplicity(rule: InflationRule) -> int:
    """``[M' : M]`` for the eventual return modules of the rule and of its bar quotient."""
    own = return_modules(rule).index
    quotient = quotient_by_bar_swap(collar(rule))
    other = return_modules(quotient).index
    if own % other:
        raise RuleError(f"return-module indices {own} and {other} are not nested")
    return own // other


def _candidate_offsets(rule: InflationRule, lengths) -> list:
    seen = []
    for k in (1, 2):
        for w in legal_words(quotient_by_bar_swap(rule), k):
            total = lengths[w[0]]
            for x in w[1:]:
                total = total + lengths[x]
            if total not in seen:
                seen.append(total)
    return seen


def spectral_report(rule: InflationRule, min_tiles: int = 1_000_000, n_max: int = 6) -> SpectralReport:
    pisot = is_pisot(rule)
    alg = ida_basis(displacement_sets(rule))
    irreducible = is_irreducible(alg)
    P = detect_bar_swap(rule)
    name = rule.name or "?"
    if not pisot:
        return SpectralReport(name, False, P is not None, None, False, irreducible, alg.dimension,
                              None, "unsupported", ("multiplier is not a PV number",))
    if P is None:
        from .renorm import solve_correlations

        dim = solve_correlations(rule, mode="exact" if perron_data(rule).exact else "float").dimension
        pp = irreducible and dim == 1
        verdict = "pure-point" if pp else "mixed-undetermined"
        return SpectralReport(name, True, False, None, pp, irreducible, alg.dimension, None, verdict)
    mult = psi_multiplicity(rule)
    if mult == 2:
        return SpectralReport(name, True, True, 2, True, irreducible, alg.dimension, None, "pure-point",
                              ("eventual return module has index 2 in that of the bar quotient",))
    _, lengths = _exact_lengths(rule)
    patch = large_patch(rule, min_tiles)
    best = None
    for v in _candidate_offsets(rule, lengths):
        res = nondecay_test(rule, v, n_max, patch=patch)
        if res.converged and not res.decaying and (best is None or abs(res.tail) > abs(best.tail)):
            best = res
    if best is None:
        return SpectralReport(name, True, True, mult, False, irreducible, alg.dimension, None,
                              "mixed-undetermined", (PURITY_NOTE, "no non-decaying odd correlation found"))
    return SpectralReport(name, True, True, mult, False, irreducible, alg.dimension, best.as_dict(),
                          "mixed-singular", (PURITY_NOTE,))


__all__ = [
    "LimitCorrelation",
    "NondecayResult",
    "OverlapResult",
    "SpectralReport",
    "TriplePattern",
    "asymptotic_overlap",
    "eta_pm",
    "exact_word_frequencies",
    "is_pisot",
    "limit_correlation",
    "nondecay_test",
    "psi_multiplicity",
    "spectral_report",
    "tm_eta_sequence",
    "tm_split_step",
    "triple_frequencies",
    "tsm_limit_correlation",
]
