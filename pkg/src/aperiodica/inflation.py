"""Substitution / inflation rules and the data derived from them.

An :class:`InflationRule` is a primitive substitution together with tile
lengths.  From it we derive the substitution matrix, Perron-Frobenius data,
the displacement sets ``T[alpha, beta]`` (offsets of ``alpha`` tiles inside
the inflated ``beta`` tile), digit and Fourier matrices, bar-swap symmetries,
and collared / merged versions of the rule.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import sympy

from . import linalg
from .quadratic import QuadElement, parse_quad, squarefree_part

__all__ = [
    "RuleError",
    "InflationRule",
    "PerronData",
    "DisplacementStructure",
    "substitution_matrix",
    "check_primitive",
    "perron_data",
    "displacement_sets",
    "fourier_matrix",
    "detect_bar_swap",
    "legal_words",
    "collar",
    "merge_equivalent",
    "quotient_by_bar_swap",
    "inflate_word",
    "parse_rule",
    "load_rule",
    "BUNDLED_RULES",
]

BUNDLED_RULES = (
    "fibonacci",
    "thue_morse",
    "rudin_shapiro",
    "silver_mean",
    "tsm",
    "tsm_variant_sigma_tilde",
)


class RuleError(ValueError):
    """Invalid rule definition or a rule lacking a required property."""


@dataclass(frozen=True, eq=False)
class InflationRule:
    alphabet: tuple[str, ...]
    images: Mapping[str, tuple[str, ...]]
    bar_pairs: Mapping[str, str] | None = None
    lengths: Mapping[str, object] | None = None
    name: str = ""
    words: Mapping[str, tuple[str, ...]] | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        object.__setattr__(self, "alphabet", alphabet)
        if len(set(alphabet)) != len(alphabet) or not alphabet:
            raise RuleError(f"alphabet must be non-empty with distinct letters: {alphabet}")
        images = {}
        for letter in alphabet:
            if letter not in self.images:
                raise RuleError(f"no image given for letter {letter!r}")
            img = tuple(self.images[letter])
            if not img:
                raise RuleError(f"image of {letter!r} is empty")
            bad = [x for x in img if x not in alphabet]
            if bad:
                raise RuleError(f"image of {letter!r} uses unknown letters {bad}")
            images[letter] = img
        object.__setattr__(self, "images", images)
        if self.lengths is not None:
            missing = [x for x in alphabet if x not in self.lengths]
            if missing:
                raise RuleError(f"lengths missing for {missing}")
            object.__setattr__(self, "lengths", {x: self.lengths[x] for x in alphabet})
        if self.bar_pairs is not None:
            object.__setattr__(self, "bar_pairs", _validate_bar(self, dict(self.bar_pairs)))
        words = self.words or {x: (x,) for x in alphabet}
        object.__setattr__(self, "words", {x: tuple(words[x]) for x in alphabet})

    @property
    def index(self) -> dict[str, int]:
        return {x: i for i, x in enumerate(self.alphabet)}

    def __len__(self) -> int:
        return len(self.alphabet)

    def __repr__(self) -> str:
        body = ", ".join(f"{x}->{''.join(self.images[x]) if _single(self) else ' '.join(self.images[x])}"
                         for x in self.alphabet)
        return f"InflationRule({self.name or '?'}: {body})"

    def bar(self, letter: str) -> str:
        if self.bar_pairs is None:
            raise RuleError(f"rule {self.name!r} has no bar swap")
        return self.bar_pairs[letter]

    def weights(self) -> dict[str, int]:
        """+1 for unbarred letters, -1 for barred ones (first of each pair is unbarred)."""
        pairs = self.bar_pairs if self.bar_pairs is not None else detect_bar_swap(self)
        if pairs is None:
            raise RuleError(f"rule {self.name!r} has no bar swap")
        idx = self.index
        return {x: 1 if idx[x] < idx[pairs[x]] else -1 for x in self.alphabet}

    def tile_lengths(self) -> dict[str, object]:
        if self.lengths is not None:
            return dict(self.lengths)
        return dict(perron_data(self).lengths)

    def with_name(self, name: str) -> InflationRule:
        return InflationRule(self.alphabet, self.images, self.bar_pairs, self.lengths, name, self.words)


def _single(rule: InflationRule) -> bool:
    return all(len(x) == 1 for x in rule.alphabet)


def _validate_bar(rule: InflationRule, pairs: dict[str, str]) -> dict[str, str]:
    full = {}
    for x, y in pairs.items():
        if x not in rule.alphabet or y not in rule.alphabet:
            raise RuleError(f"bar pair {x}<->{y} uses unknown letters")
        for u, v in ((x, y), (y, x)):
            if full.get(u, v) != v:
                raise RuleError(f"bar pairs are not an involution at {u!r}")
            full[u] = v
    if set(full) != set(rule.alphabet):
        raise RuleError("bar swap must pair every letter")
    if any(full[x] == x for x in full):
        raise RuleError("bar swap must be fixed-point free")
    for x in rule.alphabet:
        img = rule.images[x]
        if rule.images[full[x]] != tuple(full[u] for u in img):
            raise RuleError(f"bar swap does not commute with the substitution at {x!r}")
    if rule.lengths is not None:
        for x in rule.alphabet:
            if rule.lengths[x] != rule.lengths[full[x]]:
                raise RuleError(f"bar partners {x!r}, {full[x]!r} have different lengths")
    return full


# -- matrices ------------------------------------------------------------------


def substitution_matrix(rule: InflationRule) -> np.ndarray:
    """``M[alpha, beta]`` = number of occurrences of alpha in sigma(beta)."""
    idx = rule.index
    n = len(rule)
    m = np.zeros((n, n), dtype=np.int64)
    for beta in rule.alphabet:
        for alpha in rule.images[beta]:
            m[idx[alpha], idx[beta]] += 1
    return m


def check_primitive(m) -> bool:
    m = np.asarray(m) > 0
    n = m.shape[0]
    p = m.copy()
    for _ in range((n - 1) ** 2):
        if p.all():
            return True
        p = (p.astype(np.int64) @ m.astype(np.int64)) > 0
    return bool(p.all())


@dataclass(frozen=True)
class PerronData:
    lam: float
    lam_exact: QuadElement | None
    lengths: dict
    frequencies: dict
    d: int

    @property
    def exact(self) -> bool:
        return self.lam_exact is not None


def _exact_lambda(m: np.ndarray, radius: float) -> QuadElement | None:
    x = sympy.Symbol("x")
    poly = sympy.Matrix(m.tolist()).charpoly(x)
    _, factors = sympy.factor_list(poly.as_expr(), x)
    for fac, _mult in factors:
        coeffs = [Fraction(int(c.p), int(c.q)) for c in sympy.Poly(fac, x).all_coeffs()]
        deg = len(coeffs) - 1
        if deg == 1:
            root = -coeffs[1] / coeffs[0]
            if abs(float(root) - radius) < 1e-9 * max(1.0, radius):
                return QuadElement(root, 0, 5)
        elif deg == 2:
            a, b, c = coeffs
            disc = b * b - 4 * a * c
            if disc < 0:
                continue
            num, den = disc.numerator, disc.denominator
            s, f = squarefree_part(num * den)
            sq = Fraction(f, den)  # sqrt(disc) = sq * sqrt(s)
            if s == 1:
                for sign in (1, -1):
                    root = (-b + sign * sq) / (2 * a)
                    if abs(float(root) - radius) < 1e-9 * max(1.0, radius):
                        return QuadElement(root, 0, 5)
                continue
            for sign in (1, -1):
                root = QuadElement(-b / (2 * a), sign * sq / (2 * a), s)
                if abs(float(root) - radius) < 1e-9 * max(1.0, radius):
                    return root
    return None


def _field_of(values) -> int | None:
    for v in values:
        if isinstance(v, QuadElement) and not v.is_rational():
            return v.d
    return None


def perron_data(rule: InflationRule) -> PerronData:
    """Inflation multiplier, tile lengths (left PF vector) and letter frequencies.

    Exact in Q(sqrt(d)) when the PF eigenvalue is rational or quadratic;
    otherwise double precision with the shortest tile normalised to length 1.
    """
    if "perron" in rule._cache:
        return rule._cache["perron"]
    m = substitution_matrix(rule)
    if not check_primitive(m):
        raise RuleError(f"rule {rule.name!r} is not primitive")
    radius = float(max(abs(np.linalg.eigvals(m.astype(float)))))
    lam = _exact_lambda(m, radius)
    given = rule.lengths
    if lam is not None:
        d = lam.d if not lam.is_rational() else (_field_of(given.values()) if given else None) or 5
        lam = QuadElement(lam.p, lam.q, d) if lam.is_rational() else lam
        one = QuadElement(1, 0, d)
        n = len(rule)

        def eigvec(mat):
            rows = []
            for i in range(n):
                row = {j: one * int(mat[i, j]) for j in range(n) if mat[i, j]}
                row[i] = row.get(i, 0) - lam
                rows.append({j: v for j, v in row.items() if v})
            basis = linalg.nullspace(rows, n, one)
            if len(basis) != 1:
                raise RuleError("PF eigenspace is not one-dimensional")
            vec = basis[0]
            if vec[0].sign() < 0:
                vec = [-v for v in vec]
            return vec

        right = eigvec(m)
        total = sum(right, one * 0)
        freqs = {x: right[i] / total for i, x in enumerate(rule.alphabet)}
        if given is not None:
            lengths = {x: _to_exact(given[x], d) for x in rule.alphabet}
            _check_lengths(rule, m, lengths, lam)
        else:
            left = eigvec(m.T)
            shortest = min(left)
            lengths = {x: left[i] / shortest for i, x in enumerate(rule.alphabet)}
        data = PerronData(float(lam), lam, lengths, freqs, d)
    else:
        w, v = np.linalg.eig(m.astype(float))
        k = int(np.argmax(w.real))
        right = np.abs(v[:, k].real)
        w2, v2 = np.linalg.eig(m.T.astype(float))
        left = np.abs(v2[:, int(np.argmax(w2.real))].real)
        freqs = {x: float(right[i] / right.sum()) for i, x in enumerate(rule.alphabet)}
        if given is not None:
            lengths = {x: float(given[x]) for x in rule.alphabet}
        else:
            lengths = {x: float(left[i] / left.min()) for i, x in enumerate(rule.alphabet)}
        data = PerronData(float(w[k].real), None, lengths, freqs, 0)
    rule._cache["perron"] = data
    return data


def _to_exact(value, d: int) -> QuadElement:
    if isinstance(value, QuadElement):
        return value
    if isinstance(value, str):
        return parse_quad(value, d)
    return QuadElement(value, 0, d)


def _check_lengths(rule, m, lengths, lam) -> None:
    for j, beta in enumerate(rule.alphabet):
        total = sum((lengths[a] for a in rule.images[beta]), QuadElement(0, 0, lam.d))
        if total != lam * lengths[beta]:
            raise RuleError(
                f"tile lengths are not a left PF eigenvector: |sigma({beta})| = {total}, "
                f"lambda*|{beta}| = {lam * lengths[beta]}"
            )


# -- displacements and Fourier matrix -----------------------------------------------


@dataclass(frozen=True)
class DisplacementStructure:
    """Offsets ``T[(alpha, beta)]`` of alpha tiles inside sigma(beta)."""

    alphabet: tuple[str, ...]
    T: dict
    lam: object
    exact: bool

    def offsets(self) -> list:
        """All distinct offsets, sorted by value."""
        seen = {t for ts in self.T.values() for t in ts}
        return sorted(seen, key=float)

    def digit_matrices(self) -> dict:
        """0/1 matrices ``D_t`` with ``D_t[alpha, beta] = 1`` iff t in T[alpha, beta]."""
        n = len(self.alphabet)
        idx = {x: i for i, x in enumerate(self.alphabet)}
        mats = {t: np.zeros((n, n), dtype=np.int64) for t in self.offsets()}
        for (a, b), ts in self.T.items():
            for t in ts:
                mats[t][idx[a], idx[b]] += 1
        return mats

    def max_spread(self):
        """Largest |t - s| over all offsets (the smallest offset is always 0)."""
        offs = self.offsets()
        return offs[-1] - offs[0]


def displacement_sets(rule: InflationRule) -> DisplacementStructure:
    if "disp" in rule._cache:
        return rule._cache["disp"]
    pf = perron_data(rule)
    lengths = pf.lengths
    zero = QuadElement(0, 0, pf.d) if pf.exact else 0.0
    T = {(a, b): [] for a in rule.alphabet for b in rule.alphabet}
    for beta in rule.alphabet:
        pos = zero
        for alpha in rule.images[beta]:
            T[alpha, beta].append(pos)
            pos = pos + lengths[alpha]
    disp = DisplacementStructure(rule.alphabet, {k: tuple(v) for k, v in T.items()},
                                 pf.lam_exact if pf.exact else pf.lam, pf.exact)
    rule._cache["disp"] = disp
    return disp


def fourier_matrix(disp: DisplacementStructure, k: float) -> np.ndarray:
    """``B[alpha, beta](k) = sum over t in T[alpha, beta] of exp(2 pi i k t)``."""
    n = len(disp.alphabet)
    idx = {x: i for i, x in enumerate(disp.alphabet)}
    b = np.zeros((n, n), dtype=complex)
    for (a, c), ts in disp.T.items():
        for t in ts:
            b[idx[a], idx[c]] += cmath.exp(2j * math.pi * k * float(t))
    return b


# -- bar swap ------------------------------------------------------------------------


def detect_bar_swap(rule: InflationRule) -> dict[str, str] | None:
    """The declared bar swap, or the first fixed-point-free commuting involution found."""
    if rule.bar_pairs is not None:
        return dict(rule.bar_pairs)
    if "bar" in rule._cache:
        return rule._cache["bar"]
    letters = rule.alphabet
    img = rule.images
    lengths = rule.lengths

    def assign(P, x, y):
        P = dict(P)
        queue = [(x, y)]
        while queue:
            u, v = queue.pop()
            if u == v:
                return None
            if u in P or v in P:
                if P.get(u) != v or P.get(v) != u:
                    return None
                continue
            if len(img[u]) != len(img[v]):
                return None
            if lengths is not None and lengths[u] != lengths[v]:
                return None
            P[u], P[v] = v, u
            queue.extend(zip(img[u], img[v]))
        return P

    def search(P):
        free = [x for x in letters if x not in P]
        if not free:
            return P
        x = free[0]
        for y in free[1:]:
            Q = assign(P, x, y)
            if Q is not None:
                found = search(Q)
                if found is not None:
                    return found
        return None

    result = search({}) if len(letters) % 2 == 0 else None
    rule._cache["bar"] = result
    return result


# -- words, collaring, merging -----------------------------------------------------


def inflate_word(rule: InflationRule, word: Sequence[str], n: int = 1) -> tuple[str, ...]:
    word = tuple(word)
    for _ in range(n):
        word = tuple(y for x in word for y in rule.images[x])
    return word


def legal_words(rule: InflationRule, k: int) -> list[tuple[str, ...]]:
    """All legal words of length k, in lexicographic alphabet order."""
    key = ("legal", k)
    if key in rule._cache:
        return rule._cache[key]
    found: set[tuple[str, ...]] = set()
    for x in rule.alphabet:
        w = (x,)
        for _ in range(4 * len(rule) + 8):
            w = inflate_word(rule, w)
            found.update(w[i:i + k] for i in range(len(w) - k + 1))
            if len(w) > 4 * k * max(len(i) for i in rule.images.values()):
                break
    stack = list(found)
    while stack:
        w = stack.pop()
        u = inflate_word(rule, w)
        for i in range(len(u) - k + 1):
            sub = u[i:i + k]
            if sub not in found:
                found.add(sub)
                stack.append(sub)
    idx = rule.index
    out = sorted(found, key=lambda w: [idx[x] for x in w])
    rule._cache[key] = out
    return out


def _name(word: tuple[str, ...], base_single: bool) -> str:
    return "".join(word) if base_single else ".".join(word)


def collar(rule: InflationRule) -> InflationRule:
    """Right-collared version of the rule: letters are legal 2-letter words."""
    pairs = legal_words(rule, 2)
    base_single = all(len(x) == 1 for w in rule.words.values() for x in w)
    words = {}
    names = {}
    for t1, t2 in pairs:
        word = rule.words[t1] + rule.words[t2][-1:]
        names[t1, t2] = _name(word, base_single)
        words[names[t1, t2]] = word
    images = {}
    for t1, t2 in pairs:
        k = len(rule.images[t1])
        u = inflate_word(rule, (t1, t2))
        images[names[t1, t2]] = tuple(names[u[i], u[i + 1]] for i in range(k))
    lengths = None
    if rule.lengths is not None:
        lengths = {names[p]: rule.lengths[p[0]] for p in pairs}
    bars = None
    if rule.bar_pairs is not None:
        P = rule.bar_pairs
        bars = {names[t1, t2]: names[P[t1], P[t2]] for t1, t2 in pairs}
    alphabet = tuple(names[p] for p in pairs)
    return InflationRule(alphabet, images, bars, lengths, f"{rule.name}~collared", words)


def merge_equivalent(rule: InflationRule) -> InflationRule:
    """Identify letters with identical images and lengths, iterated to a fixed point."""
    lengths = rule.tile_lengths()
    rep = {x: x for x in rule.alphabet}
    while True:
        seen: dict = {}
        changed = False
        for x in rule.alphabet:
            if rep[x] != x:
                continue
            sig = (tuple(rep[y] for y in rule.images[x]), lengths[x])
            if sig in seen:
                target = seen[sig]
                for y in rule.alphabet:
                    if rep[y] == x:
                        rep[y] = target
                changed = True
            else:
                seen[sig] = x
        if not changed:
            break
    if rule.bar_pairs is not None:
        # name each barred class after the bar of its partner's representative
        P = rule.bar_pairs
        classes: dict[str, list[str]] = {}
        for x in rule.alphabet:
            classes.setdefault(rep[x], []).append(x)
        renamed: dict[str, str] = {}
        for r in rule.alphabet:
            if r not in classes:
                continue
            partner = rep[P[r]]
            if partner in renamed and P[renamed[partner]] in classes[r]:
                renamed[r] = P[renamed[partner]]
            else:
                renamed[r] = r
        rep = {x: renamed[rep[x]] for x in rule.alphabet}
    alphabet = tuple(x for x in rule.alphabet if rep[x] == x)
    images = {x: tuple(rep[y] for y in rule.images[x]) for x in alphabet}
    bars = None
    if rule.bar_pairs is not None:
        cand = {x: rep[rule.bar_pairs[x]] for x in alphabet}
        if all(cand[x] != x and cand[cand[x]] == x for x in alphabet):
            bars = cand
    lens = {x: lengths[x] for x in alphabet} if rule.lengths is not None else None
    words = {x: rule.words[x] for x in alphabet}
    return InflationRule(alphabet, images, bars, lens, f"{rule.name}~merged", words)


def quotient_by_bar_swap(rule: InflationRule) -> InflationRule:
    """Identify every letter with its bar partner."""
    P = detect_bar_swap(rule)
    if P is None:
        raise RuleError(f"rule {rule.name!r} has no bar swap")
    idx = rule.index
    rep = {x: x if idx[x] < idx[P[x]] else P[x] for x in rule.alphabet}
    alphabet = tuple(x for x in rule.alphabet if rep[x] == x)
    images = {x: tuple(rep[y] for y in rule.images[x]) for x in alphabet}
    lens = {x: rule.lengths[x] for x in alphabet} if rule.lengths is not None else None
    words = {x: rule.words[x] for x in alphabet}
    return InflationRule(alphabet, images, None, lens, f"{rule.name}/P", words)


# -- rule files --------------------------------------------------------------------

_LINE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


def parse_rule(text: str, name: str = "") -> InflationRule:
    """Parse the key-value rule format::

        letters = [a, b]
        image.a = "ab"
        image.b = "a"
        bar.a = A                        # optional
        length.a = "1/2 + 1/2*sqrt(5)"   # optional
    """
    letters = None
    raw_images: dict[str, str] = {}
    bars: dict[str, str] = {}
    raw_lengths: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        if not line.strip():
            continue
        m = _LINE.match(line)
        if not m:
            raise RuleError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = m.group(1), m.group(2)
        if key == "letters":
            inner = value.strip()
            if not (inner.startswith("[") and inner.endswith("]")):
                raise RuleError(f"line {lineno}: letters must be a [list]")
            letters = [_unquote(x.strip()) for x in inner[1:-1].split(",") if x.strip()]
        elif key == "name":
            name = _unquote(value)
        elif key.startswith("image."):
            raw_images[key[6:]] = _unquote(value)
        elif key.startswith("bar."):
            bars[key[4:]] = _unquote(value)
        elif key.startswith("length."):
            raw_lengths[key[7:]] = _unquote(value)
        else:
            raise RuleError(f"line {lineno}: unknown key {key!r}")
    if letters is None:
        raise RuleError("rule file has no 'letters' entry")
    single = all(len(x) == 1 for x in letters)
    images = {}
    for x, img in raw_images.items():
        if x not in letters:
            raise RuleError(f"image given for unknown letter {x!r}")
        if len(img.split()) > 1 or not single:
            images[x] = tuple(img.split())
        else:
            images[x] = tuple(img)
    lengths = None
    if raw_lengths:
        fields = {squarefree_part(int(r))[0] for v in raw_lengths.values()
                  for r in re.findall(r"sqrt\(\s*(\d+)\s*\)", v)}
        fields.discard(1)
        if len(fields) > 1:
            raise RuleError(f"tile lengths mix quadratic fields {sorted(fields)}")
        d = fields.pop() if fields else 5
        lengths = {x: parse_quad(v, d) for x, v in raw_lengths.items()}
    return InflationRule(tuple(letters), images, bars or None, lengths, name)


def load_rule(source: str | Path) -> InflationRule:
    """Load a bundled rule by name, or a rule file by path."""
    text = None
    name = str(source)
    if isinstance(source, str) and source in BUNDLED_RULES:
        text = resources.files("aperiodica.rules").joinpath(f"{source}.rule").read_text()
    else:
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"unknown rule {source!r}: not bundled ({', '.join(BUNDLED_RULES)}) "
                                    f"and no such file")
        text = path.read_text()
        name = path.stem
    return parse_rule(text, name)
