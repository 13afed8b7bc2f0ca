"""Brute-force ground truth from finite fixed-point patches.

Positions are stored exactly as integer pairs ``(A, B)`` meaning
``(A + B*sqrt(d)) / den`` for a fixed common denominator, so distances can be
hashed bit-exactly and compared with the renormalised tables.  Rules whose
multiplier is not quadratic fall back to float positions keyed on a 1e-6 grid.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .inflation import InflationRule, RuleError, detect_bar_swap, legal_words, perron_data
from .quadratic import QuadElement

# float positions are binned on this grid; rounding noise stays far below it
FLOAT_GRID = 1e6


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("APERIODICA_THREADS", "1")))
    except ValueError:
        return 1


# -- coordinates -----------------------------------------------------------------


@dataclass(frozen=True)
class Coords:
    """Integer coordinate system ``(A + B*sqrt(d)) / den`` for exact positions."""

    d: int
    den: int

    def encode(self, x) -> tuple[int, int]:
        if not isinstance(x, QuadElement):
            x = QuadElement(x, 0, self.d)
        a, b = x.p * self.den, x.q * self.den
        if a.denominator != 1 or b.denominator != 1:
            raise ValueError(f"{x} is not representable over denominator {self.den}")
        return int(a), int(b)

    def decode(self, a: int, b: int) -> QuadElement:
        return QuadElement(Fraction(int(a), self.den), Fraction(int(b), self.den), self.d)

    def embed(self, a, b):
        return (np.asarray(a, dtype=float) + np.asarray(b, dtype=float) * math.sqrt(self.d)) / self.den


def _coords_for(rule: InflationRule) -> Coords | None:
    pf = perron_data(rule)
    if not pf.exact:
        return None
    den = math.lcm(*(v.ints[2] for v in pf.lengths.values()))
    return Coords(pf.d, den)


# -- patches ---------------------------------------------------------------------


@dataclass
class Patch:
    """Fixed-point patch ``sigma^n(left) | sigma^n(right)`` with the marker at 0."""

    rule: InflationRule
    letters: np.ndarray
    coords: Coords | None
    A: np.ndarray
    B: np.ndarray
    pos: np.ndarray
    origin_index: int
    seed: tuple[str, str]
    steps: int
    power: int
    _codes: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def exact(self) -> bool:
        return self.coords is not None

    def tiles(self):
        """Iterate over ``(letter, left_endpoint)`` pairs."""
        alphabet = self.rule.alphabet
        for i in range(len(self)):
            yield alphabet[self.letters[i]], self.position(i)

    def position(self, i: int):
        if self.coords is None:
            return float(self.pos[i])
        return self.coords.decode(self.A[i], self.B[i])

    def word(self, start: int = 0, stop: int | None = None) -> tuple[str, ...]:
        alphabet = self.rule.alphabet
        return tuple(alphabet[c] for c in self.letters[start:stop])

    def span(self) -> tuple[float, float]:
        lengths = perron_data(self.rule).lengths
        last = float(lengths[self.rule.alphabet[self.letters[-1]]])
        return float(self.pos[0]), float(self.pos[-1]) + last

    def _keys(self) -> np.ndarray:
        """Additive integer encoding of positions: key(x + y) = key(x) + key(y)."""
        if "keys" not in self._codes:
            if self.exact:
                scale = 4 * int(np.abs(self.B).max() + 1) + 1
                self._codes["scale"] = scale
                self._codes["keys"] = self.A * scale + self.B
            else:
                self._codes["keys"] = np.rint(self.pos * FLOAT_GRID).astype(np.int64)
        return self._codes["keys"]

    def key_of(self, z) -> int:
        self._keys()
        if self.exact:
            a, b = self.coords.encode(z)
            return a * self._codes["scale"] + b
        return int(round(float(z) * FLOAT_GRID))


def fixing_power(rule: InflationRule, left: str, right: str, limit: int | None = None) -> int | None:
    """Smallest p with sigma^p(left) ending in left and sigma^p(right) starting with right."""
    limit = limit or 2 * len(rule) + 2
    l, r = left, right
    for p in range(1, limit + 1):
        l = rule.images[l][-1]
        r = rule.images[r][0]
        if l == left and r == right:
            return p
    return None


def default_seed(rule: InflationRule) -> tuple[str, str]:
    """First legal two-letter word fixed by sigma^2 at the marker, else the one with the least power."""
    best = None
    for w in legal_words(rule, 2):
        p = fixing_power(rule, *w)
        if p is None:
            continue
        if p <= 2:
            return w
        if best is None or p < best[0]:
            best = (p, w)
    if best is None:
        raise RuleError(f"no legal seed of rule {rule.name!r} is fixed by a power of the substitution")
    return best[1]


def _parse_seed(rule: InflationRule, seed) -> tuple[str, str]:
    if seed is None:
        return default_seed(rule)
    if isinstance(seed, str):
        if "|" in seed:
            left, right = (s.strip() for s in seed.split("|", 1))
        elif len(seed) == 2 and all(len(x) == 1 for x in rule.alphabet):
            left, right = seed[0], seed[1]
        else:
            raise RuleError(f"cannot read seed {seed!r}; write it as 'left|right'")
    else:
        left, right = seed
    legal = legal_words(rule, 2)
    if (left, right) not in legal:
        names = ", ".join(f"{u}|{v}" for u, v in legal)
        raise RuleError(f"seed {left}|{right} is not legal; legal two-letter words: {names}")
    return left, right


def _inflate_codes(codes: np.ndarray, flat: np.ndarray, starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    size = lens[codes]
    total = int(size.sum())
    offsets = np.cumsum(size) - size
    return flat[np.repeat(starts[codes] - offsets, size) + np.arange(total)]


def generate_patch(rule: InflationRule, seed=None, steps: int = 8, max_tiles: int = 20_000_000) -> Patch:
    """Apply ``sigma^(power*steps)`` to both sides of a legal seed ``left|right``.

    ``power`` is the least p for which the seed is fixed by sigma^p at the marker.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    left, right = _parse_seed(rule, seed)
    power = fixing_power(rule, left, right)
    if power is None:
        raise RuleError(f"seed {left}|{right} is not fixed by any power of the substitution")
    idx = rule.index
    images = [np.array([idx[y] for y in rule.images[x]], dtype=np.int64) for x in rule.alphabet]
    lens = np.array([len(i) for i in images], dtype=np.int64)
    starts = np.cumsum(lens) - lens
    flat = np.concatenate(images)
    lw = np.array([idx[left]], dtype=np.int64)
    rw = np.array([idx[right]], dtype=np.int64)
    for _ in range(power * steps):
        lw = _inflate_codes(lw, flat, starts, lens)
        rw = _inflate_codes(rw, flat, starts, lens)
        if len(lw) + len(rw) > max_tiles:
            raise ValueError(f"patch would exceed {max_tiles} tiles; use fewer steps")
    letters = np.concatenate([lw, rw])
    origin = len(lw)
    coords = _coords_for(rule)
    pf = perron_data(rule)
    if coords is not None:
        la = np.zeros(len(rule), dtype=np.int64)
        lb = np.zeros(len(rule), dtype=np.int64)
        for x, i in idx.items():
            la[i], lb[i] = coords.encode(pf.lengths[x])
        A = _left_endpoints(la, letters, origin)
        B = _left_endpoints(lb, letters, origin)
        pos = coords.embed(A, B)
    else:
        lf = np.array([float(pf.lengths[x]) for x in rule.alphabet])
        A = B = np.zeros(0, dtype=np.int64)
        pos = _left_endpoints(lf, letters, origin)
    return Patch(rule, letters, coords, A, B, pos, origin, (left, right), steps, power)


def _left_endpoints(lengths: np.ndarray, letters: np.ndarray, origin: int) -> np.ndarray:
    ends = np.cumsum(lengths[letters])
    starts = np.concatenate([np.zeros(1, dtype=ends.dtype), ends[:-1]])
    return starts - starts[origin]


# -- empirical correlations ------------------------------------------------------------


@dataclass
class EmpiricalTable:
    """Pair frequencies ``nu[alpha, beta](z)`` counted in a patch."""

    alphabet: tuple[str, ...]
    radius: float
    n_points: int
    counts: dict
    exact: bool

    def value(self, alpha: str, beta: str, z) -> float:
        return self.counts.get((alpha, beta), {}).get(z, 0) / self.n_points

    def items(self):
        """``(alpha, beta, z, value)`` sorted by alpha, beta, position."""
        order = {x: i for i, x in enumerate(self.alphabet)}
        rows = []
        for (a, b), hist in self.counts.items():
            for z, c in hist.items():
                rows.append((a, b, z, c / self.n_points))
        rows.sort(key=lambda r: (order[r[0]], order[r[1]], float(r[2])))
        return rows

    def support(self, alpha: str, beta: str) -> set:
        return set(self.counts.get((alpha, beta), {}))

    def frequencies(self) -> dict:
        return {x: self.value(x, x, _zero_like(self)) for x in self.alphabet}

    def signed(self, z, weights: dict[str, int]) -> float:
        return sum(weights[a] * weights[b] * self.value(a, b, z) for a in self.alphabet for b in self.alphabet)


def _zero_like(table: EmpiricalTable):
    for hist in table.counts.values():
        for z in hist:
            return z * 0
    return 0


def interior_slice(patch: Patch, margin: float) -> tuple[int, int]:
    lo, hi = patch.span()
    i0 = int(np.searchsorted(patch.pos, lo + margin, side="left"))
    i1 = int(np.searchsorted(patch.pos, hi - margin, side="right"))
    return i0, i1


def _pair_histogram(patch: Patch, radius: float, i0: int, i1: int) -> dict:
    """``{(alpha, beta): {z: count}}`` for tiles i0 <= i < i1 and partners anywhere."""
    letters = patch.letters
    pos = patch.pos
    nlet = len(patch.rule.alphabet)
    minlen = min(float(v) for v in perron_data(patch.rule).lengths.values())
    kmax = int(math.floor(radius / minlen + 1e-9)) + 1
    tol = 1e-9
    centre = np.arange(i0, i1)

    def count_lags(lags):
        local = Counter()
        for k in lags:
            for sign in (1, -1):
                if k == 0 and sign == -1:
                    continue
                j = centre + sign * k
                ok = (j >= 0) & (j < len(patch))
                ii, jj = centre[ok], j[ok]
                keep = np.abs(pos[jj] - pos[ii]) <= radius + tol
                ii, jj = ii[keep], jj[keep]
                if not len(ii):
                    continue
                pair = letters[ii] * nlet + letters[jj]
                if patch.exact:
                    stacked = np.stack([pair, patch.A[jj] - patch.A[ii], patch.B[jj] - patch.B[ii]], axis=1)
                else:
                    diff = pos[jj] - pos[ii]
                    stacked = np.stack([pair, np.rint(diff * FLOAT_GRID).astype(np.int64)], axis=1)
                uniq, first, cnt = np.unique(stacked, axis=0, return_index=True, return_counts=True)
                for row, i, c in zip(uniq.tolist(), first.tolist(), cnt.tolist()):
                    local[tuple(row)] += c
                    if not patch.exact:
                        values.setdefault(tuple(row), float(diff[i]))
        return local

    values: dict = {}

    # partition the lags over worker threads, merge the histograms afterwards
    workers = thread_count()
    lag_list = list(range(kmax + 1))
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(count_lags, [lag_list[i::workers] for i in range(workers)]))
    else:
        parts = [count_lags(lag_list)]
    total = Counter()
    for p in parts:
        total.update(p)
    alphabet = patch.rule.alphabet
    counts: dict = {}
    for row, c in total.items():
        a, b = alphabet[row[0] // nlet], alphabet[row[0] % nlet]
        z = patch.coords.decode(row[1], row[2]) if patch.exact else values[row]
        hist = counts.setdefault((a, b), {})
        hist[z] = hist.get(z, 0) + c
    return counts


def empirical_correlations(patch: Patch, radius: float) -> EmpiricalTable:
    """Count pairs (x in Lambda_alpha, y in Lambda_beta, y - x = z) with |z| <= radius.

    ``x`` ranges over the tiles whose left endpoint lies at least ``radius``
    inside the patch; the count is divided by the number of such tiles.
    """
    lo, hi = patch.span()
    if hi - lo < 4 * radius:
        raise ValueError(f"patch of length {hi - lo:.3f} too short for radius {radius}")
    i0, i1 = interior_slice(patch, radius)
    if i1 <= i0:
        raise ValueError("no interior points")
    counts = _pair_histogram(patch, radius, i0, i1)
    return EmpiricalTable(patch.rule.alphabet, radius, i1 - i0, counts, patch.exact)


def harvest_differences(patch: Patch, radius: float) -> dict:
    """All displacements ``Lambda_beta - Lambda_alpha`` within ``radius`` seen in the patch."""
    counts = _pair_histogram(patch, radius, 0, len(patch))
    return {pair: set(hist) for pair, hist in counts.items()}


def signed_correlation_at(patch: Patch, z, weights: dict[str, int] | None = None) -> float:
    """``sum w(x) w(x + z) / N`` over interior tiles x, with w = +1 / -1 by bar status."""
    if weights is None:
        weights = patch.rule.weights()
    keys = patch._keys()
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    w = np.array([weights[x] for x in patch.rule.alphabet], dtype=np.int64)[patch.letters]
    shift = patch.key_of(z)
    zf = float(z)
    i0, i1 = interior_slice(patch, abs(zf) + 1e-9)
    if i1 <= i0:
        raise ValueError(f"patch too short for displacement {zf:.3f}")
    target = keys[i0:i1] + shift
    loc = np.searchsorted(sorted_keys, target)
    loc = np.minimum(loc, len(sorted_keys) - 1)
    hit = sorted_keys[loc] == target
    partner = order[loc[hit]]
    src = np.arange(i0, i1)[hit]
    return float((w[src] * w[partner]).sum()) / (i1 - i0)


def pair_correlation_at(patch: Patch, alpha: str, beta: str, z) -> float:
    """Single coefficient ``nu[alpha, beta](z)`` counted over interior tiles."""
    idx = patch.rule.index
    keys = patch._keys()
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    i0, i1 = interior_slice(patch, abs(float(z)) + 1e-9)
    target = keys[i0:i1] + patch.key_of(z)
    loc = np.minimum(np.searchsorted(sorted_keys, target), len(sorted_keys) - 1)
    hit = sorted_keys[loc] == target
    src = np.arange(i0, i1)[hit]
    partner = order[loc[hit]]
    good = (patch.letters[src] == idx[alpha]) & (patch.letters[partner] == idx[beta])
    return float(good.sum()) / (i1 - i0)


def word_frequencies(patch: Patch, k: int) -> dict[tuple[str, ...], float]:
    """Relative frequency (per tile) of each k-letter word among interior tiles."""
    i0, i1 = len(patch) // 10, len(patch) - len(patch) // 10 - k
    letters = patch.letters
    nlet = len(patch.rule.alphabet)
    code = np.zeros(i1 - i0, dtype=np.int64)
    for j in range(k):
        code = code * nlet + letters[i0 + j:i1 + j]
    uniq, cnt = np.unique(code, return_counts=True)
    out = {}
    for c, n in zip(uniq.tolist(), cnt.tolist()):
        word = []
        for _ in range(k):
            word.append(patch.rule.alphabet[c % nlet])
            c //= nlet
        out[tuple(reversed(word))] = n / (i1 - i0)
    return out


# -- return modules ------------------------------------------------------------------


def lattice_basis(vectors) -> list[tuple[int, ...]]:
    """Row-style Hermite basis of the Z-span of integer vectors."""
    rows = [list(map(int, v)) for v in vectors if any(v)]
    if not rows:
        return []
    dim = len(rows[0])
    basis = []
    for col in range(dim):
        active = [r for r in rows if r[col] != 0]
        rest = [r for r in rows if r[col] == 0]
        while len(active) > 1:
            active.sort(key=lambda r: abs(r[col]))
            piv = active[0]
            nxt = [piv]
            for r in active[1:]:
                q = r[col] // piv[col]
                r = [x - q * y for x, y in zip(r, piv)]
                (nxt if r[col] != 0 else rest).append(r)
            active = nxt
        if active:
            piv = active[0]
            if piv[col] < 0:
                piv = [-x for x in piv]
            basis.append(piv)
        rows = [r for r in rest if any(r)]
    for i, b in enumerate(basis):
        col = next(c for c, x in enumerate(b) if x)
        for j in range(i):
            q = basis[j][col] // b[col]
            if q:
                basis[j] = [x - q * y for x, y in zip(basis[j], b)]
    return [tuple(b) for b in basis]


def _solve_int_coords(basis: list[tuple[int, ...]], v) -> list[Fraction]:
    """Rational coordinates of v in a lattice basis (rows)."""
    import sympy

    m = sympy.Matrix([list(b) for b in basis]).T
    sol = m.solve_least_squares(sympy.Matrix(list(v))) if m.shape[0] != m.shape[1] else m.solve(sympy.Matrix(list(v)))
    return [Fraction(int(sympy.fraction(x)[0]), int(sympy.fraction(x)[1])) for x in sol]


@dataclass(frozen=True)
class ReturnModuleReport:
    tile_length_module: tuple
    return_module: tuple
    eventual_return_module: tuple
    index: int
    return_index: int
    coords: Coords

    def as_dict(self) -> dict:
        fmt = lambda basis: [str(self.coords.decode(a, b)) for a, b in basis]
        return {
            "tile_length_module": fmt(self.tile_length_module),
            "return_module": fmt(self.return_module),
            "eventual_return_module": fmt(self.eventual_return_module),
            "index": self.index,
            "return_index": self.return_index,
        }


def return_vectors(patch: Patch) -> set[tuple[int, int]]:
    """Distinct distances between consecutive tiles of the same type."""
    out = set()
    for c in range(len(patch.rule.alphabet)):
        where = np.nonzero(patch.letters == c)[0]
        if len(where) < 2:
            continue
        da = np.diff(patch.A[where])
        db = np.diff(patch.B[where])
        out.update(zip(da.tolist(), db.tolist()))
    return out


def return_modules(rule: InflationRule, patch: Patch | None = None, max_power: int = 8) -> ReturnModuleReport:
    """Tile-length, return and eventual-return modules with the index [T : M]."""
    if patch is None:
        patch = generate_patch(rule, steps=1)
        while len(patch) < 10_000:
            patch = generate_patch(rule, patch.seed, patch.steps + 1)
    if not patch.exact:
        raise RuleError("return modules need an exact (quadratic) multiplier")
    coords = patch.coords
    pf = perron_data(rule)
    T = lattice_basis([coords.encode(v) for v in pf.lengths.values()])
    R = lattice_basis(sorted(return_vectors(patch)))
    r = len(T)
    if len(R) != r:
        raise RuleError("return module has smaller rank than the tile-length module")
    # work in T-coordinates: u in Z^r <-> sum u_i T_i
    to_t = lambda v: _solve_int_coords(T, v)
    g_r = [to_t(v) for v in R]
    lam = pf.lam_exact
    lam_t = []
    for t in T:
        x = coords.decode(*t) * lam
        lam_t.append(to_t(coords.encode(x)))
    # matrices acting on column vectors of T-coordinates
    L = [[lam_t[j][i] for j in range(r)] for i in range(r)]
    G = [[g_r[j][i] for j in range(r)] for i in range(r)]
    g_inv = _inv(G)
    power = [[Fraction(int(i == j)) for j in range(r)] for i in range(r)]
    M_gens: list = [tuple(int(x) for x in row) for row in _int_rows(G)]
    for _ in range(max_power + 1):
        C = _mul(g_inv, power)
        M_gens.extend(_integral_preimage(C))
        power = _mul(L, power)
    M = lattice_basis(M_gens)
    index = abs(_det(M))
    return_index = abs(_det(lattice_basis(_int_rows(G))))
    back = lambda basis: tuple(
        tuple(sum(u[i] * T[i][k] for i in range(r)) for k in range(len(T[0]))) for u in basis
    )
    return ReturnModuleReport(tuple(T), back(lattice_basis(_int_rows(G))), back(M), index, return_index, coords)


def _int_rows(G):
    r = len(G)
    return [tuple(int(G[i][j]) for i in range(r)) for j in range(r)]


def _mul(a, b):
    return [[sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(len(b[0]))] for i in range(len(a))]


def _det(m) -> int:
    m = [list(map(Fraction, row)) for row in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        p = next((i for i in range(c, n) if m[i][c]), None)
        if p is None:
            return 0
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for i in range(c + 1, n):
            f = m[i][c] / m[c][c]
            m[i] = [x - f * y for x, y in zip(m[i], m[c])]
    return int(det)


def _inv(m):
    n = len(m)
    aug = [list(map(Fraction, row)) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        p = next(i for i in range(c, n) if aug[i][c])
        aug[c], aug[p] = aug[p], aug[c]
        piv = aug[c][c]
        aug[c] = [x / piv for x in aug[c]]
        for i in range(n):
            if i != c and aug[i][c]:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [row[n:] for row in aug]


def _integral_preimage(C) -> list[tuple[int, ...]]:
    """Generators of {u in Z^r : C u in Z^r} by residue enumeration."""
    r = len(C)
    q = math.lcm(*(x.denominator for row in C for x in row))
    gens = [tuple(q * int(i == j) for j in range(r)) for i in range(r)]
    if q == 1:
        return [tuple(int(i == j) for j in range(r)) for i in range(r)]
    K = [[int(x * q) for x in row] for row in C]

    def rec(prefix):
        if len(prefix) == r:
            if all(sum(K[i][j] * prefix[j] for j in range(r)) % q == 0 for i in range(r)) and any(prefix):
                gens.append(tuple(prefix))
            return
        for v in range(q):
            rec(prefix + [v])

    if q ** r > 10**6:
        raise RuleError("eventual-return computation needs too large a residue search")
    rec([])
    return gens
