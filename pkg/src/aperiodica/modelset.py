"""Cut-and-project description: windows, window correlations and diffraction.

Exact interval arithmetic in Q(sqrt(d)) is used for the Fibonacci windows;
covering windows of other rules are estimated from star images of patch
points.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .inflation import InflationRule, detect_bar_swap, perron_data
from .patch import generate_patch
from .quadratic import QuadElement, TAU, SQRT5


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object
    lo_closed: bool = False
    hi_closed: bool = True

    @property
    def length(self):
        return self.hi - self.lo

    def contains(self, y) -> bool:
        above = y > self.lo or (self.lo_closed and y == self.lo)
        below = y < self.hi or (self.hi_closed and y == self.hi)
        return above and below

    def shifted(self, s) -> Interval:
        return Interval(self.lo + s, self.hi + s, self.lo_closed, self.hi_closed)

    def overlap(self, other: Interval):
        lo = self.lo if self.lo > other.lo else other.lo
        hi = self.hi if self.hi < other.hi else other.hi
        return hi - lo if hi > lo else (hi - hi)


@dataclass(frozen=True)
class CutProjectScheme:
    """Minkowski embedding x -> (x, x*) of a rank-two module in Q(sqrt(d))."""

    basis: tuple[QuadElement, QuadElement]

    @property
    def d(self) -> int:
        return self.basis[0].d if not self.basis[0].is_rational() else self.basis[1].d

    def covolume(self) -> QuadElement:
        b1, b2 = self.basis
        return abs(b1 * b2.star() - b2 * b1.star())

    def star(self, x: QuadElement) -> QuadElement:
        return x.star()

    def points(self, lo: float, hi: float, wlo: float, whi: float):
        """Module points x with lo <= x <= hi and wlo <= x* <= whi (a superset filter box)."""
        b1, b2 = self.basis
        m = np.array([[float(b1), float(b2)], [float(b1.star()), float(b2.star())]])
        inv = np.linalg.inv(m)
        corners = np.array([[x, y] for x in (lo, hi) for y in (wlo, whi)]) @ inv.T
        i_lo, j_lo = np.floor(corners.min(axis=0)).astype(int) - 1
        i_hi, j_hi = np.ceil(corners.max(axis=0)).astype(int) + 1
        for i in range(i_lo, i_hi + 1):
            for j in range(j_lo, j_hi + 1):
                x = b1 * i + b2 * j
                xf, sf = float(x), float(x.star())
                if lo - 1e-9 <= xf <= hi + 1e-9 and wlo - 1e-9 <= sf <= whi + 1e-9:
                    yield x


@dataclass(frozen=True)
class WindowSet:
    windows: dict
    cps: CutProjectScheme | None = None

    @property
    def letters(self) -> tuple[str, ...]:
        return tuple(self.windows)

    def total(self) -> Interval:
        ws = sorted(self.windows.values(), key=lambda w: float(w.lo))
        return Interval(ws[0].lo, ws[-1].hi, ws[0].lo_closed, ws[-1].hi_closed)

    def volume(self):
        vol = None
        for w in self.windows.values():
            vol = w.length if vol is None else vol + w.length
        return vol

    def density(self):
        return self.volume() / self.cps.covolume()

    def letter_of(self, y) -> str | None:
        for x, w in self.windows.items():
            if w.contains(y):
                return x
        return None


FIBONACCI_CPS = CutProjectScheme((QuadElement(1, 0, 5), TAU))


def fibonacci_windows() -> WindowSet:
    """W_a = (tau - 2, tau - 1], W_b = (-1, tau - 2] for the fixed point with seed a|a."""
    return WindowSet(
        {"a": Interval(TAU - 2, TAU - 1), "b": Interval(QuadElement(-1, 0, 5), TAU - 2)},
        FIBONACCI_CPS,
    )


def window_correlation(ws: WindowSet, alpha: str, beta: str, z: QuadElement):
    """``vol(W_alpha & (W_beta - z*)) / vol(W)``."""
    return ws.windows[alpha].overlap(ws.windows[beta].shifted(-z.star())) / ws.volume()


def eta_autocorrelation(ws: WindowSet, z: QuadElement):
    """``dens * vol(W & (z* + W)) / vol(W)``."""
    w = ws.total()
    return ws.density() * w.overlap(w.shifted(z.star())) / ws.volume()


def window_overlap(ws: WindowSet, alpha: str, beta: str, y: float) -> float:
    """The correlation as a continuous function of the internal shift y = z*."""
    a, b = ws.windows[alpha], ws.windows[beta]
    lo = max(float(a.lo), float(b.lo) - y)
    hi = min(float(a.hi), float(b.hi) - y)
    return max(0.0, hi - lo) / float(ws.volume())


def covariogram(ws: WindowSet, y: float) -> float:
    """``vol(W & (W - y)) / vol(W)``."""
    w = ws.total()
    return max(0.0, min(float(w.hi), float(w.hi) - y) - max(float(w.lo), float(w.lo) - y)) / float(ws.volume())


def model_set(ws: WindowSet, lo: float, hi: float) -> list[tuple[str, QuadElement]]:
    """Points of the coloured model set in [lo, hi], honouring the window boundary flags."""
    w = ws.total()
    out = []
    for x in ws.cps.points(lo, hi, float(w.lo), float(w.hi)):
        letter = ws.letter_of(x.star())
        if letter is not None and lo <= float(x) <= hi:
            out.append((letter, x))
    out.sort(key=lambda p: float(p[1]))
    return out


# -- Fibonacci diffraction ------------------------------------------------------------


def sinc(x: float) -> float:
    return 1.0 if x == 0 else math.sin(x) / x


def fourier_module_element(m: int, n: int) -> QuadElement:
    """``k = (m + n*tau) / sqrt(5)``."""
    return (QuadElement(m, 0, 5) + TAU * n) / SQRT5


def _check_in_module(k: QuadElement) -> QuadElement:
    if not isinstance(k, QuadElement):
        k = QuadElement(k, 0, 5)
    if (not k.is_rational() and k.d != 5) or not (k * SQRT5).is_integral():
        raise ValueError(f"{k} is not in the Fourier module Z[tau]/sqrt(5)")
    return k


@dataclass(frozen=True)
class IntensityMatrix:
    k: QuadElement
    letters: tuple[str, ...]
    matrix: np.ndarray

    def __getitem__(self, pair) -> complex:
        i, j = (self.letters.index(x) for x in pair)
        return complex(self.matrix[i, j])

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.abs(self.matrix - self.matrix.conj().T).max() <= tol)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix).min())

    def det(self) -> complex:
        return complex(np.linalg.det(self.matrix))

    def total(self) -> complex:
        return complex(self.matrix.sum())


def fibonacci_intensities(k) -> IntensityMatrix:
    """Intensity matrix I(k) for k in Z[tau]/sqrt(5)."""
    k = _check_in_module(k)
    ks = float(k.star())
    tau = float(TAU)
    s1 = sinc(math.pi * ks)
    s2 = sinc(math.pi * ks / tau)
    off = s1 * s2 / tau**3
    m = np.array(
        [
            [s1 * s1 / tau**2, cmath.exp(-1j * math.pi * tau * ks) * off],
            [cmath.exp(1j * math.pi * tau * ks) * off, s2 * s2 / tau**4],
        ],
        dtype=complex,
    )
    return IntensityMatrix(k, ("a", "b"), m)


def window_amplitudes(ws: WindowSet, k) -> dict[str, complex]:
    """``F_alpha(k) = integral over W_alpha of exp(2 pi i k* y) dy``."""
    ks = float(QuadElement(k, 0, 5).star() if not isinstance(k, QuadElement) else k.star())
    out = {}
    for x, w in ws.windows.items():
        lo, hi = float(w.lo), float(w.hi)
        if ks == 0:
            out[x] = complex(hi - lo)
        else:
            out[x] = (cmath.exp(2j * math.pi * ks * hi) - cmath.exp(2j * math.pi * ks * lo)) / (2j * math.pi * ks)
    return out


def intensities_from_windows(ws: WindowSet, k) -> IntensityMatrix:
    """``I[a, b](k) = conj(F_a) F_b / vol(W)^2``, computed directly from the windows."""
    amps = window_amplitudes(ws, k)
    vol = float(ws.volume())
    letters = ws.letters
    m = np.array([[amps[a].conjugate() * amps[b] for b in letters] for a in letters]) / vol**2
    return IntensityMatrix(k, letters, m)


def verify_intensity_renorm(k) -> float:
    """Largest residual of the four renormalisation identities linking I(k) and I(tau k)."""
    k = _check_in_module(k)
    tau = float(TAU)
    lhs = fibonacci_intensities(k)
    rhs = fibonacci_intensities(TAU * k)
    kf = float(k)
    ph = cmath.exp(-2j * math.pi * tau * kf)
    aa, ab, ba, bb = (rhs[p] for p in (("a", "a"), ("a", "b"), ("b", "a"), ("b", "b")))
    expected = {
        ("a", "a"): (aa + ab + ba + bb) / tau**2,
        ("a", "b"): ph * (aa + ba) / tau**2,
        ("b", "a"): ph.conjugate() * (aa + ab) / tau**2,
        ("b", "b"): aa / tau**2,
    }
    return max(abs(lhs[p] - v) for p, v in expected.items())


def total_diffraction(k) -> float:
    """``(tau/sqrt 5 * sinc(pi tau k*))^2``."""
    k = _check_in_module(k)
    tau = float(TAU)
    return (tau / math.sqrt(5) * sinc(math.pi * tau * float(k.star()))) ** 2


def fibonacci_density() -> QuadElement:
    return fibonacci_windows().density()


# -- numerical covering windows ------------------------------------------------------


@dataclass(frozen=True)
class CoveringWindows:
    hulls: dict
    n_points: int

    def hausdorff(self, x: str, y: str) -> float:
        (a0, a1), (b0, b1) = self.hulls[x], self.hulls[y]
        return max(abs(a0 - b0), abs(a1 - b1))

    def bar_partners_share(self, rule: InflationRule, tol: float = 1e-3) -> bool:
        P = detect_bar_swap(rule)
        if P is None:
            return False
        return all(self.hausdorff(x, P[x]) < tol for x in rule.alphabet)


def covering_windows(rule: InflationRule, min_points: int = 100_000) -> CoveringWindows:
    """Interval hulls of the star images of left endpoints, per letter."""
    pf = perron_data(rule)
    if not pf.exact or pf.lam_exact.is_rational():
        raise ValueError("covering windows need an irrational quadratic multiplier")
    patch = generate_patch(rule, steps=1)
    while len(patch) < min_points:
        patch = generate_patch(rule, patch.seed, patch.steps + 1)
    c = patch.coords
    star = (patch.A.astype(float) - patch.B.astype(float) * math.sqrt(c.d)) / c.den
    hulls = {}
    for i, x in enumerate(rule.alphabet):
        sel = star[patch.letters == i]
        hulls[x] = (float(sel.min()), float(sel.max()))
    return CoveringWindows(hulls, len(patch))
