"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line (collected again in the terminal summary)
and then asserts, so a failing criterion also fails the run.
"""

import math
import time

import numpy as np

from aperiodica import SQRT2, TAU, QuadElement
from aperiodica.ida import common_kernel, ida_basis, is_irreducible
from aperiodica.inflation import InflationRule, displacement_sets
from aperiodica.modelset import (
    fibonacci_intensities,
    fibonacci_windows,
    fourier_module_element,
    total_diffraction,
    verify_intensity_renorm,
    window_correlation,
)
from aperiodica.patch import empirical_correlations, generate_patch, return_modules
from aperiodica.renorm import solve_correlations
from aperiodica.spectral import (
    asymptotic_overlap,
    eta_pm,
    large_patch,
    nondecay_test,
    spectral_report,
    triple_frequencies,
    tsm_limit_correlation,
)

from conftest import ACCEPTANCE_LINES, BUNDLED


def record(n: int, checks: dict) -> None:
    failed = [name for name, ok in checks.items() if not ok]
    status = "PASS" if not failed else "FAIL"
    detail = f"{len(checks)} checks" if not failed else "failed: " + ", ".join(failed)
    line = f"criterion {n}: {status} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert not failed, line


def q5(x):
    return QuadElement(x, 0, 5)


def test_criterion_1_fibonacci_dimension(fib):
    t0 = time.perf_counter()
    sym = solve_correlations(fib).dimension
    nosym = solve_correlations(fib, symmetric=False).dimension
    elapsed = time.perf_counter() - t0
    record(1, {
        "dimension 1 with symmetry": sym == 1,
        "dimension 1 without symmetry": nosym == 1,
        "under 1 s": elapsed < 1.0,
    })


def test_criterion_2_fibonacci_values(fib_table):
    t = fib_table
    record(2, {
        "aa(0) = 1/tau": t("a", "a", 0) == 1 / TAU,
        "bb(0) = 1/tau^2": t("b", "b", 0) == 1 / TAU**2,
        "ab(tau) = 1/tau^2": t("a", "b", TAU) == 1 / TAU**2,
        "aa(tau) = 1/tau^3": t("a", "a", TAU) == 1 / TAU**3,
        "ba(1) = 1/tau^2": t("b", "a", 1) == 1 / TAU**2,
        "aa(1) = 0": t("a", "a", 1) == 0,
        "bb(1) = 0": t("b", "b", 1) == 0,
        "ab(1/tau) = 0": t("a", "b", 1 / TAU) == 0,
    })


def test_criterion_3_model_set_agreement(fib_table):
    ws = fibonacci_windows()
    mismatches = compared = 0
    for m in range(-20, 21):
        for n in range(-20, 21):
            z = q5(m) + TAU * n
            if abs(float(z)) > 5:
                continue
            for a in "ab":
                for b in "ab":
                    compared += 1
                    mismatches += window_correlation(ws, a, b, z) != fib_table(a, b, z)
    record(3, {"exact agreement": mismatches == 0, "points compared": compared > 500})


def test_criterion_4_intensities():
    rng = np.random.default_rng(2024)
    ks = [fourier_module_element(int(m), int(n)) for m, n in rng.integers(-100, 101, size=(100, 2))]
    herm = psd = det0 = True
    for k in ks:
        im = fibonacci_intensities(k)
        herm &= im.is_hermitian(1e-12)
        psd &= im.min_eigenvalue() > -1e-12
        det0 &= abs(im.det()) < 1e-12
    relation = max(verify_intensity_renorm(k) for k in ks[:50])
    total0 = fibonacci_intensities(q5(0)).total()
    extinct = max(total_diffraction(TAU * m) for m in (1, -1, 2, -2))
    record(4, {
        "sum I(0) = 1": abs(total0 - 1) < 1e-12,
        "hermitian": herm,
        "positive semidefinite": psd,
        "det = 0": det0,
        "renormalisation relations": relation < 1e-12,
        "extinction at m tau": extinct < 1e-12,
    })


def test_criterion_5_ida(rules):
    fib = ida_basis(displacement_sets(rules["fibonacci"]))
    tm = ida_basis(displacement_sets(rules["thue_morse"]))
    rs = ida_basis(displacement_sets(rules["rudin_shapiro"]))
    record(5, {
        "Fibonacci dimension 4": fib.dimension == 4,
        "Fibonacci irreducible": is_irreducible(fib),
        "TM dimension 2": tm.dimension == 2,
        "TM reducible": not is_irreducible(tm),
        "RS reducible": not is_irreducible(rs),
        "RS kernel (1,-1,1,-1)": common_kernel(displacement_sets(rules["rudin_shapiro"])) == [(1, -1, 1, -1)],
    })


def test_criterion_6_thue_morse_and_rudin_shapiro(rules, tm_table):
    t0 = time.perf_counter()
    plus = all(eta_pm(tm_table, n)[0] == 1 for n in range(-64, 65))
    third = q5(1) / 3
    minus = eta_pm(tm_table, 1)[1] == -third and eta_pm(tm_table, -1)[1] == -third
    dims = {}
    for name in ("thue_morse", "rudin_shapiro"):
        dims[name] = (
            solve_correlations(rules[name], support_mode="free").dimension,
            solve_correlations(rules[name]).dimension,
        )
    elapsed = time.perf_counter() - t0
    record(6, {
        "eta+ = 1 for |n| <= 64": plus,
        "eta-(+-1) = -1/3": minus,
        "TM dimensions 2 / 1": dims["thue_morse"] == (2, 1),
        "RS dimensions 2 / 1": dims["rudin_shapiro"] == (2, 1),
        "under 5 s": elapsed < 5.0,
    })


def test_criterion_7_twisted_silver_mean(rules):
    tsm = rules["tsm"]
    x = -1 + 3 * SQRT2 / 4
    y = QuadElement(1, 0, 2) / 2 - SQRT2 / 4
    z = QuadElement(3, 0, 2) / 2 - SQRT2
    table = {"".join(t.word): t.frequency for t in triple_frequencies(tsm, canonical=True)}
    expected = {"aaa": x, "aAB": x, "abA": y, "aab": z, "bAa": x, "bAA": z}
    verdicts = {name: spectral_report(rules[name]).verdict for name in ("tsm", "tsm_variant_sigma_tilde", "fibonacci")}
    record(7, {
        "triple frequencies": table == expected,
        "triples sum to 1/2": sum(table.values(), QuadElement(0, 0, 2)) == QuadElement(1, 0, 2) / 2,
        "c(ab, bA) = 1 - sqrt 2": asymptotic_overlap(tsm, "ab", "bA").value == 1 - SQRT2,
        "limit correlation = 1 - sqrt 2": tsm_limit_correlation(tsm) == 1 - SQRT2,
        "return index 1 for tsm": return_modules(tsm).index == 1,
        "return index 2 for variant": return_modules(rules["tsm_variant_sigma_tilde"]).index == 2,
        "tsm mixed-singular": verdicts["tsm"] == "mixed-singular",
        "variant pure-point": verdicts["tsm_variant_sigma_tilde"] == "pure-point",
        "Fibonacci pure-point": verdicts["fibonacci"] == "pure-point",
    })


def test_criterion_8_oracle_equivalence(rules):
    t0 = time.perf_counter()
    checks = {}
    for name in BUNDLED:
        rule = rules[name]
        table = solve_correlations(rule)
        patch = large_patch(rule, 100_000)
        emp = empirical_correlations(patch, 10)
        tol = 5 / math.sqrt(emp.n_points)
        worst = 0.0
        for (a, b), zs in table.support_points(10).items():
            for zz in zs:
                worst = max(worst, abs(emp.value(a, b, zz) - float(table(a, b, zz))))
        for a, b, zz, v in emp.items():
            worst = max(worst, abs(v - float(table(a, b, zz))))
        checks[f"{name} within 5/sqrt N"] = worst < tol
    tm = nondecay_test(rules["thue_morse"], 1, n_max=6, min_tiles=1_000_000)
    lam = 1 + SQRT2
    tsm = nondecay_test(rules["tsm"], 1 + lam, n_max=6, min_tiles=1_000_000)
    checks["TM tail -1/3"] = abs(tm.tail + 1 / 3) < 0.02
    checks["TSM tail 1 - sqrt 2"] = abs(tsm.tail - (1 - math.sqrt(2))) < 0.02
    checks["patches of 10^6 tiles"] = min(tm.n_tiles, tsm.n_tiles) >= 1_000_000
    checks["under 2 min"] = time.perf_counter() - t0 < 120
    record(8, checks)


def test_criterion_9_renormalisation_residual(rules):
    checks = {}
    for name in BUNDLED:
        table = solve_correlations(rules[name])
        letters = rules[name].alphabet
        pts = table.support_points(12)
        exact_ok = all(table.residual(a, b, zz) == 0 for (a, b), zs in pts.items() for zz in zs)
        # off-support points of the difference module as well
        zero = next(iter(pts[letters[0], letters[0]])) * 0
        lengths = sorted({zz for zs in pts.values() for zz in zs}, key=float)[:40]
        for u in lengths:
            for v in lengths[:10]:
                for a in letters:
                    for b in letters:
                        exact_ok &= table.residual(a, b, u + v + zero) == 0
        checks[f"{name} exact"] = exact_ok
        ftable = solve_correlations(rules[name], mode="float")
        ftable.use_harvested_support(8)
        fpts = ftable.support_points(8)
        worst = max(abs(ftable.residual(a, b, zz)) for (a, b), zs in fpts.items() for zz in zs)
        checks[f"{name} float"] = worst < 1e-12
    trib = InflationRule(("a", "b", "c"), {"a": "ab", "b": "ac", "c": "a"}, name="trib")
    ftable = solve_correlations(trib, mode="float")
    ftable.use_harvested_support(8)
    worst = max(abs(ftable.residual(a, b, zz)) for (a, b), zs in ftable.support_points(8).items() for zz in zs)
    checks["non-quadratic float"] = worst < 1e-12
    record(9, checks)
