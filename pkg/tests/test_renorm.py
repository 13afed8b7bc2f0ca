import csv
import functools
import io
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from aperiodica import TAU, QuadElement
from aperiodica.inflation import InflationRule, displacement_sets, perron_data
from aperiodica.renorm import (
    CSV_COLUMNS,
    InconsistencyError,
    build_system,
    core_radius,
    format_rows,
    normalize,
    seed_support,
    solve_correlations,
    solve_selfconsistency,
)

from conftest import BUNDLED

TRIB = InflationRule(("a", "b", "c"), {"a": "ab", "b": "ac", "c": "a"}, name="trib")


def q(x):
    return QuadElement(x, 0, 5)


def test_core_radius(rules):
    fib = rules["fibonacci"]
    assert core_radius(displacement_sets(fib), TAU) == TAU**2
    assert core_radius(displacement_sets(rules["thue_morse"]), q(2)) == 1
    const3 = InflationRule(("a", "b"), {"a": "aab", "b": "bba"})
    assert core_radius(displacement_sets(const3), q(3)) == 1


def test_fibonacci_support_near_origin(fib):
    support = seed_support(fib, TAU**2)
    union = set().union(*support.values())
    assert {z for z in union if 0 <= z <= TAU + 1} == {q(0), q(1), TAU, TAU + 1}


def test_support_small_cases(rules):
    tm = seed_support(rules["thue_morse"], 1)
    assert set().union(*tm.values()) <= {q(-1), q(0), q(1)}
    tsm = rules["tsm"]
    pf = perron_data(tsm)
    support = seed_support(tsm, core_radius(displacement_sets(tsm), pf.lam_exact))
    for x in tsm.alphabet:
        assert 0 in support[x, x]


def test_fibonacci_terms(fib):
    system = build_system(fib)
    z = TAU + 1
    assert system.terms("b", "b", z) == [("a", "a", z / TAU)]
    terms = system.terms("a", "b", z)
    assert sorted(terms, key=lambda t: t[:2]) == [("a", "a", z / TAU - 1), ("b", "a", z / TAU - 1)]


def test_thue_morse_terms(rules):
    system = build_system(rules["thue_morse"])
    z = q(3)
    args = sorted(w for _, _, w in system.terms("a", "A", z))
    assert args == sorted([z / 2, (z - 1) / 2, (z + 1) / 2, z / 2])


def test_dimensions(fib, rules):
    assert solve_correlations(fib).dimension == 1
    assert solve_correlations(fib, symmetric=False).dimension == 1
    for name in ("thue_morse", "rudin_shapiro"):
        assert solve_correlations(rules[name]).dimension == 1
        free = solve_correlations(rules[name], support_mode="free")
        assert free.dimension == 2
        # the normalisation at the origin pins both directions
        assert free.extra == []


def test_fibonacci_values(fib_table):
    t = fib_table
    assert t("a", "a", 0) == 1 / TAU
    assert t("b", "b", 0) == 1 / TAU**2
    assert t("a", "b", TAU) == 1 / TAU**2
    assert t("a", "a", TAU) == 1 / TAU**3
    assert t("b", "a", 1) == 1 / TAU**2
    assert t("a", "a", 1) == 0
    assert t("b", "b", 1) == 0
    assert t("a", "b", 1 / TAU) == 0


def test_eta_total(fib_table):
    assert fib_table.eta_total(0) == 1
    assert fib_table.eta_total(TAU) == 1 / TAU
    assert fib_table.eta_total(1 / TAU) == 0


def test_normalisation_invariants(rules):
    for name in BUNDLED:
        t = solve_correlations(rules[name])
        rule = rules[name]
        pf = perron_data(rule)
        assert sum((t(a, a, 0) for a in rule.alphabet), q(0)) == 1
        for a in rule.alphabet:
            assert t(a, a, 0) == pf.frequencies[a]
            for b in rule.alphabet:
                if a != b:
                    assert t(a, b, 0) == 0


def test_support_enlargement_is_harmless(fib, fib_table):
    system = build_system(fib, extra_positions=(1 / TAU, -1 / TAU))
    table = normalize(system, solve_selfconsistency(system))
    assert table.dimension == 1
    for a in "ab":
        for b in "ab":
            assert table(a, b, 1 / TAU) == 0
            assert table(a, b, -1 / TAU) == 0
            for z in fib_table.system.support[a, b]:
                assert table(a, b, z) == fib_table(a, b, z)


def test_far_value_against_counting(fib_table):
    from aperiodica.patch import generate_patch, pair_correlation_at

    patch = generate_patch(fib_table.rule, steps=12)
    assert len(patch) > 100_000
    z = TAU**3
    assert abs(pair_correlation_at(patch, "a", "a", z) - float(fib_table("a", "a", z))) < 1e-2


def test_bad_support_is_inconsistent(fib):
    support = {(a, b): {q(0)} for a in "ab" for b in "ab"}
    with pytest.raises(InconsistencyError):
        solve_selfconsistency(build_system(fib, support=support))


def test_exact_mode_falls_back_with_warning():
    with pytest.warns(RuntimeWarning, match="float mode"):
        system = build_system(TRIB, mode="exact")
    assert not system.exact


def test_float_mode_tribonacci():
    table = solve_correlations(TRIB, mode="float")
    assert table.dimension == 1
    table.use_harvested_support(8)
    points = table.support_points(8)
    assert sum(len(v) for v in points.values()) > 20
    worst = max(abs(table.residual(a, b, z)) for (a, b), zs in points.items() for z in zs)
    assert worst < 1e-12


def test_float_mode_requires_harvest():
    table = solve_correlations(TRIB, mode="float")
    with pytest.raises(ValueError, match="harvested support"):
        table("a", "a", 20.0)


def test_float_mode_matches_exact(fib_table):
    table = solve_correlations(fib_table.rule, mode="float")
    table.use_harvested_support(6)
    for (a, b), zs in fib_table.support_points(6).items():
        for z in zs:
            assert table(a, b, float(z)) == pytest.approx(float(fib_table(a, b, z)), abs=1e-12)


@pytest.mark.parametrize("name", BUNDLED)
def test_symmetry_and_residual(rules, name):
    t = solve_correlations(rules[name])
    for (a, b), zs in t.support_points(8).items():
        for z in zs:
            assert t(a, b, z) == t(b, a, -z)
            assert t.residual(a, b, z) == 0
            assert t(a, b, z) > 0


@functools.cache
def _fib():
    return solve_correlations(InflationRule(("a", "b"), {"a": "ab", "b": "a"}))


@settings(max_examples=40, deadline=None)
@given(st.integers(-12, 12), st.integers(-12, 12))
def test_fibonacci_relation_on_module_points(m, n):
    # any point of Z[tau], on or off the support
    t = _fib()
    z = m + n * TAU
    for a in "ab":
        for b in "ab":
            assert t.residual(a, b, z) == 0
            assert t(a, b, z) == t(b, a, -z)


def test_csv_output(fib_table):
    text = format_rows(fib_table.rows(3))
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert ["a", "b", "1/2 + 1/2*sqrt(5)", "1.61803398874989", "3/2 - 1/2*sqrt(5)", "0.381966011250105"] in rows
    assert text == format_rows(fib_table.rows(3))


def test_nonsymmetric_fibonacci_matches(fib, fib_table):
    t = solve_correlations(fib, symmetric=False)
    for (a, b), zs in fib_table.support_points(5).items():
        for z in zs:
            assert t(a, b, z) == fib_table(a, b, z)


def test_warning_free_exact_run(fib):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve_correlations(fib)
