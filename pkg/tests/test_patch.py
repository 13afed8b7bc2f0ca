import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aperiodica import TAU, QuadElement
from aperiodica.inflation import InflationRule, RuleError, perron_data
from aperiodica.patch import (
    default_seed,
    empirical_correlations,
    generate_patch,
    lattice_basis,
    return_modules,
    signed_correlation_at,
    word_frequencies,
)
from aperiodica.renorm import solve_correlations


def q(x):
    return QuadElement(x, 0, 5)


def test_fibonacci_patch_layout(fib):
    patch = generate_patch(fib, "a|a", steps=2)
    start = patch.origin_index
    assert patch.word(start, start + 5) == tuple("abaab")
    positions = [patch.position(start + i) for i in range(5)]
    assert positions == [q(0), TAU, TAU + 1, 2 * TAU + 1, 3 * TAU + 1]
    assert patch.word(start - 1, start) == ("a",)


def test_thue_morse_single_step(rules):
    patch = generate_patch(rules["thue_morse"], "a|a", steps=1)
    start = patch.origin_index
    assert patch.word(start, start + 2) == ("a", "A")


def test_growth_ratio(fib):
    n1 = len(generate_patch(fib, "a|a", steps=5))
    n2 = len(generate_patch(fib, "a|a", steps=6))
    # one step is sigma^2 for this seed
    assert n2 / n1 == pytest.approx(float(TAU) ** 2, rel=1e-2)


def test_illegal_seed_rejected(fib):
    with pytest.raises(RuleError, match="not legal"):
        generate_patch(fib, "b|b")


def test_default_seed_is_legal(rules):
    for name, rule in rules.items():
        left, right = default_seed(rule)
        patch = generate_patch(rule, steps=1)
        assert patch.seed == (left, right)


def test_frequencies_converge(rules):
    for name in ("fibonacci", "silver_mean", "tsm"):
        rule = rules[name]
        patch = generate_patch(rule, steps=1)
        while len(patch) < 50_000:
            patch = generate_patch(rule, patch.seed, patch.steps + 1)
        table = empirical_correlations(patch, 1.0)
        freq = perron_data(rule).frequencies
        bound = 2 / math.sqrt(table.n_points)
        for x, f in table.frequencies().items():
            assert abs(f - float(freq[x])) < bound


def test_word_frequencies_sum_to_one(fib):
    patch = generate_patch(fib, steps=6)
    wf = word_frequencies(patch, 2)
    assert sum(wf.values()) == pytest.approx(1.0)
    assert ("b", "b") not in wf


def test_thue_morse_signed_correlation(rules):
    patch = generate_patch(rules["thue_morse"], "a|a", steps=9)
    assert signed_correlation_at(patch, 1) == pytest.approx(-1 / 3, abs=1e-3)


def test_oracle_matches_renorm(fib, fib_table):
    patch = generate_patch(fib, steps=9)
    table = empirical_correlations(patch, 5)
    tol = 3 / math.sqrt(table.n_points)
    seen = 0
    for a, b, z, v in table.items():
        assert abs(v - float(fib_table(a, b, z))) < tol
        seen += 1
    # every non-zero renormalised value shows up in the patch
    for (a, b), zs in fib_table.support_points(5).items():
        for z in zs:
            assert z in table.support(a, b)
    assert seen > 20


def test_float_patch_matches_float_table():
    trib = InflationRule(("a", "b", "c"), {"a": "ab", "b": "ac", "c": "a"}, name="trib")
    patch = generate_patch(trib, steps=1)
    while len(patch) < 200_000:
        patch = generate_patch(trib, patch.seed, patch.steps + 1)
    assert not patch.exact
    emp = empirical_correlations(patch, 3)
    table = solve_correlations(trib, mode="float")
    table.use_harvested_support(3)
    tol = 3 / math.sqrt(emp.n_points)
    for a, b, z, v in emp.items():
        assert abs(v - table(a, b, z)) < tol


def test_radius_too_large(fib):
    patch = generate_patch(fib, "a|a", steps=1)
    with pytest.raises(ValueError):
        empirical_correlations(patch, 50)


def test_return_module_indices(rules):
    assert return_modules(rules["fibonacci"]).index == 1
    assert return_modules(rules["tsm"]).index == 1
    assert return_modules(rules["tsm_variant_sigma_tilde"]).index == 2


def test_return_module_inside_length_module(rules):
    rep = return_modules(rules["tsm_variant_sigma_tilde"])
    assert rep.return_index >= rep.index >= 1
    assert len(rep.return_module) == len(rep.tile_length_module) == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-30, 30), st.integers(-30, 30)), min_size=2, max_size=6))
def test_lattice_basis_spans_same_group(vectors):
    basis = lattice_basis(vectors)
    if not basis:
        assert not any(any(v) for v in vectors)
        return
    m = np.array(basis, dtype=float)
    # every input vector is an integer combination of the basis
    for v in vectors:
        coef, *_ = np.linalg.lstsq(m.T, np.array(v, dtype=float), rcond=None)
        assert np.allclose(m.T @ coef, v)
        assert np.allclose(coef, np.rint(coef), atol=1e-9)


_TABLES: dict = {}


def _table(rule):
    if rule.name not in _TABLES:
        _TABLES[rule.name] = solve_correlations(rule)
    return _TABLES[rule.name]


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["fibonacci", "thue_morse", "rudin_shapiro", "silver_mean", "tsm"]), st.data())
def test_counting_matches_renorm_for_any_seed(name, data):
    from aperiodica import load_rule
    from aperiodica.inflation import legal_words
    from aperiodica.patch import fixing_power, pair_correlation_at

    rule = load_rule(name)
    seeds = [w for w in legal_words(rule, 2) if fixing_power(rule, *w) is not None]
    seed = data.draw(st.sampled_from(seeds))
    patch = generate_patch(rule, seed, steps=1)
    while len(patch) < 100_000:
        patch = generate_patch(rule, seed, patch.steps + 1)
    table = _table(rule)
    pts = sorted(((a, b, z) for (a, b), zs in table.support_points(10).items() for z in zs),
                 key=lambda p: (p[0], p[1], float(p[2])))
    a, b, z = data.draw(st.sampled_from(pts))
    n = len(patch) * 0.8
    assert abs(pair_correlation_at(patch, a, b, z) - float(table(a, b, z))) < 5 / math.sqrt(n)
