import numpy as np
import pytest

from aperiodica.ida import (
    bar_swap_conjugator,
    block_forms,
    common_kernel,
    cyclic_probe,
    ida_basis,
    ida_report,
    is_irreducible,
)
from aperiodica.inflation import displacement_sets

from conftest import BUNDLED


@pytest.fixture(scope="module")
def algebras(rules):
    return {name: ida_basis(displacement_sets(rules[name])) for name in BUNDLED}


def test_dimensions(algebras):
    assert algebras["fibonacci"].dimension == 4
    assert algebras["thue_morse"].dimension == 2
    assert algebras["rudin_shapiro"].dimension < 16


def test_irreducibility(algebras):
    assert is_irreducible(algebras["fibonacci"])
    assert not is_irreducible(algebras["thue_morse"])
    assert not is_irreducible(algebras["rudin_shapiro"])


def test_common_kernels(rules):
    assert common_kernel(displacement_sets(rules["rudin_shapiro"])) == [(1, -1, 1, -1)]
    assert common_kernel(displacement_sets(rules["fibonacci"])) == []
    assert common_kernel(displacement_sets(rules["thue_morse"])) == []


def test_kernel_vector_annihilated(rules):
    disp = displacement_sets(rules["rudin_shapiro"])
    v = np.array([1, -1, 1, -1])
    for m in disp.digit_matrices().values():
        assert not (m @ v).any()


@pytest.mark.parametrize("name", BUNDLED)
def test_closure_exact(algebras, name):
    alg = algebras[name]
    for x in alg.basis:
        for y in alg.basis:
            assert alg.contains(x @ y)
    assert alg.closure_residual() < 1e-10
    assert alg.dimension <= alg.n**2


@pytest.mark.parametrize("name", BUNDLED)
def test_burnside_probe_consistent(algebras, name):
    alg = algebras[name]
    if is_irreducible(alg):
        assert cyclic_probe(alg, probes=100) == alg.n


def test_tm_invariant_vector(algebras):
    # (1, 1) spans a common invariant line of 1 and J
    v = np.array([1, 1])
    for m in algebras["thue_morse"].basis:
        w = m @ v
        assert w[0] == w[1]


def test_rs_blocks(rules):
    rule = rules["rudin_shapiro"]
    blocks = block_forms(rule, displacement_sets(rule))
    # expected blocks of the two digit matrices after conjugation, in a, b, A, B order
    d0 = np.array([[1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 1, 1], [0, 0, 0, 0]])
    d1 = np.array([[0, 0, 0, 0], [1, 1, 0, 0], [0, 0, 0, 0], [0, 0, 1, -1]])
    assert np.allclose(blocks[0], d0, atol=1e-12)
    assert np.allclose(blocks[1], d1, atol=1e-12)


def test_conjugator_is_involution(rules):
    t = bar_swap_conjugator(rules["rudin_shapiro"])
    assert np.allclose(t @ t, np.eye(4), atol=1e-12)


def test_report(rules):
    rep = ida_report(rules["thue_morse"], displacement_sets(rules["thue_morse"]))
    assert rep["dimension"] == 2
    assert rep["irreducible"] is False
