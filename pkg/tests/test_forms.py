import math
import re
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobius_va.circle import MoebiusElement, TestFunction
from mobius_va.errors import TruncationError
from mobius_va.forms import (
    GramTower,
    Involution,
    build_invariant_form,
    extend_form_to_smeared,
    invariance_check,
    involutive_structure_check,
    leading_minors,
    opposite_field,
    pair,
    quotient_model,
    radical,
)
from mobius_va.graded import apply, exact_det
from mobius_va.vertex import build_heisenberg, build_virasoro


@pytest.fixture(scope="module")
def heis():
    return build_heisenberg(7)


def heisenberg_norm(label: str) -> int:
    """``(J_{-lam} Omega, J_{-lam} Omega)`` for the bilinear form: ``(-1)^len * prod k^m_k m_k!``."""
    parts = [int(k) for k in re.findall(r"J\[-(\d+)\]", label)]
    value = (-1) ** len(parts)
    for k, mult in Counter(parts).items():
        value *= k**mult * math.factorial(mult)
    return value


def test_heisenberg_gram_closed_form(heis):
    G = build_invariant_form(heis)
    for n, M in enumerate(G.matrices):
        for i, label in enumerate(heis.labels[n]):
            for j in range(M.shape[1]):
                assert M[i, j] == (heisenberg_norm(label) if i == j else 0)


def test_normalization_scales_everything(heis):
    G1 = build_invariant_form(heis)
    G3 = build_invariant_form(heis, normalization=3)
    assert all((3 * a == b).all() for a, b in zip(G1.matrices, G3.matrices))


def test_sesquilinear_needs_involution(heis):
    with pytest.raises(ValueError):
        build_invariant_form(heis, "sesquilinear")
    with pytest.raises(ValueError):
        build_invariant_form(heis, "quadratic")


def test_heisenberg_is_unitary(heis):
    theta = Involution.from_signs(heis, {"J": -1})
    S = build_invariant_form(heis, "sesquilinear", theta=theta)
    assert S.is_hermitian()
    rep = involutive_structure_check(heis, theta, S)
    assert rep.structure_ok and rep.unitary
    assert rep.first_failing_minor is None


def test_wrong_sign_breaks_positivity(heis):
    theta = Involution.from_signs(heis, {"J": 1})
    S = build_invariant_form(heis, "sesquilinear", theta=theta)
    assert not involutive_structure_check(heis, theta, S).unitary


def test_ising_unitary_only_after_quotient():
    model = build_virasoro(Fraction(1, 2), 7)
    theta = Involution.from_signs(model, {"L": 1})
    S = build_invariant_form(model, "sesquilinear", theta=theta)
    rep = involutive_structure_check(model, theta, S)
    assert rep.structure_ok
    assert not rep.unitary and rep.unitary_after_quotient
    assert rep.null_dims[6] == 1 and sum(rep.null_dims[:6]) == 0


def test_lee_yang_is_not_unitary():
    model = build_virasoro(Fraction(-22, 5), 6)
    theta = Involution.from_signs(model, {"L": 1})
    rep = involutive_structure_check(model, theta, build_invariant_form(model, "sesquilinear", theta=theta))
    assert rep.first_failing_minor == (2, 1)
    assert not rep.unitary_after_quotient


@settings(max_examples=15, deadline=None)
@given(st.fractions(min_value=-30, max_value=30, max_denominator=12))
def test_virasoro_grams_symmetric_with_kac_level2(c):
    model = build_virasoro(c, 4)
    G = build_invariant_form(model)
    assert G.is_symmetric()
    assert G.matrices[2][0, 0] == c / 2
    # level 3: single state L_{-3} Omega with norm 2c
    assert G.matrices[3][0, 0] == 2 * c
    # level 4 Kac determinant c^2 (5c + 22) / 2 up to the basis normalization
    assert (exact_det(G.matrices[4]) == 0) == (c == 0 or c == Fraction(-22, 5))


def test_radical_and_quotient():
    model = build_virasoro(Fraction(-22, 5), 7)
    G = build_invariant_form(model)
    rad = radical(G)
    assert [r.shape[0] for r in rad] == [0, 0, 0, 0, 1, 1, 2, 2]
    simple = quotient_model(model, G)
    G2 = build_invariant_form(simple)
    assert all(r.shape[0] == 0 for r in radical(G2))
    assert list(simple.dims) == [1, 0, 1, 1, 1, 1, 2, 2]


def test_radical_is_annihilated_by_the_form():
    model = build_virasoro(Fraction(1, 2), 7)
    G = build_invariant_form(model)
    (null,) = radical(G)[6]
    assert all(x == 0 for x in G.matrices[6] @ null)


def test_opposite_field_of_quasiprimary(heis):
    J = heis.generator("J")
    Jo = opposite_field(heis, J)
    window = heis.window()
    for n in range(-3, 4):
        assert Jo.mode(n).equals(J.mode(-n).scale(-1), sources=window, targets=window)


def test_pair_matches_gram(heis):
    J = heis.generator("J")
    G = build_invariant_form(heis)
    v = apply(J.mode(-2), heis.vacuum)
    assert pair(G, v, v) == -2
    assert pair(G, heis.vacuum, heis.vacuum) == 1


def test_invariance_check(heis):
    G = build_invariant_form(heis)
    fs = [TestFunction.e(2), TestFunction({-1: 0.5, 1: 1j}, 1)]
    rep = invariance_check(heis, G, smeared=fs, gammas=[MoebiusElement.rotation(0.7)])
    assert rep.passed
    assert rep.max_deviation < 1e-10


def test_invariance_check_detects_a_wrong_form(heis):
    G = build_invariant_form(heis)
    bad = [M.copy() for M in G.matrices]
    bad[2][1, 1] = 5
    rep = invariance_check(heis, GramTower("bilinear", bad, 1))
    assert not rep.passed and rep.violations


def test_gram_json(heis):
    data = build_invariant_form(heis).to_json()
    assert data["kind"] == "bilinear"


def test_leading_minors_exact():
    M = np.array([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(-1)]], dtype=object)
    assert leading_minors(M) == [2, -3]


def test_smeared_extension_sides_agree(heis):
    G = build_invariant_form(heis)
    J = heis.generator("J")
    w1 = [(J, TestFunction.e(-1)), (J, TestFunction.e(-2))]
    w2 = [(J, TestFunction({-3: 1.0, -2: 0.5j}, 3))]
    vals = [complex(extend_form_to_smeared(heis, G, w1, w2, s)) for s in ("direct", "left", "right")]
    assert max(abs(v - vals[0]) for v in vals) < 1e-12
    # (J_-1 J_-2 Omega, J_-3 Omega) = 0 by weight grading against level-3 orthogonality
    assert abs(vals[0]) < 1e-12


def test_smeared_extension_raises_on_truncation():
    model = build_heisenberg(4)
    G = build_invariant_form(model)
    J = model.generator("J")
    big = [(J, TestFunction.e(-3))] * 2
    with pytest.raises(TruncationError):
        extend_form_to_smeared(model, G, big, big, "direct")
