import csv
import io
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mobius_va.circle import LieElement, MoebiusElement, TestFunction, exp_lie
from mobius_va.errors import FitError, TruncationError
from mobius_va.graded import Covector
from mobius_va.vertex import build_heisenberg, build_virasoro
from mobius_va.wightman import (
    apply_word,
    bump_dictionary,
    correlator,
    correlators_to_csv,
    covariance_check,
    group_law_check,
    infinitesimal_covariance_check,
    multiply,
    order_estimate,
    reconstruct_model,
    reeh_schlieder_rank,
    smear,
    smeared_locality_leakage,
    u_of_gamma,
    vacuum_invariance_check,
)


@pytest.fixture(scope="module")
def heis():
    return build_heisenberg(8)


@st.composite
def band2(draw):
    coeffs = {n: complex(draw(st.floats(-1, 1)), draw(st.floats(-1, 1))) for n in range(-2, 3)}
    return TestFunction(coeffs, 2)


def two_point(f, g, weight=lambda n: n):
    """``<J(f) J(g)>`` from ``[J_m, J_n] = m delta``: ``sum_{n>0} w(n) f_n g_-n``."""
    return sum(weight(n) * complex(f.coefficient(n)) * complex(g.coefficient(-n)) for n in range(1, 10))


@settings(max_examples=25, deadline=None)
@given(band2(), band2())
def test_two_point_function(f, g):
    heis = _heis()
    J = heis.generator("J")
    assert abs(correlator(heis, [(J, f), (J, g)]) - two_point(f, g)) < 1e-12


@settings(max_examples=15, deadline=None)
@given(band2(), band2(), band2(), band2())
def test_four_point_function_is_wick(f1, f2, f3, f4):
    heis = _heis()
    J = heis.generator("J")
    got = correlator(heis, [(J, f1), (J, f2), (J, f3), (J, f4)])
    W = two_point
    expected = W(f1, f2) * W(f3, f4) + W(f1, f3) * W(f2, f4) + W(f1, f4) * W(f2, f3)
    assert abs(got - expected) < 1e-10


def test_virasoro_two_point():
    c = Fraction(-22, 5)
    model = build_virasoro(c, 8)
    T = model.generators[0]
    f = TestFunction({2: 1.0, 3: 0.5j}, 3)
    g = TestFunction({-2: 2.0, -3: 1.0}, 3)
    expected = two_point(f, g, lambda n: float(c) * (n**3 - n) / 12)
    assert abs(correlator(model, [(T, f), (T, g)]) - expected) < 1e-12


@lru_cache(maxsize=None)
def _heis():
    return build_heisenberg(8)


def test_correlator_raises_when_untrusted():
    model = build_heisenberg(3)
    J = model.generator("J")
    word = [(J, TestFunction.e(3)), (J, TestFunction.e(1)), (J, TestFunction.e(-2)), (J, TestFunction.e(-2))]
    with pytest.raises(TruncationError):
        correlator(model, word)


def test_correlator_csv_roundtrip(heis):
    J = heis.generator("J")
    word = [(J, TestFunction.e(1)), (J, TestFunction.e(-1))]
    text = correlators_to_csv([(word, correlator(heis, word))])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["k", "fields", "functions", "re", "im"]
    assert rows[1][:2] == ["2", "J;J"] and float(rows[1][3]) == 1.0


def test_smear_exact_and_lowering(heis):
    J = heis.generator("J")
    sm = smear(J, TestFunction.e(2) + TestFunction.e(-1))
    assert sm.operator.exact and sm.lowering == 2
    far = smear(J, TestFunction.e(-20))
    assert far.operator.tail == frozenset(range(heis.N + 1))


def test_multiply_is_pointwise():
    f = TestFunction({1: 1.0, -1: 2.0j}, 1)
    g = TestFunction({0: 0.5, 2: 1.0}, 2)
    z = np.exp(1j * np.linspace(0, 6, 9))
    assert np.allclose(multiply(f, g)(z), f(z) * g(z))


def test_apply_word_tracks_trust(heis):
    J = heis.generator("J")
    res = apply_word(heis, [(J, TestFunction.e(-5)), (J, TestFunction.e(-5))], heis.vacuum)
    assert res.discarded and res.trusted_below == heis.N + 1
    res = apply_word(heis, [(J, TestFunction.e(5)), (J, TestFunction.e(-5)), (J, TestFunction.e(-5))], heis.vacuum)
    assert res.trusted_below <= heis.N - 4


def test_rotation_covariance_is_exact_phase(heis):
    J = heis.generator("J")
    for n in (-3, 0, 2):
        res = covariance_check(heis, J, MoebiusElement.rotation(1.1), TestFunction.e(n), tol=1e-12)
        assert res.passed


def test_hyperbolic_covariance_small_model(heis):
    J = heis.generator("J")
    f = TestFunction({1: 1.0, -1: 0.5}, 1)
    for X in LieElement.real_basis():
        res = covariance_check(heis, J, exp_lie(X, 0.1), f, tol=1e-8)
        assert res.passed, res.max_deviation


def test_covariance_of_virasoro_field():
    model = build_virasoro(Fraction(1, 2), 8)
    T = model.generators[0]
    res = covariance_check(model, T, exp_lie(LieElement.hyperbolic_cos(), 0.1), TestFunction.e(0), tol=1e-8)
    assert res.passed, res.max_deviation


def test_group_law_and_vacuum(heis):
    rng = np.random.default_rng(3)
    g1, g2 = MoebiusElement.random(rng, 0.2), MoebiusElement.random(rng, 0.2)
    assert group_law_check(heis, g1, g2).passed
    assert vacuum_invariance_check(heis, g1).passed


def test_u_of_rotation_is_diagonal(heis):
    U = u_of_gamma(heis, MoebiusElement.rotation(0.5)).operator
    for n in range(heis.N + 1):
        blk = U.block(n, n)
        assert np.allclose(np.asarray(blk, complex), np.exp(0.5j * n) * np.eye(heis.dims[n]))


def test_infinitesimal_covariance_float(heis):
    J = heis.generator("J")
    f = TestFunction({1: 0.3 + 0.1j, -2: 1.0}, 2)
    res = infinitesimal_covariance_check(heis, J, LieElement.hyperbolic_sin(), f)
    assert res.max_deviation < 1e-12


def test_reconstruction_from_operators(heis):
    J = heis.generator("J")
    rec = reconstruct_model(heis.space, heis.vacuum, {"J": lambda f: smear(J, f).operator}, margin=heis.margin)
    assert rec.dims == {"J": 1}
    assert rec.model.dims == heis.dims


def test_bump_dictionary_supported_in_interval():
    fs = bump_dictionary((0.0, 1.0), 24, centers=3, widths=1)
    assert len(fs) == 3
    theta = np.linspace(1.5, 6.0, 50)
    for f in fs:
        assert np.max(np.abs(f.on_angles(theta))) < 0.05


def test_reeh_schlieder_small():
    model = build_heisenberg(6)
    one = reeh_schlieder_rank(model, (0.0, math.pi / 2), band=16, max_length=1, weight_cutoff=2, rel_tol=1e-8)
    assert one.full_dim == 4 and one.rank == 3  # J_{-1}^2 Omega needs two factors
    two = reeh_schlieder_rank(model, (0.0, math.pi / 2), band=16, max_length=2, weight_cutoff=2, rel_tol=1e-8)
    assert two.rank == 4
    with pytest.raises(ValueError):
        reeh_schlieder_rank(model, (0.0, 1.0), 8, 2, weight_cutoff=6)


def test_order_estimate(heis):
    J = heis.generator("J")
    vac = Covector.dual_basis(heis.space, 0, 0)
    est = order_estimate(heis, [J, J], heis.vacuum, vac, range(-4, 5))
    # nonzero pairings: <J_m J_-m> = m for m = 1..4
    m = np.arange(1, 5)
    slope = np.polyfit(np.log1p(m), np.log(m), 1)[0]
    assert not est.degenerate and est.points == 4
    assert est.degree == pytest.approx(slope, abs=1e-12)
    single = order_estimate(heis, [J], heis.generator("J").state, vac, range(1, 2))
    assert single.degenerate and single.degree == 0
    with pytest.raises(FitError):
        order_estimate(heis, [J], heis.vacuum, vac, range(0, 3))


def test_smeared_locality_leakage(heis):
    J = heis.generator("J")
    # [J(e_1), J(e_-1)] = 1 and [J(e_1), J(e_2)] = 0
    assert smeared_locality_leakage(heis, J, J, TestFunction.e(1), TestFunction.e(-1)) == pytest.approx(1.0)
    assert smeared_locality_leakage(heis, J, J, TestFunction.e(1), TestFunction.e(2)) == 0
