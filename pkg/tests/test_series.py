from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy.optimize import brentq

from kurasync.errors import DomainError, OrderNotComputed, UncenteredFrequencies
from kurasync.graph import build_graph, eta
from kurasync.series import (MAX_ORDER, arcsin_coeff, commutes, commuting_term,
                             convergence_report, double_factorial, evaluate_terms,
                             format_symbolic, gamma_star, h, h_inverse,
                             odd_partitions, perm_count, symbolic_table,
                             symbolic_terms, term_norms, test_T0, truncated_solution)
from kurasync.solvers import residual_unconstrained

from conftest import random_graph, random_tree


# Scalar functions
# ----------------
@pytest.mark.parametrize('k, expected', [(0, 1), (1, 1), (5, 15), (6, 48), (7, 105)])
def test_double_factorial(k, expected):
    assert double_factorial(k) == expected


def test_double_factorial_is_exact_for_large_k():
    assert double_factorial(40) == 2**20 * np.prod(np.arange(1, 21, dtype=object))
    with pytest.raises(DomainError):
        double_factorial(-1)


@pytest.mark.parametrize('i, expected', [(0, Fraction(1)),
                                         (1, Fraction(1, 6)),
                                         (2, Fraction(3, 40)),
                                         (3, Fraction(5, 112))])
def test_arcsin_coeff(i, expected):
    assert arcsin_coeff(i) == expected


def test_arcsin_coefficients_reproduce_arcsin():
    r = 0.3
    series = sum(float(arcsin_coeff(i)) * r**(2*i + 1) for i in range(20))
    assert series == pytest.approx(np.arcsin(r), abs=1e-15)


def test_h_values():
    assert h(0) == 1.0
    assert h(1) == pytest.approx(np.sqrt(3) - np.pi/3, abs=1e-14)
    assert h(3) < h(1)
    # Original form (x+1) sqrt(1 - (x/(x+1))^2) - x arccos(x/(x+1))
    x = 2.7
    original = (x + 1)*np.sqrt(1 - (x/(x + 1))**2) - x*np.arccos(x/(x + 1))
    assert h(x) == pytest.approx(original, rel=1e-12)


def test_h_is_decreasing():
    grid = np.linspace(0, 50, 500)
    assert np.all(np.diff(h(grid)) < 0)
    assert h(1e8) < 1e-3


def test_h_rejects_negative():
    with pytest.raises(DomainError):
        h(-0.1)


def test_h_inverse_examples():
    assert h_inverse(1.0) == 0.0
    assert h_inverse(h(2.5)) == pytest.approx(2.5, abs=1e-8)
    oracle = brentq(lambda x: h(x) - 0.5, 0, 100, xtol=1e-12)
    assert h_inverse(0.5) == pytest.approx(oracle, abs=1e-10)


@pytest.mark.parametrize('y', [0.0, -0.5, 1.5])
def test_h_inverse_domain(y):
    with pytest.raises(DomainError):
        h_inverse(y)


def test_h_round_trip_grid():
    for y in np.linspace(0.01, 1, 100):
        assert abs(h(h_inverse(y)) - y) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=1e-3, max_value=1.0))
def test_h_round_trip_property(y):
    assert abs(h(h_inverse(y)) - y) < 1e-10


def test_h_tail_keeps_relative_precision():
    for x in (1e6, 1e14, 1e18, 1e100):
        tail = 2*np.sqrt(2) / (3*np.sqrt(x))
        assert h(x) > 0
        assert h(x) == pytest.approx(tail, rel=1e-5 if x == 1e6 else 1e-10)
    assert h(np.inf) == 0.0
    assert_array_equal(h(np.array([0.0, np.inf])), [1.0, 0.0])


def test_h_is_continuous_across_the_series_switch():
    # sqrt(2x+1)/x = 1/4 at x = 16 + sqrt(272)
    x = 16 + np.sqrt(272)
    below, above = h(x*(1 - 1e-12)), h(x*(1 + 1e-12))
    assert below > above
    assert below == pytest.approx(above, rel=1e-11)
    for x in (5.0, 30.0, 40.0, 200.0):
        root = np.sqrt(2*x + 1)
        assert h(x) == pytest.approx(root - x*np.arctan2(root, x), rel=1e-11)


@pytest.mark.parametrize('y', [1e-7, 1e-9, 1e-12, 1e-50])
def test_h_round_trip_small_values(y):
    x = h_inverse(y)
    assert abs(h(x) - y) <= 1e-10*y
    assert x == pytest.approx(8/(9*y**2), rel=1e-3)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-60.0, max_value=0.0))
def test_h_round_trip_log_property(exponent):
    y = 10.0**exponent
    assert abs(h(h_inverse(y)) - y) <= 1e-10*y


def test_h_inverse_beyond_float_range():
    with pytest.raises(DomainError):
        h_inverse(1e-200)


def test_gamma_star_values():
    assert gamma_star(h(1)) == pytest.approx(np.pi/3, abs=1e-10)
    assert gamma_star(h(3)) == pytest.approx(np.arccos(3/4), abs=1e-10)
    assert gamma_star(1.0) == pytest.approx(np.pi/2)
    assert gamma_star(0.0) == 0.0
    # Increasing in ||eta||
    assert gamma_star(0.3) < gamma_star(0.6)
    with pytest.raises(DomainError):
        gamma_star(1.5)


def test_gamma_star_for_small_loads(triangle):
    # gamma* ~ 3 ||eta|| / 2 as ||eta|| -> 0
    for y in (1e-6, 1e-9, 1e-90):
        assert gamma_star(y) == pytest.approx(1.5*y, rel=1e-5)
    assert gamma_star(1e-120) == pytest.approx(1.5e-120, rel=1e-15)
    report = test_T0(triangle, 1e-9*np.array([2.0, -1.0, -1.0]))
    assert report.eta_norm == pytest.approx(1e-9)
    assert report.gamma_star == pytest.approx(1.5e-9, rel=1e-6)


# Test T0
# -------
def test_T0_passes_on_triangle(triangle):
    report = test_T0(triangle, [0.4, -0.2, -0.2])
    assert report.passes_T0
    assert report.eta_norm == pytest.approx(0.2)
    assert report.pcyc_norm == pytest.approx(1.0)
    assert report.h_of_pcyc == pytest.approx(np.sqrt(3) - np.pi/3)
    assert report.gamma_star == pytest.approx(gamma_star(0.2))
    assert np.sin(report.gamma_star) < 1
    assert report.margin > 0


def test_T0_fails_without_gamma(triangle):
    report = test_T0(triangle, [4.0, -2.0, -2.0])
    assert not report.passes_T0
    assert report.gamma_star is None
    assert report.margin < 0


def test_T0_on_trees_reduces_to_eta_below_one(path2):
    assert test_T0(path2, [0.9, -0.9]).passes_T0
    assert not test_T0(path2, [2.2, -2.2]).passes_T0


def test_T0_rejects_uncentered(triangle):
    with pytest.raises(UncenteredFrequencies):
        test_T0(triangle, [1.0, 1.0, 1.0])


# Symbolic terms
# --------------
def test_odd_partitions():
    assert list(odd_partitions(5, 3)) == [(3, 1, 1)]
    assert list(odd_partitions(7, 3)) == [(5, 1, 1), (3, 3, 1)]
    assert list(odd_partitions(7, 5)) == [(3, 1, 1, 1, 1)]
    assert list(odd_partitions(6, 3)) == []
    for partition in odd_partitions(21, 7):
        assert sum(partition) == 21
        assert all(p % 2 == 1 for p in partition)


def test_perm_count():
    assert perm_count((3, 1, 1)) == 3
    assert perm_count((3, 3, 1)) == 3
    assert perm_count((1, 1, 1)) == 1
    assert perm_count((5, 3, 1)) == 6


def _coefficients(term):
    return sorted(s.coefficient for s in term.summands)


def test_symbolic_coefficients():
    terms = symbolic_terms(7)
    assert [t.order for t in terms] == [1, 3, 5, 7]
    assert terms[0].summands == ()
    assert _coefficients(terms[1]) == [Fraction(1, 6)]
    assert _coefficients(terms[2]) == [Fraction(3, 40), Fraction(1, 2)]
    assert _coefficients(terms[3]) == sorted([Fraction(5, 112), Fraction(3, 8),
                                              Fraction(1, 2), Fraction(1, 2)])
    monomials = {s.monomial(): s.coefficient for s in terms[3].summands}
    assert monomials[((1, 7),)] == Fraction(5, 112)
    assert monomials[((3, 1), (1, 4))] == Fraction(3, 8)
    assert monomials[((5, 1), (1, 2))] == Fraction(1, 2)
    assert monomials[((3, 2), (1, 1))] == Fraction(1, 2)


def test_symbolic_partitions_are_odd():
    for term in symbolic_terms(15):
        for s in term.summands:
            assert sum(s.partition) == term.order
            assert all(p % 2 == 1 for p in s.partition)
            assert len(s.partition) == 2*s.k + 1
            assert s.coefficient == arcsin_coeff(s.k) * s.perm_count


@pytest.mark.parametrize('order', [0, 4, -1, MAX_ORDER + 2])
def test_symbolic_terms_reject_bad_orders(order):
    with pytest.raises(DomainError):
        symbolic_terms(order)


def test_format_symbolic():
    text = format_symbolic(symbolic_terms(7))
    assert "A1 = eta" in text
    assert "A3 = -Pcyc( 1/6 * A1^3 )" in text
    assert "5/112 * A1^7" in text
    latex = format_symbolic(symbolic_terms(5), fmt='latex')
    assert r"A_{5} = -\mathcal{P}_{\mathrm{cyc}}" in latex
    with pytest.raises(DomainError):
        format_symbolic(symbolic_terms(3), fmt='xml')


def test_symbolic_table():
    df = symbolic_table(symbolic_terms(7))
    assert sorted(df.loc[df['order'] == 7, 'coefficient']) == sorted(['5/112', '3/8',
                                                                      '1/2', '1/2'])
    assert set(df['order']) == {3, 5, 7}


# Numerical terms
# ---------------
def _printed_terms(P_cyc, e):
    """A_3, A_5, A_7 written out by hand"""
    A3 = -P_cyc @ (e**3 / 6)
    A5 = -P_cyc @ (A3 * e**2 / 2 + 3/40 * e**5)
    A7 = -P_cyc @ (5/112 * e**7 + 3/8 * A3 * e**4 + A5 * e**2 / 2 + A3**2 * e / 2)
    return A3, A5, A7


@pytest.mark.parametrize('seed', range(20))
def test_terms_match_written_out_formulas(seed):
    g = random_graph(seed, n=10, p=0.5)
    e = np.random.default_rng(seed).uniform(-0.5, 0.5, g.m)
    se = evaluate_terms(g.pp, e, 7)
    for computed, written in zip(se.terms[1:], _printed_terms(g.pp.P_cyc, e)):
        assert np.abs(computed - written).max() < 1e-12


def test_expansion_structure(triangle):
    e = eta(triangle, [0.3, 0.1, -0.4])
    se = evaluate_terms(triangle.pp, e, 9)
    assert len(se.terms) == 5
    assert_array_equal(se.terms[0], e)
    assert_allclose(se.partial_sums[-1], np.sum(se.terms, axis=0))
    assert_array_equal(truncated_solution(se, 1), e)
    assert set(term_norms(se)) == {1, 3, 5, 7, 9}
    with pytest.raises(OrderNotComputed):
        se.term(11)
    with pytest.raises(OrderNotComputed):
        truncated_solution(se, 4)


def test_expansion_reuses_previous_terms(triangle):
    e = eta(triangle, [0.3, 0.1, -0.4])
    se7 = evaluate_terms(triangle.pp, e, 7)
    se11 = evaluate_terms(triangle.pp, e, 11, previous=se7)
    assert all(a is b for a, b in zip(se7.terms, se11.terms))
    assert_allclose(se11.partial_sums[-1],
                    evaluate_terms(triangle.pp, e, 11).partial_sums[-1], atol=1e-15)
    se3 = evaluate_terms(triangle.pp, e, 3, previous=se11)
    assert len(se3.terms) == 2


def test_expansion_rejects_wrong_shape(triangle):
    with pytest.raises(DomainError):
        evaluate_terms(triangle.pp, np.zeros(2), 3)


@pytest.mark.parametrize('seed', range(10))
def test_acyclic_terms_vanish(seed):
    g = random_tree(seed, 15)
    e = np.random.default_rng(seed).uniform(-0.9, 0.9, g.m)
    se = evaluate_terms(g.pp, e, 11)
    for term in se.terms[1:]:
        assert np.abs(term).max() < 1e-12


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('c', [0.5, 2.0])
def test_terms_are_homogeneous(seed, c):
    g = random_graph(seed, n=12, p=0.5)
    e = np.random.default_rng(seed).uniform(-0.3, 0.3, g.m)
    se = evaluate_terms(g.pp, e, 11)
    scaled = evaluate_terms(g.pp, c*e, 11)
    for i, (term, term_c) in enumerate(zip(se.terms, scaled.terms)):
        expected = c**(2*i + 1) * term
        assert_allclose(term_c, expected, rtol=1e-9,
                        atol=1e-9*np.abs(expected).max())


@pytest.mark.parametrize('k', [3, 5, 7])
def test_truncation_residual_has_order_k_plus_2(k, triangle):
    direction = eta(triangle, [0.3, 0.1, -0.4])
    direction = direction / np.abs(direction).max()
    residuals = []
    for t in (0.1, 0.05):
        se = evaluate_terms(triangle.pp, t*direction, k)
        residuals.append(np.abs(residual_unconstrained(triangle.pp, t*direction,
                                                       truncated_solution(se, k))).max())
    ratio = residuals[0] / residuals[1]
    assert 2**(k + 2) * 0.9 < ratio < 2**(k + 2) * 1.15


def test_series_converges_under_T0(triangle):
    omega = np.array([0.3, 0.1, -0.4])
    report = test_T0(triangle, omega)
    assert report.passes_T0
    se = evaluate_terms(triangle.pp, eta(triangle, omega), 21)
    norms = list(term_norms(se).values())
    assert norms[-1] < 1e-12
    assert np.abs(truncated_solution(se, 21)).max() <= np.sin(report.gamma_star) + 1e-12


# Commuting instances
# -------------------
def test_commuting_closed_form_on_bridge_flow():
    # Triangle 0-1-2 with a pendant node 3 on node 0
    g = build_graph(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (0, 3, 1.0)])
    e = eta(g, [0.3, 0.0, 0.0, -0.3])
    assert_allclose(e, [0.0, 0.0, 0.3, 0.0], atol=1e-14)
    assert commutes(g.pp, e)
    se = evaluate_terms(g.pp, e, 9)
    for i, term in enumerate(se.terms):
        assert_allclose(term, commuting_term(g.pp, e, i), atol=1e-14)


def test_commuting_term_matches_third_order(triangle):
    e = eta(triangle, [0.3, 0.1, -0.4])
    assert not commutes(triangle.pp, e)
    se = evaluate_terms(triangle.pp, e, 3)
    assert_allclose(commuting_term(triangle.pp, e, 1), se.term(3), atol=1e-15)
    assert_array_equal(commuting_term(triangle.pp, e, 0), e)


def test_convergence_report_dict(triangle):
    report = convergence_report(triangle.pp, eta(triangle, [0.4, -0.2, -0.2]))
    d = report.to_dict()
    assert d['passes_T0'] is True
    assert d['margin'] == pytest.approx(report.h_of_pcyc - 0.2)
