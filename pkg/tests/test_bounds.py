"""Reference table: identities, exact expressions, monotonicity."""

import math

import pytest
import sympy

from spectralab import (build_bound_table, conformal_lower_bound,
                        hexagonal_torus_lambda1, korevaar_trend,
                        round_sphere_eigenvalue, spectral_gap_bound,
                        sphere_lambda2_conformal, symmetric_space_lambda1c,
                        topological_k_lower, yang_yau_bound)
from spectralab.bounds import omega_n


# -- closed-form values -------------------------------------------------------

def test_hersch_value():
    assert math.isclose(conformal_lower_bound(2, 1), 8 * math.pi,
                        rel_tol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 3, 7])
def test_conformal_lower_bound_surface(k):
    assert math.isclose(conformal_lower_bound(2, k), 8 * math.pi * k,
                        rel_tol=1e-15)


def test_conformal_lower_bound_higher_dim():
    # n omega_n^{2/n} k^{2/n}
    assert math.isclose(conformal_lower_bound(3, 1),
                        3 * (2 * math.pi ** 2) ** (2 / 3), rel_tol=1e-15)
    assert math.isclose(conformal_lower_bound(4, 1),
                        4 * (8 * math.pi ** 2 / 3) ** 0.5, rel_tol=1e-15)


def test_gap_bound():
    assert math.isclose(spectral_gap_bound(2), 8 * math.pi, rel_tol=1e-15)
    for n in (2, 3, 4):
        assert math.isclose(spectral_gap_bound(n),
                            conformal_lower_bound(n, 1) ** (n / 2),
                            rel_tol=1e-13)


def test_round_sphere_bands():
    for k, val in [(1, 8), (2, 8), (3, 8), (4, 24), (8, 24)]:
        assert math.isclose(round_sphere_eigenvalue(k), val * math.pi,
                            rel_tol=1e-15)


def test_torus_and_sphere_special_values():
    assert math.isclose(hexagonal_torus_lambda1(),
                        8 * math.pi ** 2 / math.sqrt(3), rel_tol=1e-15)
    assert math.isclose(sphere_lambda2_conformal(), 16 * math.pi,
                        rel_tol=1e-15)


def test_yang_yau():
    assert math.isclose(yang_yau_bound(0), 8 * math.pi, rel_tol=1e-15)
    assert math.isclose(yang_yau_bound(1), 16 * math.pi, rel_tol=1e-15)
    for g in range(5):
        assert yang_yau_bound(g + 1) > yang_yau_bound(g) - 1e-12


def test_symmetric_spaces():
    assert math.isclose(symmetric_space_lambda1c("S2"), 8 * math.pi)
    assert symmetric_space_lambda1c("CP1") == \
        symmetric_space_lambda1c("S2")
    assert math.isclose(symmetric_space_lambda1c("RP2"), 12 * math.pi)
    from spectralab import IllConditionedInputError
    with pytest.raises(IllConditionedInputError):
        symmetric_space_lambda1c("E8")


def test_korevaar_trend_monotone():
    for g in (0, 1, 3):
        vals = [korevaar_trend(k, g) for k in range(1, 9)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert korevaar_trend(4, 5) > korevaar_trend(4, 0)


def test_topological_lower_monotone():
    for g in (0, 2):
        vals = [topological_k_lower(k, g) for k in range(1, 6)]
        assert all(b > a for a, b in zip(vals, vals[1:]))
    assert math.isclose(topological_k_lower(1, 0), 8 * math.pi,
                        rel_tol=1e-15)


# -- the table ----------------------------------------------------------------

def test_table_selfcheck():
    table = build_bound_table()
    for name, ok, rel in table.selfcheck():
        assert ok, "%s off by %.3g" % (name, rel)


def test_table_keys_unique():
    keys = build_bound_table().keys()
    assert len(keys) == len(set(keys))


def test_table_expressions_are_exact():
    """Every entry's symbolic expression evaluates to its float."""
    table = build_bound_table()
    for e in table.entries:
        expr = sympy.sympify(e.expression, locals={"pi": sympy.pi})
        val = float(expr.evalf(30))
        assert math.isclose(val, e.value, rel_tol=1e-12, abs_tol=1e-12), \
            "%s: %s -> %r vs %r" % (e.key, e.expression, val, e.value)


def test_table_covers_report_citations():
    keys = set(build_bound_table().keys())
    needed = {"hersch", "kernel", "sphere_lambda2_conformal",
              "torus_hexagonal_lambda1", "torus_square_lambda1",
              "spectral_gap_bound(2)", "conformal_lower_bound(2,1)",
              "round_sphere_eigenvalue(1)", "yang_yau_bound(2)"}
    assert needed <= keys


def test_omega_n():
    assert math.isclose(omega_n(2), 4 * math.pi, rel_tol=1e-15)
    assert math.isclose(omega_n(3), 2 * math.pi ** 2, rel_tol=1e-15)
    assert math.isclose(omega_n(4), 8 * math.pi ** 2 / 3, rel_tol=1e-15)
