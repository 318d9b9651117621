import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersde.algebra import a34, cp, direct_product, invert, multiply
from hypersde.analytic import (
    cos_sin_series,
    cosp_sinp,
    cosp_sinp_series,
    exp_series,
    hc_cos_sin_a34,
    hc_exp,
    hc_ln,
    hc_pow,
    ln_newton,
    scheffers_check,
)
from hypersde.errors import DomainError, EvaluationError

from conftest import builtin_set


def test_cosp_sinp_values():
    assert cosp_sinp(0.7, 0.0) == (1.0, 0.0)
    c, s = cosp_sinp(0.0, 1.3)
    assert (c, s) == (1.0, 1.3)
    c, s = cosp_sinp(-1.0, 0.4)
    assert (c, s) == (math.cos(0.4), math.sin(0.4))
    c, s = cosp_sinp(1.0, 0.4)
    assert c == pytest.approx(math.cosh(0.4)) and s == pytest.approx(math.sinh(0.4))
    c, s = cosp_sinp(-4.0, 0.3)
    assert c == pytest.approx(math.cos(0.6)) and s == pytest.approx(math.sin(0.6) / 2)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_cosp_series_agrees_with_closed_form(p, y):
    c, s = cosp_sinp(p, y)
    cs, ss = cosp_sinp_series(p, y)
    assert c == pytest.approx(float(cs), rel=1e-12, abs=1e-12)
    assert s == pytest.approx(float(ss), rel=1e-12, abs=1e-12)


def test_exp_hand_values():
    assert np.allclose(hc_exp(a34(), [0.0, 1.0, 0.0]), [1.0, 1.0, 0.5])
    assert np.allclose(hc_exp(cp(-1), [0.0, math.pi]), [-1.0, 0.0], atol=1e-15)
    assert np.allclose(hc_exp(cp(0), [1.0, 2.0]), [math.e, 2 * math.e])


@pytest.mark.parametrize("name", list(builtin_set()))
def test_exp_closed_form_matches_series(algebras, name, rng):
    alg = algebras[name]
    z = rng.uniform(-1.5, 1.5, (50, alg.dim))
    assert np.allclose(hc_exp(alg, z), exp_series(alg, z), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", list(builtin_set()))
def test_exp_is_a_homomorphism(algebras, name, rng):
    alg = algebras[name]
    u, v = rng.uniform(-1, 1, (2, 30, alg.dim))
    lhs = hc_exp(alg, u + v)
    rhs = multiply(alg, hc_exp(alg, u), hc_exp(alg, v))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    assert np.allclose(multiply(alg, hc_exp(alg, u), hc_exp(alg, -u)), alg.identity)


def test_ln_hand_values():
    assert np.allclose(hc_ln(a34(), [1.0, 1.0, 0.0]), [0.0, 1.0, -0.5])
    assert np.allclose(hc_ln(cp(-1), [-1.0, 0.0]), [0.0, math.pi])
    with pytest.raises(DomainError):
        hc_ln(cp(0), [-1.0, 0.2])
    with pytest.raises(DomainError):
        hc_ln(cp(1), [1.0, 2.0])
    with pytest.raises(DomainError):
        hc_ln(a34(), [0.0, 1.0, 0.0])


@pytest.mark.parametrize("name", list(builtin_set()))
def test_ln_inverts_exp(algebras, name, rng):
    alg = algebras[name]
    w = rng.uniform(-0.8, 0.8, (100, alg.dim))
    z = hc_exp(alg, w)
    assert np.allclose(hc_exp(alg, hc_ln(alg, z)), z, rtol=1e-11, atol=1e-11)


def test_newton_ln_on_product():
    alg = direct_product(cp(-1), a34())
    rng = np.random.default_rng(4)
    w = rng.uniform(-0.5, 0.5, alg.dim)
    assert np.allclose(ln_newton(alg, hc_exp(alg, w)), w, atol=1e-12)


def test_pow():
    alg = a34()
    assert np.allclose(hc_pow(alg, [1.0, 1.0, 0.0], 2), [1.0, 2.0, 1.0])
    x = np.array([2.0, 0.3, -0.4])
    half = hc_pow(alg, x, 0.5)
    assert np.allclose(multiply(alg, half, half), x)
    assert np.allclose(hc_pow(cp(-1), [0.0, 1.0], 2), [-1.0, 0.0])
    assert np.allclose(hc_pow(alg, x, -1), invert(alg, x))


def test_a34_trig():
    rng = np.random.default_rng(2)
    z = rng.uniform(-2, 2, (40, 3))
    c, s = hc_cos_sin_a34(z)
    alg = a34()
    assert np.allclose(multiply(alg, c, c) + multiply(alg, s, s), alg.identity, atol=1e-12)
    cs, ss = cos_sin_series(alg, z)
    assert np.allclose(c, cs, atol=1e-12) and np.allclose(s, ss, atol=1e-12)


ANALYTIC = {
    "Z^2": lambda p: ("x1^2 + p*x2^2", "2*x1*x2"),
    "Z^3": lambda p: ("x1^3 + 3*p*x1*x2^2", "3*x1^2*x2 + p*x2^3"),
}


@pytest.mark.parametrize("p", [-1.0, 0.0, 1.0])
@pytest.mark.parametrize("name", ["Z^2", "Z^3"])
def test_scheffers_passes_for_powers(p, name, rng):
    comps = [c.replace("p", f"({p})") for c in ANALYTIC[name](p)]
    rep = scheffers_check(cp(p), comps, rng.uniform(-2, 2, (50, 2)))
    assert rep.passed and rep.max_residual <= 1e-12


def test_scheffers_fails_for_real_part():
    rep = scheffers_check(cp(-1), ["x1", "0"], [[0.3, 0.4], [1.0, -1.0]])
    assert not rep.passed and rep.max_residual > 0.1
    assert rep.worst_indices in [(2, 2), (1, 1)]


def test_scheffers_evaluation_failure():
    with pytest.raises(EvaluationError):
        scheffers_check(cp(-1), ["ln(x1)", "0"], [[-1.0, 0.0]])
