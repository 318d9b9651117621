import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypersde.errors import DomainError
from hypersde.taylor import Jet


def test_univariate_exp_coefficients():
    j = Jet.variable(0.0, 0, 1, 5).exp()
    assert np.allclose(j.c, [1 / math.factorial(k) for k in range(6)])


def test_sin_cos_are_exact_at_pi():
    j = Jet.variable(math.pi, 0, 1, 4)
    s = j.sin()
    assert s.partial((1,)) == -1.0
    assert s.partial((3,)) == 1.0
    c = j.cos()
    assert c.partial((2,)) == 1.0


def test_mixed_partials():
    x = Jet.variable(1.5, 0, 2, 3)
    y = Jet.variable(-0.5, 1, 2, 3)
    f = x * x * y  # f_xxy = 2
    assert f.partial((2, 1)) == pytest.approx(2.0)
    assert f.partial((1, 1)) == pytest.approx(3.0)


def test_derivative_lowers_order():
    x = Jet.variable(2.0, 0, 1, 3)
    d = (x.powi(3)).derivative(0)
    assert d.order == 2
    assert d.value == pytest.approx(12.0)
    assert d.partial((1,)) == pytest.approx(12.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        Jet.variable(0.0, 0, 1, 2).reciprocal()
    with pytest.raises(DomainError):
        Jet.variable(-1.0, 0, 1, 2).log()
    with pytest.raises(DomainError):
        Jet.variable(-1.0, 0, 1, 2).sqrt()


vals = st.floats(0.2, 3.0)


@settings(max_examples=100, deadline=None)
@given(vals, vals)
def test_identities(a, b):
    x = Jet.variable(a, 0, 2, 3)
    y = Jet.variable(b, 1, 2, 3)
    assert np.allclose((x * y).log().c, (x.log() + y.log()).c, atol=1e-10)
    assert np.allclose((x.sin() * x.sin() + x.cos() * x.cos()).c, Jet.constant(1, 2, 3).c, atol=1e-12)
    assert np.allclose((x / y * y).c, x.c, atol=1e-10)
    assert np.allclose(x.sqrt().powi(2).c, x.c, atol=1e-10)
    assert np.allclose(x.powr(1.5).c, (x.log() * 1.5).exp().c, atol=1e-9)
