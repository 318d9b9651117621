"""Hypercomplex-valued stochastic differential equations.

Commutative algebras from structure constants, closed-form solutions of
linear and Lotka-Volterra base equations, their real component systems,
Euler-Maruyama validation and reducibility checks.
"""
from .algebra import (
    Algebra,
    HValue,
    a34,
    cp,
    direct_product,
    direct_sum,
    from_table,
    invert,
    make_algebra,
    multiply,
    verify_algebra,
)
from .analytic import hc_exp, hc_ln, hc_pow, scheffers_check
from .errors import HyperSDEError, MathDomainError
from .expr import evaluate, parse, to_text
from .paths import WienerGrid, coarsen, sample_wiener, sample_wiener_batch

__version__ = "0.1.0"
