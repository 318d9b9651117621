"""Independent reference implementations used by the tests.

Nothing here imports the package's numerical kernels: axioms are checked
with exact rationals and plain loops, closed forms are integrated with
scipy's adaptive ODE solver.
"""
from fractions import Fraction
from itertools import product

import numpy as np
from scipy.integrate import solve_ivp


def exact_table(gamma):
    g = np.asarray(gamma, dtype=float)
    n = g.shape[0]
    return [[[Fraction(float(g[i, j, k])) for k in range(n)] for j in range(n)] for i in range(n)]


def exact_mul(T, u, v):
    n = len(T)
    out = [Fraction(0)] * n
    for i, j, k in product(range(n), repeat=3):
        if T[i][j][k]:
            out[k] += T[i][j][k] * u[i] * v[j]
    return out


def exact_axioms(gamma, identity):
    """(commutative, associative, identity) decided in exact arithmetic on units."""
    T = exact_table(gamma)
    n = len(T)
    e = [[Fraction(int(i == k)) for k in range(n)] for i in range(n)]
    eps = [Fraction(float(x)) for x in identity]
    comm = all(T[i][j][k] == T[j][i][k] for i, j, k in product(range(n), repeat=3))
    assoc = all(
        exact_mul(T, exact_mul(T, e[i], e[j]), e[k]) == exact_mul(T, e[i], exact_mul(T, e[j], e[k]))
        for i, j, k in product(range(n), repeat=3)
    )
    ident = all(exact_mul(T, eps, e[i]) == e[i] for i in range(n))
    return comm, assoc, ident


def rk_solve(rhs, y0, T, t_eval=None):
    sol = solve_ivp(rhs, (0.0, T), np.asarray(y0, dtype=float), method="DOP853",
                    rtol=1e-12, atol=1e-13, t_eval=t_eval, dense_output=t_eval is None)
    assert sol.success, sol.message
    return sol


def gbm_exact(x0, mu, sigma, t, W):
    return x0 * np.exp((mu - 0.5 * sigma**2) * t + sigma * W)


def logistic_exact(x0, r, k, t):
    """``x' = r x - k x^2``."""
    return r * x0 * np.exp(r * t) / (r + k * x0 * (np.exp(r * t) - 1.0))
