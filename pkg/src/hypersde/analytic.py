"""Elementary functions of a hypercomplex variable and the Scheffers check.

Closed forms are used on the generalized complex numbers ``Cp`` and on
``A3_4``; direct sums are handled block by block; anything else falls
back to power series (``exp``, ``cos``, ``sin``) or Newton iteration
(``ln``).  All functions accept batches with the component axis last.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .algebra import Algebra, HValue, as_coeffs, multiply
from .errors import DomainError, EvaluationError, NewtonDivergence, NoConvergence
from .expr import Node, as_expr, eval_jet, x_vars

MAX_TERMS = 400
SERIES_TOL = 1e-16


def _out(z, x, alg):
    return HValue(x, alg.label) if isinstance(z, HValue) else x


# cos_p / sin_p

def cosp_sinp(p: float, y):
    """Generalized cosine and sine: ``exp(i y) = cos_p(y) + i sin_p(y)`` in Cp."""
    y = np.asarray(y, dtype=float)
    if p == 0:
        return np.ones_like(y), y.copy()
    s = math.sqrt(abs(p))
    if p < 0:
        return np.cos(s * y), np.sin(s * y) / s
    return np.cosh(s * y), np.sinh(s * y) / s


def cosp_sinp_series(p: float, y, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Direct summation of ``sum p^k y^2k/(2k)!`` and ``sum p^k y^(2k+1)/(2k+1)!``."""
    y = np.asarray(y, dtype=float)
    c = np.ones_like(y)
    s = y.copy()
    term_c = np.ones_like(y)
    term_s = y.copy()
    small = 0
    for k in range(1, max_terms):
        term_c = term_c * p * y * y / ((2 * k - 1) * (2 * k))
        term_s = term_s * p * y * y / ((2 * k) * (2 * k + 1))
        c = c + term_c
        s = s + term_s
        if np.all(np.abs(term_c) + np.abs(term_s) <= tol * (1 + np.abs(c) + np.abs(s))):
            small += 1
            if small >= 10:
                return c, s
        else:
            small = 0
    raise NoConvergence("cos_p/sin_p series did not converge")


# exp

def exp_series(alg: Algebra, z, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Truncated ``sum z^k / k!``; stops after ten consecutive negligible terms."""
    x = as_coeffs(alg, z)
    total = np.broadcast_to(alg.identity, x.shape).copy()
    term = total.copy()
    small = 0
    for k in range(1, max_terms + 1):
        term = multiply(alg, term, x) / k
        total = total + term
        if np.all(np.linalg.norm(term, axis=-1) <= tol * (1 + np.linalg.norm(total, axis=-1))):
            small += 1
            if small >= 10:
                return _out(z, total, alg)
        else:
            small = 0
    raise NoConvergence(f"exponential series did not converge within {max_terms} terms")


def _exp_cp(p, x):
    e = np.exp(x[..., 0])
    c, s = cosp_sinp(p, x[..., 1])
    return np.stack([e * c, e * s], axis=-1)


def _exp_a34(x):
    t, a, b = x[..., 0], x[..., 1], x[..., 2]
    e = np.exp(t)
    return np.stack([e, e * a, e * (0.5 * a * a + b)], axis=-1)


def _blocks(alg, x):
    out = []
    start = 0
    for part in alg.parts:
        out.append((part, x[..., start : start + part.dim]))
        start += part.dim
    return out


def hc_exp(alg: Algebra, z, tol=SERIES_TOL, method="auto"):
    x = as_coeffs(alg, z)
    if method == "series":
        return _out(z, as_coeffs(alg, exp_series(alg, x, tol)), alg)
    if alg.kind == "Cp":
        y = _exp_cp(alg.p, x)
    elif alg.kind == "A3_4":
        y = _exp_a34(x)
    elif alg.kind == "real":
        y = np.exp(x)
    elif alg.kind == "sum":
        y = np.concatenate([hc_exp(a, xb, tol) for a, xb in _blocks(alg, x)], axis=-1)
    else:
        y = exp_series(alg, x, tol)
    return _out(z, y, alg)


# ln

def _ln_cp(p, x):
    u, v = x[..., 0], x[..., 1]
    if p < 0:
        s = math.sqrt(-p)
        r2 = u * u - p * v * v
        if np.any(r2 == 0):
            raise DomainError("logarithm of zero")
        return np.stack([0.5 * np.log(r2), np.arctan2(s * v, u) / s], axis=-1)
    if p == 0:
        if np.any(u <= 0):
            raise DomainError("logarithm in Cp(p=0) needs a positive real part")
        return np.stack([np.log(u), v / u], axis=-1)
    s = math.sqrt(p)
    if np.any(u <= s * np.abs(v)):
        raise DomainError("logarithm in Cp(p>0) needs x1 > sqrt(p)|x2|")
    r2 = u * u - p * v * v
    return np.stack([0.5 * np.log(r2), np.arctanh(s * v / u) / s], axis=-1)


def _ln_a34(x):
    t, a, b = x[..., 0], x[..., 1], x[..., 2]
    if np.any(t <= 0):
        raise DomainError("logarithm in A3_4 needs a positive real part")
    return np.stack([np.log(t), a / t, b / t - a * a / (2 * t * t)], axis=-1)


def ln_newton(alg: Algebra, z, tol=1e-14, max_iter=100):
    """Solve ``exp(w) = z`` by Newton's method.

    The Jacobian of ``exp`` at ``w`` is multiplication by ``exp(w)``, so the
    update is ``w <- w + z exp(-w) - identity``.
    """
    x = as_coeffs(alg, z)
    eps = alg.identity
    c = (x @ eps) / (eps @ eps)
    if np.any(c <= 0):
        raise DomainError("Newton logarithm needs a positive identity component")
    w = np.log(c)[..., None] * eps
    for _ in range(max_iter):
        step = multiply(alg, x, hc_exp(alg, -w)) - eps
        w = w + step
        if not np.all(np.isfinite(w)):
            break
        if np.all(np.linalg.norm(step, axis=-1) <= tol * (1 + np.linalg.norm(w, axis=-1))):
            return _out(z, w, alg)
    raise NewtonDivergence(f"logarithm iteration did not converge in {alg.label}")


def hc_ln(alg: Algebra, z, method="auto"):
    x = as_coeffs(alg, z)
    if method == "newton":
        return _out(z, ln_newton(alg, x), alg)
    if alg.kind == "Cp":
        y = _ln_cp(alg.p, x)
    elif alg.kind == "A3_4":
        y = _ln_a34(x)
    elif alg.kind == "real":
        if np.any(x <= 0):
            raise DomainError("logarithm of a non-positive number")
        y = np.log(x)
    elif alg.kind == "sum":
        y = np.concatenate([hc_ln(a, xb) for a, xb in _blocks(alg, x)], axis=-1)
    else:
        y = ln_newton(alg, x)
    return _out(z, y, alg)


def hc_pow(alg: Algebra, z, m: float):
    """``z^m = exp(m ln z)``; the identity for ``m = 0``."""
    x = as_coeffs(alg, z)
    if m == 0:
        return _out(z, np.broadcast_to(alg.identity, x.shape).copy(), alg)
    if alg.kind == "A3_4":
        t, a, b = x[..., 0], x[..., 1], x[..., 2]
        if np.any(t <= 0):
            raise DomainError("power in A3_4 needs a positive real part")
        tm = t**m
        y = np.stack(
            [tm, tm * m * a / t, tm * (m * b / t + m * (m - 1) * a * a / (2 * t * t))], axis=-1
        )
        return _out(z, y, alg)
    return _out(z, hc_exp(alg, m * hc_ln(alg, x)), alg)


# cos / sin

def hc_cos_sin_a34(z):
    x = z.coeffs if isinstance(z, HValue) else np.asarray(z, dtype=float)
    t, a, b = x[..., 0], x[..., 1], x[..., 2]
    ct, st = np.cos(t), np.sin(t)
    cos_z = np.stack([ct, -a * st, -(b * st + 0.5 * a * a * ct)], axis=-1)
    sin_z = np.stack([st, a * ct, b * ct - 0.5 * a * a * st], axis=-1)
    if isinstance(z, HValue):
        return HValue(cos_z, z.label), HValue(sin_z, z.label)
    return cos_z, sin_z


def cos_sin_series(alg: Algebra, z, tol=SERIES_TOL, max_terms=MAX_TERMS):
    """Power series for ``cos z`` and ``sin z`` in any algebra."""
    x = as_coeffs(alg, z)
    term = np.broadcast_to(alg.identity, x.shape).copy()
    cos_z = term.copy()
    sin_z = np.zeros_like(x)
    small = 0
    for k in range(1, max_terms + 1):
        term = multiply(alg, term, x) / k
        if k % 2:
            sin_z = sin_z + (-1) ** (k // 2) * term
        else:
            cos_z = cos_z + (-1) ** (k // 2) * term
        if np.all(np.linalg.norm(term, axis=-1) <= tol * (1 + np.linalg.norm(cos_z, axis=-1))):
            small += 1
            if small >= 10:
                return cos_z, sin_z
        else:
            small = 0
    raise NoConvergence("cos/sin series did not converge")


# Scheffers' equations

@dataclass
class ScheffersReport:
    max_residual: float
    worst_point: tuple
    worst_indices: tuple
    passed: bool
    tolerance: float

    def to_dict(self):
        return {
            "max_residual": self.max_residual,
            "worst_point": list(self.worst_point),
            "worst_indices": list(self.worst_indices),
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


def scheffers_residuals(alg: Algebra, jacobian: np.ndarray) -> np.ndarray:
    """``R[i, k] = df_i/dx_k - sum_{j,l} eps_l gamma_jki df_j/dx_l``.

    ``jacobian[i, k] = df_i/dx_k``.  Zero everywhere iff ``f`` is
    hypercomplex-differentiable with derivative components
    ``f'_j = sum_l eps_l df_j/dx_l``.
    """
    deriv = jacobian @ alg.identity
    return jacobian - np.einsum("jki,j->ik", alg.gamma, deriv)


def scheffers_check(
    alg: Algebra,
    components: Sequence,
    samples,
    tol: float = 1e-10,
    variables: Sequence[str] | None = None,
    extra_env: dict | None = None,
) -> ScheffersReport:
    """Check Scheffers' equations for ``f = sum f_i e_i`` at sample points.

    ``components`` are expressions in ``x1 .. xn`` (or ``variables``);
    ``samples`` is an array of shape ``(N, n)``.  The residual is scaled by
    ``1 + max|df_i/dx_k|`` at each point.
    """
    comps = [as_expr(c) for c in components]
    names = list(variables) if variables is not None else x_vars(alg.dim)
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    worst = (-1.0, (), (0, 0))
    for point in samples:
        env = dict(extra_env or {})
        env.update(zip(names, point))
        try:
            jac = np.array([eval_jet(c, env, names, 1).gradient() for c in comps])
        except Exception as exc:
            raise EvaluationError(f"cannot evaluate at {tuple(point)}: {exc}", tuple(point)) from exc
        R = np.abs(scheffers_residuals(alg, jac)) / (1.0 + np.max(np.abs(jac)))
        i, k = np.unravel_index(np.argmax(R), R.shape)
        if R[i, k] > worst[0]:
            worst = (float(R[i, k]), tuple(float(v) for v in point), (int(i) + 1, int(k) + 1))
    res, pt, idx = worst
    return ScheffersReport(res, pt, idx, res <= tol, tol)
