"""Closed-form solutions on Wiener grids and component expansions.

Base equations live in a commutative hypercomplex algebra and are driven
by ``dWW = sum_j dW_j e_j`` with independent real components.  Itô's
formula then needs ``dWW * dWW``, which equals ``kappa * dt`` with
``kappa = sum_j e_j^2`` (see :func:`noise_square`).  The closed forms
below carry ``kappa`` wherever the real scalar formulas carry the Itô
correction; ``convention="identity"`` replaces it by the identity, which
reproduces the real scalar formulas verbatim but only solves the
expanded component system when ``kappa`` happens to be the identity
(e.g. the dual numbers ``Cp(p=0)``).
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .algebra import Algebra, as_coeffs, invert, left_matrix, multiply
from .analytic import cosp_sinp, hc_exp
from .errors import SingularElement
from .expr import (
    Node,
    Num,
    Var,
    add,
    as_expr,
    evaluate,
    hc_add,
    hc_multiply,
    hc_scale,
    mul,
    to_text,
    x_vars,
)
from .paths import WienerGrid, ito_integral, lebesgue_integral

log = logging.getLogger(__name__)

CONVENTIONS = ("algebra", "identity")


def noise_square(alg: Algebra, convention: str = "algebra") -> np.ndarray:
    if convention == "algebra":
        return alg.noise_square
    if convention == "identity":
        return np.array(alg.identity)
    raise ValueError(f"convention must be one of {CONVENTIONS}, got {convention!r}")


def cp_noise_factor(p: float, convention: str = "algebra") -> float:
    """Scalar ``c`` with ``kappa = c * 1`` in ``Cp``: ``1 + p`` or ``1``."""
    noise_square(_dummy_cp(p), convention)  # validates the name
    return 1.0 + p if convention == "algebra" else 1.0


def _dummy_cp(p):
    from .algebra import cp

    return cp(p)


# data types

@dataclass(frozen=True, eq=False)
class HPath:
    label: str
    t: np.ndarray
    states: np.ndarray  # (..., steps+1, n)

    def component(self, i: int) -> np.ndarray:
        return self.states[..., i]

    def to_csv(self, path) -> None:
        write_path_csv(path, self.t, self.states)


@dataclass(frozen=True, eq=False)
class SdeSystemSpec:
    """Real Itô system ``dX = drift(t, X) dt + diffusion(t, X) dW``.

    ``drift`` maps ``(t, X[..., n])`` to ``(..., n)`` and ``diffusion``
    to ``(..., n, m)``.  Systems produced by the expansion routines also
    carry the component expressions in ``t, x1 .. xn``.
    """

    n: int
    m: int
    drift: Callable
    diffusion: Callable
    drift_exprs: Optional[tuple] = None
    diffusion_exprs: Optional[tuple] = None
    note: str = ""

    def describe(self) -> dict:
        out = {"n": self.n, "m": self.m, "note": self.note}
        if self.drift_exprs is not None:
            out["drift"] = [to_text(e) for e in self.drift_exprs]
            out["diffusion"] = [[to_text(e) for e in row] for row in self.diffusion_exprs]
        return out


def _expr_list(values, n) -> tuple:
    if isinstance(values, (int, float, str)) or hasattr(values, "func") or hasattr(values, "op"):
        values = [values]
    vals = [as_expr(v) for v in np.atleast_1d(np.asarray(values, dtype=object)).tolist()]
    if len(vals) == 1 and n > 1:
        vals = vals + [Num(0.0)] * (n - 1)
    if len(vals) != n:
        raise ValueError(f"expected {n} components, got {len(vals)}")
    return tuple(vals)


def _on_grid(nodes: Sequence[Node], t: np.ndarray) -> np.ndarray:
    cols = [np.broadcast_to(np.asarray(evaluate(e, {"t": t}), dtype=float), t.shape) for e in nodes]
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class LinearBaseCoeffs:
    """Coefficients of ``dZ = (f1 + f2 Z) dt + (g1 + g2 Z) dWW``.

    Each field holds ``n`` component expressions in ``t``.  A single value
    stands for a multiple of the first unit.
    """

    f1: tuple
    f2: tuple
    g1: tuple
    g2: tuple

    @classmethod
    def make(cls, n: int, f1=0.0, f2=0.0, g1=0.0, g2=0.0) -> "LinearBaseCoeffs":
        return cls(*(_expr_list(v, n) for v in (f1, f2, g1, g2)))

    @property
    def n(self) -> int:
        return len(self.f1)

    def on_grid(self, t):
        t = np.asarray(t, dtype=float)
        return tuple(_on_grid(c, t) for c in (self.f1, self.f2, self.g1, self.g2))

    def at(self, t: float):
        return tuple(
            np.array([float(evaluate(e, {"t": t})) for e in c])
            for c in (self.f1, self.f2, self.g1, self.g2)
        )


@dataclass(frozen=True)
class LvCoeffs:
    """Constants of ``dZ = (b Z - a Z^2) dt + G Z dWW`` and the initial state."""

    a: np.ndarray
    b: np.ndarray
    G: np.ndarray
    Z0: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "G", "Z0"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


# grid helpers (component axis last, time second to last)

def _batch_shape(grid: WienerGrid):
    return (grid.n_paths,) if grid.batched else ()


def _lebesgue(values: np.ndarray, grid: WienerGrid, rule="trapezoid") -> np.ndarray:
    out = lebesgue_integral(np.moveaxis(values, -1, 0), grid, rule)
    return np.moveaxis(out, 0, -1)


def _ito(values: np.ndarray, alg: Algebra, grid: WienerGrid) -> np.ndarray:
    """``int values dWW`` with left-point sums; ``values`` is ``(..., T, n)``."""
    shape = _batch_shape(grid) + values.shape[-2:]
    values = np.broadcast_to(values, shape)
    M = left_matrix(alg, values)  # (..., T, k, j)
    total = np.zeros(shape)
    for j in range(min(grid.m, alg.dim)):
        s = np.moveaxis(M[..., j], -1, 0)  # (k, ..., T)
        total = total + np.moveaxis(ito_integral(s, grid, j), 0, -1)
    return total


def _real_ito(values: np.ndarray, grid: WienerGrid, j: int) -> np.ndarray:
    values = np.broadcast_to(values, _batch_shape(grid) + values.shape[-1:])
    return ito_integral(values, grid, j)


def _wiener_vector(grid: WienerGrid, n: int) -> np.ndarray:
    """``WW(t_k)`` coefficients, shape ``(..., T, n)``; unused units stay 0."""
    W = np.moveaxis(grid.W, -2, -1)
    if W.shape[-1] < n:
        pad = np.zeros(W.shape[:-1] + (n - W.shape[-1],))
        W = np.concatenate([W, pad], axis=-1)
    return W


def _invert_guarded(alg, values, grid, on_singular):
    try:
        return invert(alg, values)
    except SingularElement as exc:
        if on_singular == "raise":
            k = exc.index[-1] if exc.index else None
            t = float(grid.t[k]) if k is not None else None
            raise SingularElement(
                f"zero divisor reached in {alg.label} at t = {t}", t=t, index=exc.index
            ) from None
    M = left_matrix(alg, values)
    det = np.linalg.det(M)
    tol = 1e-10 * np.linalg.norm(values, axis=-1) ** (alg.dim - 1)
    bad = ~(np.abs(det) > tol)
    safe = np.where(bad[..., None], alg.identity, values)
    out = invert(alg, safe)
    # once the bracket hits a zero divisor the path is gone
    dead = np.maximum.accumulate(bad, axis=-1)
    return np.where(dead[..., None], np.nan, out)


# linear base equation

def solve_linear_base(
    alg: Algebra,
    coeffs: LinearBaseCoeffs,
    Z0,
    grid: WienerGrid,
    convention: str = "algebra",
    on_singular: str = "raise",
) -> HPath:
    """``Z = E {Z0 + int E^-1 (f1 - kappa g1 g2) ds + int E^-1 g1 dWW}``.

    ``E = exp(int (f2 - kappa g2^2 / 2) ds + int g2 dWW)``.  All products,
    the exponential and ``E^-1`` are evaluated in ``alg``.
    """
    if coeffs.n != alg.dim:
        raise ValueError("coefficient dimension does not match the algebra")
    kappa = noise_square(alg, convention)
    F1, F2, G1, G2 = coeffs.on_grid(grid.t)
    Z0 = as_coeffs(alg, Z0)
    g2sq = multiply(alg, G2, G2)
    exponent = _lebesgue(F2 - 0.5 * multiply(alg, kappa, g2sq), grid) + _ito(G2, alg, grid)
    E = hc_exp(alg, exponent)
    Einv = _invert_guarded(alg, E, grid, on_singular)
    drift_part = F1 - multiply(alg, kappa, multiply(alg, G1, G2))
    inner = (
        Z0
        + _lebesgue(multiply(alg, Einv, drift_part), grid)
        + _ito(multiply(alg, Einv, G1), alg, grid)
    )
    return HPath(alg.label, grid.t, multiply(alg, E, inner))


def solve_linear_cp(
    p: float,
    coeffs: LinearBaseCoeffs,
    X0,
    grid: WienerGrid,
    convention: str = "algebra",
):
    """Real-arithmetic projection of the linear solution onto ``Cp``'s units.

    Uses ``a(t) = int [f21 - c (g21^2 + p g22^2)/2] ds + int g21 dW1 +
    p int g22 dW2`` and ``b(t) = int [f22 - c g21 g22] ds + int g22 dW1 +
    int g21 dW2`` (``c`` from :func:`cp_noise_factor`); two-time kernels
    ``e^{a(t,s)} cos_p b(t,s)`` are expanded with the addition theorems so
    every integral is a single cumulative sum.  Returns ``(X1, X2)``.
    """
    if coeffs.n != 2:
        raise ValueError("Cp coefficients need two components")
    c = cp_noise_factor(p, convention)
    (f11, f12), (f21, f22), (g11, g12), (g21, g22) = (
        tuple(_on_grid(comp, grid.t).T) for comp in (coeffs.f1, coeffs.f2, coeffs.g1, coeffs.g2)
    )
    leb = lambda v: lebesgue_integral(  # noqa: E731
        np.broadcast_to(v, _batch_shape(grid) + v.shape[-1:]), grid
    )
    A = leb(f21 - 0.5 * c * (g21**2 + p * g22**2)) + _real_ito(g21, grid, 0) + p * _real_ito(g22, grid, 1)
    B = leb(f22 - c * g21 * g22) + _real_ito(g22, grid, 0) + _real_ito(g21, grid, 1)
    C, S = cosp_sinp(p, B)
    w = np.exp(-A)
    h1 = f11 - c * (g11 * g21 + p * g12 * g22)
    h2 = f12 - c * (g11 * g22 + g12 * g21)
    U1 = (
        X0[0]
        + leb(w * (C * h1 - p * S * h2))
        + _real_ito(w * (C * g11 - p * S * g12), grid, 0)
        + _real_ito(w * (p * C * g12 - p * S * g11), grid, 1)
    )
    U2 = (
        X0[1]
        + leb(w * (C * h2 - S * h1))
        + _real_ito(w * (C * g12 - S * g11), grid, 0)
        + _real_ito(w * (C * g11 - p * S * g12), grid, 1)
    )
    eA = np.exp(A)
    return eA * (C * U1 + p * S * U2), eA * (S * U1 + C * U2)


def fundamental_matrix_cp(p: float, f21, f22, t: float) -> np.ndarray:
    """Fundamental matrix of ``X1' = f21 X1 + p f22 X2, X2' = f22 X1 + f21 X2``."""
    f21, f22 = as_expr(f21), as_expr(f22)
    i21 = _quad(f21, t)
    i22 = _quad(f22, t)
    C, S = cosp_sinp(p, i22)
    return np.exp(i21) * np.array([[C, p * S], [S, C]], dtype=float)


def _quad(node: Node, t: float) -> float:
    if t == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: float(evaluate(node, {"t": s})), 0.0, t, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


# Lotka-Volterra base equation

def solve_lv_base(
    alg: Algebra,
    coeffs: LvCoeffs,
    grid: WienerGrid,
    convention: str = "algebra",
    on_singular: str = "raise",
) -> HPath:
    """``Z = E(t) [Z0^-1 + a int_0^t E ds]^-1`` with
    ``E(t) = exp((b - kappa G^2 / 2) t + G WW(t))``."""
    kappa = noise_square(alg, convention)
    a, b, G = (as_coeffs(alg, v) for v in (coeffs.a, coeffs.b, coeffs.G))
    Z0 = as_coeffs(alg, coeffs.Z0)
    rate = b - 0.5 * multiply(alg, kappa, multiply(alg, G, G))
    exponent = grid.t[:, None] * rate + multiply(alg, G, _wiener_vector(grid, alg.dim))
    E = hc_exp(alg, exponent)
    try:
        inv0 = invert(alg, Z0)
    except SingularElement:
        raise SingularElement(f"initial state is a zero divisor in {alg.label}", t=0.0, index=(0,)) from None
    bracket = inv0 + multiply(alg, a, _lebesgue(E, grid))
    return HPath(alg.label, grid.t, multiply(alg, E, _invert_guarded(alg, bracket, grid, on_singular)))


def solve_lv_cp(p: float, a, b, G, X0, grid: WienerGrid, convention: str = "algebra", on_singular="raise"):
    """Lotka-Volterra solution projected onto ``Cp``; returns ``(X1, X2)``.

    ``alpha``/``beta`` are the exponent's components, ``gamma``/``delta``
    those of the bracket ``Z0^-1 + a int E ds``.
    """
    a1, a2 = a
    b1, b2 = b
    G1, G2 = G
    x1, x2 = X0
    c = cp_noise_factor(p, convention)
    t = grid.t
    W1, W2 = grid.W[..., 0, :], grid.W[..., 1, :]
    alpha = (b1 - 0.5 * c * (G1**2 + p * G2**2)) * t + G1 * W1 + p * G2 * W2
    beta = (b2 - c * G1 * G2) * t + G2 * W1 + G1 * W2
    n0 = x1 * x1 - p * x2 * x2
    if abs(n0) <= 1e-10 * np.hypot(x1, x2):
        raise SingularElement("initial state is a zero divisor", t=0.0, index=(0,))
    C, S = cosp_sinp(p, beta)
    eA = np.exp(alpha)
    Ic = lebesgue_integral(eA * C, grid)
    Is = lebesgue_integral(eA * S, grid)
    gam = x1 / n0 + a1 * Ic + p * a2 * Is
    dlt = -x2 / n0 + a1 * Is + a2 * Ic
    D = gam * gam - p * dlt * dlt
    bad = ~(np.abs(D) > 1e-10 * np.hypot(gam, dlt))
    if np.any(bad):
        if on_singular == "raise":
            k = int(np.argwhere(bad)[0][-1])
            raise SingularElement(f"bracket reached a zero divisor at t = {t[k]}", t=float(t[k]), index=(k,))
        dead = np.maximum.accumulate(bad, axis=-1)
        D = np.where(dead, np.nan, D)
    return eA / D * (gam * C - p * dlt * S), eA / D * (gam * S - dlt * C)


# component expansions

def _expr_system(n, m, drift_exprs, diffusion_exprs, note) -> SdeSystemSpec:
    names = x_vars(n)

    def env(t, X):
        X = np.asarray(X, dtype=float)
        d = {"t": t}
        d.update({nm: X[..., i] for i, nm in enumerate(names)})
        return d, X.shape[:-1]

    def drift(t, X):
        e, shape = env(t, X)
        return np.stack([np.broadcast_to(evaluate(x, e), shape) for x in drift_exprs], axis=-1)

    def diffusion(t, X):
        e, shape = env(t, X)
        rows = [
            np.stack([np.broadcast_to(evaluate(x, e), shape) for x in row], axis=-1)
            for row in diffusion_exprs
        ]
        return np.stack(rows, axis=-2)

    return SdeSystemSpec(n, m, drift, diffusion, tuple(drift_exprs), tuple(map(tuple, diffusion_exprs)), note)


def _diffusion_exprs(alg: Algebra, b: Sequence[Node], m: int):
    """``sum_j gamma_{j k i} b_j`` as the coefficient of ``dW_k`` in ``dX_i``."""
    n = alg.dim
    g = alg.gamma
    return [
        [add(*[mul(Num(g[j, k, i]), b[j]) for j in range(n) if g[j, k, i] != 0.0]) for k in range(m)]
        for i in range(n)
    ]


def _state_vars(n):
    return [Var(v) for v in x_vars(n)]


def expand_general_system(alg: Algebra, a, b, m: Optional[int] = None) -> SdeSystemSpec:
    """Component system of ``dZ = a dt + b dWW`` for expressions ``a``, ``b``.

    ``a`` and ``b`` are ``n`` component expressions each, in ``t`` and
    ``x1 .. xn``; ``WW`` uses the first ``m`` units.
    """
    n = alg.dim
    m = n if m is None else m
    if not 1 <= m <= n:
        raise ValueError("need 1 <= m <= n")
    a = _expr_list(a, n)
    b = _expr_list(b, n)
    return _expr_system(n, m, a, _diffusion_exprs(alg, b, m), f"general base equation over {alg.label}")


def expand_linear_system(alg: Algebra, coeffs: LinearBaseCoeffs) -> SdeSystemSpec:
    """Component form of the linear base equation.

    ``drift_i = f1_i + sum gamma_{k l i} f2_k X_l`` and
    ``diffusion_{i l} = sum_k gamma_{k l i} g1_k
    + sum gamma_{k p m} gamma_{m l i} g2_k X_p``.
    """
    n = alg.dim
    X = _state_vars(n)
    drift_exprs = hc_add(coeffs.f1, hc_multiply(alg.gamma, coeffs.f2, X))
    g = hc_add(coeffs.g1, hc_multiply(alg.gamma, coeffs.g2, X))
    diffusion_exprs = _diffusion_exprs(alg, g, n)

    def drift(t, Xv):
        f1, f2, _, _ = coeffs.at(t)
        return f1 + multiply(alg, f2, Xv)

    def diffusion(t, Xv):
        _, _, g1, g2 = coeffs.at(t)
        return left_matrix(alg, g1 + multiply(alg, g2, Xv))

    return SdeSystemSpec(
        n, n, drift, diffusion, tuple(drift_exprs), tuple(map(tuple, diffusion_exprs)),
        f"linear base equation over {alg.label}",
    )


def expand_lv_system(alg: Algebra, coeffs: LvCoeffs) -> SdeSystemSpec:
    """Component form of ``dZ = (b Z - a Z^2) dt + G Z dWW``."""
    n = alg.dim
    a, b, G = (as_coeffs(alg, v) for v in (coeffs.a, coeffs.b, coeffs.G))
    X = _state_vars(n)
    num = lambda v: [Num(float(x)) for x in v]  # noqa: E731
    bZ = hc_multiply(alg.gamma, num(b), X)
    aZ2 = hc_multiply(alg.gamma, num(a), hc_multiply(alg.gamma, X, X))
    drift_exprs = hc_add(bZ, hc_scale(aZ2, -1.0))
    diffusion_exprs = _diffusion_exprs(alg, hc_multiply(alg.gamma, num(G), X), n)

    def drift(t, Xv):
        return multiply(alg, b, Xv) - multiply(alg, a, multiply(alg, Xv, Xv))

    def diffusion(t, Xv):
        return left_matrix(alg, multiply(alg, G, Xv))

    return SdeSystemSpec(
        n, n, drift, diffusion, tuple(drift_exprs), tuple(map(tuple, diffusion_exprs)),
        f"Lotka-Volterra base equation over {alg.label}",
    )


def lv_base_exprs(alg: Algebra, coeffs: LvCoeffs):
    """``(a, b)`` component expressions of the LV base equation for
    :func:`expand_general_system`."""
    n = alg.dim
    X = _state_vars(n)
    num = lambda v: [Num(float(x)) for x in v]  # noqa: E731
    drift = hc_add(
        hc_multiply(alg.gamma, num(coeffs.b), X),
        hc_scale(hc_multiply(alg.gamma, num(coeffs.a), hc_multiply(alg.gamma, X, X)), -1.0),
    )
    return drift, hc_multiply(alg.gamma, num(coeffs.G), X)


# export

def write_path_csv(path, t, states) -> None:
    states = np.asarray(states)
    if states.ndim == 1:
        states = states[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"X{i + 1}" for i in range(states.shape[-1])])
        for k in range(len(t)):
            w.writerow([repr(float(t[k]))] + [repr(float(x)) for x in states[k]])
