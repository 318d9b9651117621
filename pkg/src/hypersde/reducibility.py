"""Reducibility of scalar SDEs and of two-component systems over ``Cp``.

A scalar equation ``dZ = f dt + g dW`` can be mapped by ``Y = h(t, Z)``
onto ``dY = b(t) dt + a(t) dW`` exactly when ``dN/dZ = 0`` for

    N = g * (g_t / g^2 - d/dZ (f / g) + kappa/2 * g_ZZ).

``kappa`` is ``dW * dW / dt``: 1 for a real Wiener process, and
``(1 + p)`` for ``dWW = dW1 + i dW2`` in ``Cp`` with independent
components.  Then ``a = exp(int N dt)`` multiplies the noise and ``b``
is the drift of ``Y``.  All derivatives come from truncated Taylor
arithmetic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

from .analytic import scheffers_check
from .errors import ConsistencyError, DomainError, EvaluationError, HyperSDEError, SingularElement
from .expr import Node, as_expr, eval_jet, free_vars, substitute
from .solvers import cp_noise_factor
from .taylor import Jet

log = logging.getLogger(__name__)

REDUCIBLE = "reducible"
NOT_REDUCIBLE = "not_reducible"
UNDECIDED = "undecided"
MAX_FAILED = 0.2

_SCALAR_VARS = ("t", "Z")
_CP_VARS = ("t", "X", "Y")


def _scalar_expr(e) -> Node:
    return substitute(as_expr(e), {"z": "Z"})


def _cp_expr(e) -> Node:
    return substitute(as_expr(e), {"x": "X", "y": "Y"})


@dataclass
class ReducibilityReport:
    verdict: str
    residuals: dict
    witnesses: dict
    tolerance: float
    n_points: int
    n_failed: int = 0
    p: Optional[float] = None
    kappa: Optional[float] = None
    hypercomplexifiable: Optional[bool] = None
    scheffers: Optional[dict] = None
    branch: Optional[str] = None
    drift_depends_on_state: Optional[bool] = None
    split_discrepancy: Optional[float] = None
    notes: list = field(default_factory=list)

    @property
    def reducible(self) -> bool:
        return self.verdict == REDUCIBLE

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "residuals": dict(self.residuals),
            "witnesses": {k: list(v) for k, v in self.witnesses.items()},
            "tolerance": self.tolerance,
            "n_points": self.n_points,
            "n_failed": self.n_failed,
            "notes": list(self.notes),
        }
        if self.p is not None:
            out.update(
                p=self.p,
                kappa=self.kappa,
                hypercomplexifiable=self.hypercomplexifiable,
                scheffers={k: v.to_dict() for k, v in self.scheffers.items()},
                branch=self.branch,
                drift_depends_on_state=self.drift_depends_on_state,
                split_discrepancy=self.split_discrepancy,
            )
        return out


# scalar route

def _n_jet(f: Node, g: Node, t: float, z: float, kappa: float) -> Jet:
    """Order-1 jet of ``N`` over ``(t, Z)``."""
    env = {"t": t, "Z": z}
    fj = eval_jet(f, env, _SCALAR_VARS, 3)
    gj = eval_jet(g, env, _SCALAR_VARS, 3)
    if gj.value == 0.0:
        raise DomainError(f"g vanishes at (t, Z) = ({t}, {z})")
    g_t = gj.derivative(0)
    g_zz = gj.derivative(1).derivative(1)
    ratio_z = (fj / gj).derivative(1)
    return gj * (g_t / (gj * gj) - ratio_z + 0.5 * kappa * g_zz)


def gard_N(f, g, point, kappa: float = 1.0) -> float:
    t, z = point
    return _n_jet(_scalar_expr(f), _scalar_expr(g), float(t), float(z), kappa).value


def default_scalar_grid(t_range=(0.0, 1.0), z_range=(0.5, 2.0), n: int = 9):
    return np.linspace(*t_range, n), np.linspace(*z_range, n)


def check_reducible_scalar(
    f, g, t_values=None, z_values=None, tol: float = 1e-9, kappa: float = 1.0
) -> ReducibilityReport:
    """Sample ``|dN/dZ|`` on the ``t x Z`` grid; reducible iff it stays below ``tol``."""
    f, g = _scalar_expr(f), _scalar_expr(g)
    if t_values is None or z_values is None:
        dt, dz = default_scalar_grid()
        t_values = dt if t_values is None else t_values
        z_values = dz if z_values is None else z_values
    worst, where, failed, total = 0.0, (), 0, 0
    for t in np.asarray(t_values, dtype=float):
        for z in np.asarray(z_values, dtype=float):
            total += 1
            try:
                dn = float(abs(_n_jet(f, g, t, z, kappa).gradient()[1]))
            except (HyperSDEError, ZeroDivisionError, OverflowError, ValueError):
                failed += 1
                continue
            if not math.isfinite(dn):
                failed += 1
            elif dn > worst or not where:
                worst, where = dn, (float(t), float(z))
    notes = []
    if failed > MAX_FAILED * total:
        verdict = UNDECIDED
        notes.append(f"{failed} of {total} sample points could not be evaluated")
    else:
        verdict = REDUCIBLE if worst <= tol else NOT_REDUCIBLE
    return ReducibilityReport(verdict, {"dN/dZ": worst}, {"dN/dZ": where}, tol, total, failed, notes=notes)


@dataclass
class ReductionResult:
    """``Y = h(t, Z)`` with ``dY = b(t) dt + a(t) dW``.

    ``h`` is tabulated on ``t x z`` and vanishes at ``z = anchor``.
    """

    t: np.ndarray
    z: np.ndarray
    a: np.ndarray
    h: np.ndarray
    b: np.ndarray
    anchor: float
    b_spread: float


def _quad(fn, lo, hi):
    if lo == hi:
        return 0.0
    val, _ = integrate.quad(fn, lo, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val


def construct_reduction(f, g, t_values, z_values, anchor: float, tol: float = 1e-6, kappa: float = 1.0) -> ReductionResult:
    """Tabulate ``a``, ``h`` and ``b`` for a reducible scalar equation.

    ``a(t) = exp(int_{t0}^t N ds)``, ``h = int_{anchor}^Z a / g dzeta`` and
    ``b = h_t + f h_Z + kappa/2 g^2 h_ZZ``, which must not depend on ``Z``.
    """
    f, g = _scalar_expr(f), _scalar_expr(g)
    t_values = np.asarray(t_values, dtype=float)
    z_values = np.asarray(z_values, dtype=float)
    t0 = float(t_values[0])

    def N(t, z):
        return _n_jet(f, g, t, z, kappa).value

    def jet1(expr, t, z):
        return eval_jet(expr, {"t": t, "Z": z}, _SCALAR_VARS, 1)

    for t in t_values:
        n_ref = N(t, anchor)
        spread = max(abs(N(t, z) - n_ref) for z in z_values)
        if spread > tol * (1 + abs(n_ref)):
            raise ConsistencyError(f"N depends on Z at t = {t} (spread {spread:.3g}); not reducible")
    g_samples = np.array([[jet1(g, t, z).value for z in z_values] for t in t_values])
    g_anchor = np.array([jet1(g, t, anchor).value for t in t_values])
    if not (np.all(g_samples > 0) and np.all(g_anchor > 0)) and not (
        np.all(g_samples < 0) and np.all(g_anchor < 0)
    ):
        raise ConsistencyError("g changes sign on the grid; h would not be monotone in Z")

    a = np.array([math.exp(_quad(lambda s: N(s, anchor), t0, t)) for t in t_values])
    h = np.empty((len(t_values), len(z_values)))
    b_tab = np.empty_like(h)
    for i, t in enumerate(t_values):
        n_t = N(t, anchor)

        def h_t_integrand(zeta):
            gj = jet1(g, t, zeta)
            gv, (gt, _) = gj.value, gj.gradient()
            return a[i] * (n_t / gv - gt / gv**2)

        for k, z in enumerate(z_values):
            h[i, k] = _quad(lambda zeta: a[i] / jet1(g, t, zeta).value, anchor, z)
            gj = jet1(g, t, z)
            fv = jet1(f, t, z).value
            gz = gj.gradient()[1]
            h_t = _quad(h_t_integrand, anchor, z)
            b_tab[i, k] = h_t + a[i] * (fv / gj.value - 0.5 * kappa * gz)
    b = b_tab.mean(axis=1)
    spread = float(np.max(np.abs(b_tab - b[:, None])))
    if spread > tol * (1 + float(np.max(np.abs(b)))):
        raise ConsistencyError(f"drift of Y varies with Z by {spread:.3g}")
    return ReductionResult(t_values, z_values, a, h, b, float(anchor), spread)


# Cp route

class CpJet:
    """``u + i v`` with ``i^2 = p`` and jet-valued components."""

    __slots__ = ("u", "v", "p")

    def __init__(self, u: Jet, v: Jet, p: float):
        self.u, self.v, self.p = u, v, p

    def __add__(self, o):
        return CpJet(self.u + o.u, self.v + o.v, self.p)

    def __sub__(self, o):
        return CpJet(self.u - o.u, self.v - o.v, self.p)

    def __mul__(self, o):
        if not isinstance(o, CpJet):
            return CpJet(self.u * o, self.v * o, self.p)
        return CpJet(self.u * o.u + self.p * (self.v * o.v), self.u * o.v + self.v * o.u, self.p)

    __rmul__ = __mul__

    def norm2(self) -> Jet:
        return self.u * self.u - self.p * (self.v * self.v)

    def __truediv__(self, o: "CpJet"):
        d = o.norm2()
        scale = 1e-8 * (1.0 + o.u.value**2 + abs(self.p) * o.v.value**2)
        if abs(d.value) <= scale:
            raise SingularElement("g is a zero divisor at this point")
        conj = CpJet(o.u, -o.v, self.p)
        prod = self * conj
        inv = d.reciprocal()
        return CpJet(prod.u * inv, prod.v * inv, self.p)

    def d(self, i: int) -> "CpJet":
        return CpJet(self.u.derivative(i), self.v.derivative(i), self.p)


def _cp_jets(p, comps, env, order):
    return [
        CpJet(eval_jet(a, env, _CP_VARS, order), eval_jet(b, env, _CP_VARS, order), p)
        for a, b in comps
    ]


def _n_cp(p, f1, f2, g1, g2, t, x, y, kappa):
    env = {"t": t, "X": x, "Y": y}
    f, g = _cp_jets(p, [(f1, f2), (g1, g2)], env, 3)
    # d/dZ of an analytic function equals d/dX in Cp
    g_t = g.d(0)
    g_zz = g.d(1).d(1)
    ratio_z = (f / g).d(1)
    return g * (g_t / (g * g) - ratio_z + g_zz * (0.5 * kappa)), f, g


def compute_N1N2_cp(p: float, f1, f2, g1, g2, point, kappa: Optional[float] = None):
    """Components of ``N`` for ``f = f1 + i f2`` and ``g = g1 + i g2`` in ``Cp``.

    ``point`` is ``(t, X, Y)``; ``kappa`` defaults to ``1 + p``.
    """
    kappa = cp_noise_factor(p) if kappa is None else kappa
    t, x, y = (float(v) for v in point)
    N, _, _ = _n_cp(p, *map(_cp_expr, (f1, f2, g1, g2)), t, x, y, kappa)
    return N.u.value, N.v.value


def n1n2_split_formula(p: float, f1, f2, g1, g2, point):
    """Alternative component split of ``N`` written in real arithmetic.

    Retained only as a diagnostic: it assumes ``kappa = 1`` and, beyond
    that, disagrees with the derived values whenever ``g`` depends on the
    state (for example ``g = Z`` at ``p = -1``).
    """
    t, x, y = (float(v) for v in point)
    env = {"t": t, "X": x, "Y": y}
    J = [eval_jet(_cp_expr(e), env, _CP_VARS, 2) for e in (f1, f2, g1, g2)]
    F1, F2, G1, G2 = (j.value for j in J)
    f1X, f2X = J[0].gradient()[1], J[1].gradient()[1]
    g1t, g1X, _ = J[2].gradient()
    g2t, g2X, _ = J[3].gradient()
    g1XX, g2XX = J[2].hessian()[1, 1], J[3].hessian()[1, 1]
    D = G1 * G1 - p * G2 * G2
    n1 = (
        -f1X + 0.5 * G1 * g1XX + 0.5 * p * G2 * g2XX
        + (F1 * g1X - p * G2 * g1X + p * F2 * g2X - p * F1 * G2 * g2X + G1 * g1t - p * G2 * g2X) / D
    )
    n2 = (
        -f2X + 0.5 * G2 * g1XX + 0.5 * G1 * g2XX
        + (F2 * G1 * g1X - F1 * G2 * g1X + F2 * G2 * g2X + F1 * G1 * g2X - G2 * g1X + G1 * g2t) / D
    )
    return n1, n2


def default_cp_grid(t_range=(0.0, 1.0), x_range=(0.5, 1.5), y_range=(0.1, 0.6), n: int = 9):
    return np.linspace(*t_range, n), np.linspace(*x_range, n), np.linspace(*y_range, n)


def check_cp_system(
    p: float,
    f1,
    f2,
    g1,
    g2,
    grid=None,
    tol: float = 1e-7,
    convention: str = "algebra",
    scheffers_tol: float = 1e-10,
) -> ReducibilityReport:
    """Decide whether the ``Cp`` system with drift ``(f1, f2)`` and noise
    components ``(g1, g2)`` hypercomplexifies to a reducible scalar equation.

    The Scheffers equations are checked for ``f`` and ``g`` at every time
    slice; then ``dN1/dX`` and ``dN2/dX`` must vanish, and for ``p = 0``
    also ``dN1/dY``.  Points where ``g`` is (nearly) a zero divisor are
    skipped.
    """
    from .algebra import cp

    f1, f2, g1, g2 = (_cp_expr(e) for e in (f1, f2, g1, g2))
    t_vals, x_vals, y_vals = default_cp_grid() if grid is None else grid
    kappa = cp_noise_factor(p, convention)
    alg = cp(p)
    notes = []
    state_drift = bool((free_vars(f1) | free_vars(f2)) & {"X", "Y"})
    if state_drift:
        notes.append("drift depends on the state; Scheffers conditions applied to it as well")

    xy = np.array([(x, y) for x in x_vals for y in y_vals], dtype=float)
    sch = {}
    for name, comps in (("f", (f1, f2)), ("g", (g1, g2))):
        worst = None
        for t in t_vals:
            try:
                rep = scheffers_check(alg, comps, xy, scheffers_tol, ("X", "Y"), {"t": float(t)})
            except EvaluationError as exc:
                notes.append(f"Scheffers check on {name} failed to evaluate: {exc}")
                continue
            if worst is None or rep.max_residual > worst.max_residual:
                worst = rep
                worst.worst_point = (float(t),) + tuple(rep.worst_point)
        sch[name] = worst
    analytic = all(r is not None and r.passed for r in sch.values())

    names = ["dN1/dX", "dN2/dX"] + (["dN1/dY"] if p == 0 else [])
    worst = {k: 0.0 for k in names}
    where = {k: () for k in names}
    split_gap = 0.0
    failed = total = 0
    for t in t_vals:
        for x in x_vals:
            for y in y_vals:
                total += 1
                try:
                    N, _, _ = _n_cp(p, f1, f2, g1, g2, float(t), float(x), float(y), kappa)
                    _, n1x, n1y = N.u.gradient()
                    n2x = N.v.gradient()[1]
                except (HyperSDEError, ZeroDivisionError, OverflowError, ValueError):
                    failed += 1
                    continue
                vals = {"dN1/dX": float(abs(n1x)), "dN2/dX": float(abs(n2x)), "dN1/dY": float(abs(n1y))}
                if not all(math.isfinite(vals[k]) for k in names):
                    failed += 1
                    continue
                for k in names:
                    if vals[k] > worst[k] or not where[k]:
                        worst[k], where[k] = vals[k], (float(t), float(x), float(y))
                try:
                    ref = _n_cp(p, f1, f2, g1, g2, float(t), float(x), float(y), 1.0)[0]
                    alt = n1n2_split_formula(p, f1, f2, g1, g2, (t, x, y))
                    split_gap = max(split_gap, float(abs(alt[0] - ref.u.value)), float(abs(alt[1] - ref.v.value)))
                except (HyperSDEError, ZeroDivisionError, OverflowError, ValueError):
                    pass

    branch = "p = 0: dN1/dX = dN2/dX = dN1/dY = 0" if p == 0 else "p != 0: dN1/dX = dN2/dX = 0"
    if failed > MAX_FAILED * total or any(r is None for r in sch.values()):
        verdict = UNDECIDED
        notes.append(f"{failed} of {total} sample points could not be evaluated")
    elif not analytic:
        verdict = NOT_REDUCIBLE
        notes.append("not hypercomplexifiable: Scheffers equations fail")
    else:
        verdict = REDUCIBLE if all(worst[k] <= tol for k in names) else NOT_REDUCIBLE
    if split_gap > 1e-8:
        log.info("alternative N1/N2 split differs from the derived values by %.3g", split_gap)
    return ReducibilityReport(
        verdict, worst, where, tol, total, failed,
        p=p, kappa=kappa, hypercomplexifiable=analytic, scheffers=sch, branch=branch,
        drift_depends_on_state=state_drift, split_discrepancy=split_gap, notes=notes,
    )


def lift_to_cp(expr, p: float):
    """Component trees ``(u, v)`` of a scalar expression in ``t`` and ``Z``
    evaluated at ``Z = X + i Y`` in ``Cp``.

    Supports ``+ - * /``, integer powers and ``exp``; ``t`` and constants
    are real.
    """
    from .expr import BinOp, Call, Neg, Num, Var, add, mul

    node = _scalar_expr(expr)
    P = Num(float(p))

    def times(a, b):
        return (add(mul(a[0], b[0]), mul(P, a[1], b[1])), add(mul(a[0], b[1]), mul(a[1], b[0])))

    def rec(nd):
        if isinstance(nd, Num):
            return nd, Num(0.0)
        if isinstance(nd, Var):
            if nd.name == "Z":
                return Var("X"), Var("Y")
            return nd, Num(0.0)
        if isinstance(nd, Neg):
            u, v = rec(nd.operand)
            return Neg(u), Neg(v)
        if isinstance(nd, Call):
            if nd.func != "exp":
                raise DomainError(f"cannot lift {nd.func} to Cp", nd.pos)
            u, v = rec(nd.arg)
            if p == 0:
                c, s = Num(1.0), v
            else:
                r = math.sqrt(abs(p))
                arg = mul(Num(r), v)
                if p < 0:
                    c, s = Call("cos", arg), mul(Num(1 / r), Call("sin", arg))
                else:
                    half = Num(0.5)
                    c = mul(half, add(Call("exp", arg), Call("exp", Neg(arg))))
                    s = mul(Num(0.5 / r), BinOp("-", Call("exp", arg), Call("exp", Neg(arg))))
            e = Call("exp", u)
            return mul(e, c), mul(e, s)
        a, b = rec(nd.left), rec(nd.right)
        if nd.op == "+":
            return add(a[0], b[0]), add(a[1], b[1])
        if nd.op == "-":
            return BinOp("-", a[0], b[0]), BinOp("-", a[1], b[1])
        if nd.op == "*":
            return times(a, b)
        if nd.op == "/":
            den = BinOp("-", mul(b[0], b[0]), mul(P, b[1], b[1]))
            num = times(a, (b[0], Neg(b[1])))
            return BinOp("/", num[0], den), BinOp("/", num[1], den)
        if not (isinstance(nd.right, Num) and float(nd.right.value).is_integer() and nd.right.value >= 0):
            raise DomainError("only non-negative integer powers can be lifted", nd.pos)
        out = (Num(1.0), Num(0.0))
        for _ in range(int(nd.right.value)):
            out = times(out, a)
        return out

    return rec(node)
