"""Commutative hypercomplex algebras given by structure constants.

An algebra of dimension ``n`` is stored as a rank-3 array ``gamma`` with
``e_i e_j = sum_k gamma[i, j, k] e_k`` together with the coefficient
vector of its identity.  Elements are coefficient vectors; every routine
here accepts batches with the component axis last, shape ``(..., n)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import AlgebraMismatch, AxiomViolation, NoIdentity, SingularElement

AXIOM_TOL = 1e-12
IDENTITY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Algebra:
    gamma: np.ndarray
    identity: np.ndarray
    label: str
    kind: str = "table"
    p: Optional[float] = None
    parts: tuple = field(default=(), repr=False)

    @property
    def dim(self) -> int:
        return self.gamma.shape[0]

    def __eq__(self, other):
        return isinstance(other, Algebra) and other.label == self.label

    def __hash__(self):
        return hash(self.label)

    def element(self, coeffs) -> "HValue":
        return HValue(np.asarray(coeffs, dtype=float), self.label)

    def unit(self, i: int) -> np.ndarray:
        """Coefficient vector of the basis unit ``e_{i+1}`` (zero-based ``i``)."""
        e = np.zeros(self.dim)
        e[i] = 1.0
        return e

    @property
    def noise_square(self) -> np.ndarray:
        """Sum of the squared units.

        For independent Wiener components ``dW_i dW_j = delta_ij dt`` the
        hypercomplex noise ``dWW = sum_i dW_i e_i`` satisfies
        ``dWW * dWW = noise_square * dt``.
        """
        n = self.dim
        return np.einsum("iik->k", self.gamma[:n, :n, :])


@dataclass(frozen=True, eq=False)
class HValue:
    coeffs: np.ndarray
    label: str

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def __repr__(self):
        return f"HValue({self.coeffs.tolist()}, {self.label!r})"


@dataclass
class AxiomCheck:
    name: str
    residual: float
    witness: Optional[tuple]
    passed: bool


@dataclass
class VerificationReport:
    label: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> AxiomCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "passed": self.passed,
            "axioms": {
                c.name: {
                    "residual": c.residual,
                    "witness": list(c.witness) if c.witness else None,
                    "passed": c.passed,
                }
                for c in self.checks
            },
        }


def _worst(residuals: np.ndarray):
    if residuals.size == 0:
        return 0.0, None
    idx = np.unravel_index(np.argmax(residuals), residuals.shape)
    return float(residuals[idx]), tuple(int(i) + 1 for i in idx)


def _tolerance(gamma: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(gamma))) if gamma.size else 1.0)
    return AXIOM_TOL * scale * scale


def commutativity_residual(gamma):
    return _worst(np.abs(gamma - gamma.transpose(1, 0, 2)))


def associativity_residual(gamma):
    # (e_i e_j) e_k  vs  e_i (e_j e_k), indexed [i, j, k, t]
    left = np.einsum("ijs,skt->ijkt", gamma, gamma)
    right = np.einsum("ist,jks->ijkt", gamma, gamma)
    return _worst(np.abs(left - right))


def identity_residual(gamma, identity):
    n = gamma.shape[0]
    left = np.einsum("k,ikj->ij", identity, gamma)
    right = np.einsum("k,kij->ij", identity, gamma)
    eye = np.eye(n)
    return _worst(np.maximum(np.abs(left - eye), np.abs(right - eye)))


def verify_algebra(alg: Algebra) -> VerificationReport:
    """Residuals of commutativity, associativity and the identity axiom.

    Witness indices are one-based, matching ``gamma_ijk`` notation.
    """
    return _verify(alg.gamma, alg.identity, alg.label)


def _verify(gamma, identity, label) -> VerificationReport:
    tol = _tolerance(gamma)
    checks = []
    for name, (res, wit) in (
        ("commutativity", commutativity_residual(gamma)),
        ("associativity", associativity_residual(gamma)),
        ("identity", identity_residual(gamma, identity)),
    ):
        checks.append(AxiomCheck(name, res, wit if res > 0 else None, res <= tol))
    return VerificationReport(label, checks)


def solve_identity(gamma: np.ndarray) -> np.ndarray:
    """Least-squares solution of ``sum_k eps_k gamma_ikj = delta_ij``."""
    n = gamma.shape[0]
    # row (i, j), column k
    A = gamma.transpose(0, 2, 1).reshape(n * n, n)
    rhs = np.eye(n).reshape(n * n)
    eps, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    if np.max(np.abs(A @ eps - rhs)) > IDENTITY_TOL:
        raise NoIdentity("identity equations are inconsistent for this table")
    return eps


def from_table(gamma, identity=None, label="table", kind="table", p=None, parts=()) -> Algebra:
    gamma = np.array(gamma, dtype=float)
    if gamma.ndim != 3 or not (gamma.shape[0] == gamma.shape[1] == gamma.shape[2]):
        raise ValueError(f"gamma must be an n x n x n array, got shape {gamma.shape}")
    tol = _tolerance(gamma)
    res, wit = commutativity_residual(gamma)
    if res > tol:
        raise AxiomViolation("commutativity", wit, res)
    res, wit = associativity_residual(gamma)
    if res > tol:
        raise AxiomViolation("associativity", wit, res)
    if identity is None:
        identity = solve_identity(gamma)
    identity = np.array(identity, dtype=float)
    if identity.shape != (gamma.shape[0],):
        raise ValueError("identity must have length n")
    res, wit = identity_residual(gamma, identity)
    if res > tol:
        raise AxiomViolation("identity", wit, res)
    gamma.setflags(write=False)
    identity.setflags(write=False)
    return Algebra(gamma, identity, label, kind, p, tuple(parts))


def real_line() -> Algebra:
    return from_table(np.ones((1, 1, 1)), [1.0], label="R", kind="real")


def cp(p: float) -> Algebra:
    """Generalized complex numbers: units ``1, i`` with ``i^2 = p``."""
    p = float(p)
    g = np.zeros((2, 2, 2))
    g[0, 0, 0] = 1.0
    g[0, 1, 1] = g[1, 0, 1] = 1.0
    g[1, 1, 0] = p
    return from_table(g, [1.0, 0.0], label=f"Cp(p={p:g})", kind="Cp", p=p)


def a34() -> Algebra:
    """Units ``1, i, j`` with ``i^2 = j`` and ``ij = j^2 = 0``."""
    g = np.zeros((3, 3, 3))
    for k in range(3):
        g[0, k, k] = g[k, 0, k] = 1.0
    g[1, 1, 2] = 1.0
    return from_table(g, [1.0, 0.0, 0.0], label="A3_4", kind="A3_4")


def direct_product(A: Algebra, B: Algebra) -> Algebra:
    """Tensor product; unit ``(i, a)`` sits at flat index ``i * B.dim + a``."""
    n = A.dim * B.dim
    g = np.einsum("ijk,abc->iajbkc", A.gamma, B.gamma).reshape(n, n, n)
    eps = np.kron(A.identity, B.identity)
    return from_table(g, eps, label=f"{A.label}⊗{B.label}", kind="product", parts=(A, B))


def direct_sum(A: Algebra, B: Algebra) -> Algebra:
    n = A.dim + B.dim
    g = np.zeros((n, n, n))
    g[: A.dim, : A.dim, : A.dim] = A.gamma
    g[A.dim :, A.dim :, A.dim :] = B.gamma
    eps = np.concatenate([A.identity, B.identity])
    return from_table(g, eps, label=f"{A.label}⊕{B.label}", kind="sum", parts=(A, B))


def make_algebra(kind, **params) -> Algebra:
    """Build an algebra from a builtin name or a JSON-style description.

    ``kind`` is one of ``"Cp"`` (needs ``p``), ``"A3_4"``, ``"R"``,
    ``"table"`` (needs ``gamma``, optional ``identity`` and ``label``),
    ``"product"``/``"sum"`` (need ``factors``: two nested descriptions),
    or a dict such as ``{"builtin": "Cp", "p": -1}``.
    """
    if isinstance(kind, dict):
        spec = dict(kind)
        if "builtin" in spec:
            return make_algebra(spec.pop("builtin"), **spec)
        if "gamma" in spec:
            return make_algebra("table", **spec)
        for key in ("product", "sum"):
            if key in spec:
                return make_algebra(key, factors=spec[key])
        if "table_file" in spec:
            return load_table(spec["table_file"])
        raise ValueError(f"cannot interpret algebra description {kind!r}")
    if kind == "Cp":
        return cp(params["p"])
    if kind in ("A3_4", "A34"):
        return a34()
    if kind in ("R", "real"):
        return real_line()
    if kind == "table":
        return from_table(
            params["gamma"], params.get("identity"), label=params.get("label", "table")
        )
    if kind in ("product", "sum"):
        a, b = (f if isinstance(f, Algebra) else make_algebra(f) for f in params["factors"])
        return direct_product(a, b) if kind == "product" else direct_sum(a, b)
    raise ValueError(f"unknown algebra kind {kind!r}")


def load_table(path) -> Algebra:
    with open(path) as fh:
        doc = json.load(fh)
    gamma = np.array(doc["gamma"], dtype=float)
    if gamma.shape != (doc["dim"],) * 3:
        raise ValueError(f"gamma shape {gamma.shape} does not match dim={doc['dim']}")
    return from_table(gamma, doc.get("identity"), label=doc.get("label", str(path)))


def _coeffs(alg: Algebra, u):
    if isinstance(u, HValue):
        if u.label != alg.label:
            raise AlgebraMismatch(f"element of {u.label} used in {alg.label}")
        return u.coeffs, True
    u = np.asarray(u, dtype=float)
    if u.shape[-1:] != (alg.dim,):
        raise AlgebraMismatch(f"expected trailing dimension {alg.dim}, got shape {u.shape}")
    return u, False


def _wrap(alg, x, as_h):
    return HValue(x, alg.label) if as_h else x


def left_matrix(alg: Algebra, u) -> np.ndarray:
    """Matrix ``M`` with ``(u v)_k = sum_j M[k, j] v_j``."""
    u, _ = _coeffs(alg, u)
    return np.einsum("...i,ijk->...kj", u, alg.gamma)


def multiply(alg: Algebra, u, v):
    cu, hu = _coeffs(alg, u)
    cv, hv = _coeffs(alg, v)
    out = np.einsum("...kj,...j->...k", left_matrix(alg, cu), cv)
    return _wrap(alg, out, hu or hv)


def power_int(alg: Algebra, u, k: int):
    cu, hu = _coeffs(alg, u)
    out = np.broadcast_to(alg.identity, cu.shape).copy()
    for _ in range(k):
        out = multiply(alg, out, cu)
    return _wrap(alg, out, hu)


def norm(u) -> float:
    c = u.coeffs if isinstance(u, HValue) else np.asarray(u, dtype=float)
    return np.linalg.norm(c, axis=-1)


def invert(alg: Algebra, u, singular_tol=None):
    """Multiplicative inverse by solving ``M(u) x = identity``.

    Raises :class:`SingularElement` when ``|det M(u)|`` falls below
    ``1e-10 * |u|^(n-1)`` (or ``singular_tol`` if given); for a batch the
    exception's ``index`` names the first offending element.
    """
    cu, hu = _coeffs(alg, u)
    M = left_matrix(alg, cu)
    det = np.linalg.det(M)
    n = alg.dim
    tol = 1e-10 * norm(cu) ** (n - 1) if singular_tol is None else singular_tol
    bad = ~(np.abs(det) > tol)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0]) if cu.ndim > 1 else None
        raise SingularElement(
            f"element is (nearly) a zero divisor in {alg.label}: |det| = "
            f"{float(np.abs(np.atleast_1d(det)[idx if idx else 0])):.3g}",
            index=idx,
        )
    rhs = np.broadcast_to(alg.identity, cu.shape)
    out = np.linalg.solve(M, rhs[..., None])[..., 0]
    return _wrap(alg, out, hu)


def scale(u, c):
    if isinstance(u, HValue):
        return HValue(u.coeffs * c, u.label)
    return np.asarray(u) * c


def builtin_algebras() -> dict:
    return {
        "Cp(p=-1)": cp(-1),
        "Cp(p=0)": cp(0),
        "Cp(p=1)": cp(1),
        "A3_4": a34(),
    }


def embed_real(alg: Algebra, x) -> np.ndarray:
    """Real scalar(s) as multiples of the identity."""
    x = np.asarray(x, dtype=float)
    return x[..., None] * alg.identity


def as_coeffs(alg: Algebra, u) -> np.ndarray:
    return _coeffs(alg, u)[0]
