"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` holds the Taylor coefficients of a function around a
point, up to a fixed total order, over a small set of variables.
Arithmetic on jets propagates derivatives exactly (up to rounding), which
is what the analyticity and reducibility checks need: order 2 for
gradients and Hessians, order 3 when a quantity built from second
derivatives must itself be differentiated once more.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import DomainError


class _Basis:
    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = [
            m
            for d in range(order + 1)
            for m in sorted(
                (c for c in itertools.product(range(d + 1), repeat=nvars) if sum(c) == d),
                reverse=True,
            )
        ]
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.size = len(monos)
        a_idx, b_idx, c_idx = [], [], []
        for (ia, ma), (ib, mb) in itertools.product(enumerate(monos), repeat=2):
            mc = tuple(x + y for x, y in zip(ma, mb))
            if sum(mc) <= order:
                a_idx.append(ia)
                b_idx.append(ib)
                c_idx.append(self.index[mc])
        self.a = np.array(a_idx, dtype=np.intp)
        self.b = np.array(b_idx, dtype=np.intp)
        self.c = np.array(c_idx, dtype=np.intp)


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> _Basis:
    return _Basis(nvars, order)


class Jet:
    __slots__ = ("c", "basis")

    def __init__(self, coeffs, bas: _Basis):
        self.c = np.asarray(coeffs, dtype=float)
        self.basis = bas

    @classmethod
    def constant(cls, value, nvars, order):
        bas = basis(nvars, order)
        c = np.zeros(bas.size)
        c[0] = value
        return cls(c, bas)

    @classmethod
    def variable(cls, value, i, nvars, order):
        jet = cls.constant(value, nvars, order)
        if order >= 1:
            mono = tuple(1 if k == i else 0 for k in range(nvars))
            jet.c[jet.basis.index[mono]] = 1.0
        return jet

    @property
    def value(self) -> float:
        return float(self.c[0])

    @property
    def order(self) -> int:
        return self.basis.order

    def coeff(self, mono) -> float:
        return float(self.c[self.basis.index[tuple(mono)]])

    def partial(self, mono) -> float:
        """Mixed partial derivative for multi-index ``mono``."""
        return self.coeff(mono) * math.prod(math.factorial(k) for k in mono)

    def gradient(self) -> np.ndarray:
        n = self.basis.nvars
        return np.array([self.partial(tuple(int(k == i) for k in range(n))) for i in range(n)])

    def hessian(self) -> np.ndarray:
        n = self.basis.nvars
        H = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                mono = [0] * n
                mono[i] += 1
                mono[j] += 1
                H[i, j] = self.partial(mono)
        return H

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        bas = basis(self.basis.nvars, order)
        return Jet(self.c[: bas.size].copy(), bas)

    def derivative(self, i: int) -> "Jet":
        """Exact derivative with respect to variable ``i``; order drops by one."""
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        bas = basis(self.basis.nvars, self.order - 1)
        out = np.zeros(bas.size)
        for k, mono in enumerate(bas.monos):
            up = list(mono)
            up[i] += 1
            out[k] = (mono[i] + 1) * self.c[self.basis.index[tuple(up)]]
        return Jet(out, bas)

    # arithmetic

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.basis.nvars != self.basis.nvars:
                raise ValueError("jets over different variable sets")
            if other.order != self.order:
                k = min(self.order, other.order)
                return self.truncate(k), other.truncate(k)
            return self, other
        return self, Jet.constant(float(other), self.basis.nvars, self.order)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.c + b.c, a.basis)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.c, self.basis)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.c - b.c, a.basis)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.c * float(other), self.basis)
        a, b = self._coerce(other)
        bas = a.basis
        out = np.bincount(bas.c, weights=a.c[bas.a] * b.c[bas.b], minlength=bas.size)
        return Jet(out, bas)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            if other == 0:
                raise DomainError("division by zero")
            return Jet(self.c / float(other), self.basis)
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def compose(self, coeffs) -> "Jet":
        """``sum_k coeffs[k] * (self - value)^k`` for a univariate Taylor series."""
        delta = Jet(self.c.copy(), self.basis)
        delta.c[0] = 0.0
        out = Jet.constant(coeffs[-1], self.basis.nvars, self.order)
        for ck in reversed(coeffs[:-1]):
            out = out * delta + ck
        return out

    def reciprocal(self) -> "Jet":
        u = self.value
        if u == 0.0:
            raise DomainError("division by zero")
        return self.compose([(-1.0) ** k / u ** (k + 1) for k in range(self.order + 1)])

    def powi(self, k: int) -> "Jet":
        if k < 0:
            return self.powi(-k).reciprocal()
        out = Jet.constant(1.0, self.basis.nvars, self.order)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def powr(self, r: float) -> "Jet":
        u = self.value
        if u <= 0.0:
            raise DomainError("non-integer power of a non-positive base")
        coeffs = []
        binom = 1.0
        for k in range(self.order + 1):
            coeffs.append(binom * u ** (r - k))
            binom *= (r - k) / (k + 1)
        return self.compose(coeffs)

    def exp(self) -> "Jet":
        e = math.exp(self.value)
        return self.compose([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self) -> "Jet":
        u = self.value
        if u <= 0.0:
            raise DomainError("logarithm of a non-positive number")
        coeffs = [math.log(u)] + [(-1.0) ** (k - 1) / (k * u**k) for k in range(1, self.order + 1)]
        return self.compose(coeffs)

    def sin(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = (s, c, -s, -c)
        return self.compose([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def cos(self) -> "Jet":
        s, c = math.sin(self.value), math.cos(self.value)
        cycle = (c, -s, -c, s)
        return self.compose([cycle[k % 4] / math.factorial(k) for k in range(self.order + 1)])

    def sqrt(self) -> "Jet":
        if self.value == 0.0 and self.order == 0:
            return Jet.constant(0.0, self.basis.nvars, 0)
        if self.value < 0.0:
            raise DomainError("square root of a negative number")
        return self.powr(0.5)

    def __repr__(self):
        return f"Jet(value={self.value!r}, order={self.order}, nvars={self.basis.nvars})"
