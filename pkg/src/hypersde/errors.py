"""Exception hierarchy.

Errors that signal a mathematical obstruction (a zero divisor, a series
that does not converge, a logarithm off its domain) derive from
:class:`MathDomainError`; the CLI maps those to exit status 2.
"""


class HyperSDEError(Exception):
    pass


class ConfigError(HyperSDEError):
    pass


class AxiomViolation(HyperSDEError):
    def __init__(self, axiom, witness, residual):
        self.axiom = axiom
        self.witness = tuple(witness)
        self.residual = float(residual)
        super().__init__(
            f"{axiom} fails at indices {self.witness} (residual {self.residual:.3g})"
        )


class NoIdentity(HyperSDEError):
    pass


class AlgebraMismatch(HyperSDEError):
    pass


class ParseError(HyperSDEError):
    def __init__(self, offset, expected, text=""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.text = text
        want = ", ".join(sorted(repr(e) for e in self.expected))
        super().__init__(f"parse error at offset {offset}: expected {want}")


class IndivisibleFactor(HyperSDEError):
    pass


class MathDomainError(HyperSDEError):
    pass


class SingularElement(MathDomainError):
    def __init__(self, message, t=None, index=None):
        self.t = t
        self.index = index
        super().__init__(message)


class NoConvergence(MathDomainError):
    pass


class DomainError(MathDomainError):
    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class EvaluationError(MathDomainError):
    def __init__(self, message, point=None):
        self.point = point
        super().__init__(message)


class NewtonDivergence(MathDomainError):
    pass


class NonFinite(MathDomainError):
    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)


class ConsistencyError(MathDomainError):
    pass
