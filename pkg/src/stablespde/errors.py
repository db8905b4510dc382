"""Exception hierarchy.

Every error carries structured fields so callers (and the CLI) can report the
offending parameter, cell or quadrature diagnostics without parsing messages.
"""

from __future__ import annotations


class StableSPDEError(Exception):
    """Base class for all package errors."""


class ParameterError(StableSPDEError, ValueError):
    """A parameter lies outside its admissible range."""

    def __init__(self, name: str, value, requirement: str):
        self.name = name
        self.value = value
        self.requirement = requirement
        super().__init__(f"{name}={value!r} violates: {requirement}")


class DimensionError(StableSPDEError, ValueError):
    def __init__(self, expected, got, what: str = "vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class GridError(StableSPDEError, ValueError):
    """Two objects that must share a time grid do not."""


class ModeError(StableSPDEError, ValueError):
    """An operation requires a different noise mode."""


class QuadratureError(StableSPDEError, ArithmeticError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} {self.diagnostics}" if diagnostics else message)


class NonFiniteStateError(StableSPDEError, FloatingPointError):
    def __init__(self, cell: int, path: int):
        self.cell = cell
        self.path = path
        super().__init__(f"non-finite state in cell {cell} of path {path}")


class HypothesisError(StableSPDEError, ValueError):
    """A theorem hypothesis required by the requested computation is not met."""


class DriftConditionError(StableSPDEError):
    """Lyapunov drift condition fails at sampled points; no certificate applies."""

    def __init__(self, n_violations: int, worst: float, worst_point=None):
        self.n_violations = n_violations
        self.worst = worst
        self.worst_point = worst_point
        super().__init__(
            f"drift condition violated at {n_violations} sampled points "
            f"(worst excess {worst:.3g})"
        )


class ConfigError(StableSPDEError, ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
