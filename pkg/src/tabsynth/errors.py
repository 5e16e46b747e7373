"""Exception types raised across the package.

Every error derives from :class:`TabsynthError` so the CLI can map them to a
single runtime exit code.
"""

from __future__ import annotations


class TabsynthError(Exception):
    """Base class for all package errors."""


# -- table I/O and schema -------------------------------------------------

class SchemaError(TabsynthError, ValueError):
    pass


class MissingColumn(SchemaError):
    def __init__(self, column: str):
        super().__init__(f"missing column {column!r}")
        self.column = column


class DuplicateHeader(SchemaError):
    def __init__(self, column: str):
        super().__init__(f"duplicate header {column!r}")
        self.column = column


class UnknownColumn(SchemaError):
    def __init__(self, column: str):
        super().__init__(f"unknown column {column!r}")
        self.column = column


class SchemaMismatch(SchemaError):
    pass


class TypeMismatch(TabsynthError, ValueError):
    def __init__(self, row: int, column: str, value: object, reason: str = ""):
        msg = f"row {row}, column {column!r}: cannot accept {value!r}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.row = row
        self.column = column
        self.value = value


class IoFailure(TabsynthError, OSError):
    pass


# -- transforms -----------------------------------------------------------

class NonBinaryComponent(TabsynthError, ValueError):
    pass


class NonPositiveValue(TabsynthError, ValueError):
    pass


# -- profiling ------------------------------------------------------------

class TooFewValues(TabsynthError, ValueError):
    pass


class UnknownLabel(TabsynthError, ValueError):
    pass


class NonNumericColumn(TabsynthError, ValueError):
    pass


class DegenerateColumn(TabsynthError, ValueError):
    pass


# -- generation -----------------------------------------------------------

class DegenerateBounds(TabsynthError, ValueError):
    pass


class NonPositiveBmi(TabsynthError, ValueError):
    pass


class InfeasibleTarget(TabsynthError, ValueError):
    def __init__(self, r_target: float, lower: float, upper: float):
        super().__init__(
            f"target r={r_target:.4f} outside attainable range "
            f"[{lower:.4f}, {upper:.4f}] for these margins"
        )
        self.r_target = r_target
        self.lower = lower
        self.upper = upper


class CalibrationFailed(TabsynthError, RuntimeError):
    def __init__(self, r_target: float, best_rho: float, achieved_r: float,
                 iterations: int):
        super().__init__(
            f"could not reach r={r_target:.4f}: best latent rho={best_rho:.4f} "
            f"gave r={achieved_r:.4f} after {iterations} iterations"
        )
        self.r_target = r_target
        self.best_rho = best_rho
        self.achieved_r = achieved_r
        self.iterations = iterations


# -- metrics --------------------------------------------------------------

class ZeroRange(TabsynthError, ValueError):
    pass


class OutOfRange(TabsynthError, ValueError):
    pass


# -- classifier -----------------------------------------------------------

class SingleClassLabels(TabsynthError, ValueError):
    pass


class EmptyFeatures(TabsynthError, ValueError):
    pass


class FeatureMismatch(TabsynthError, ValueError):
    pass


class LengthMismatch(TabsynthError, ValueError):
    pass


class NoPositives(TabsynthError, ValueError):
    pass
