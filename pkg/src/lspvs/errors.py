"""Exception hierarchy.

Every error carries a stable ``code`` and, where meaningful, the offending
``field`` so the CLI can emit machine-readable failures.
"""

from __future__ import annotations


class LspError(Exception):
    code = "error"

    def __init__(self, message: str, field: str | None = None, **details):
        super().__init__(message)
        self.field = field
        self.details = details

    def to_dict(self) -> dict:
        out = {"code": self.code, "message": str(self)}
        if self.field is not None:
            out["field"] = self.field
        out.update({k: v for k, v in self.details.items() if v is not None})
        return out


class DimensionMismatch(LspError, ValueError):
    code = "dimension_mismatch"


class EmptyData(LspError, ValueError):
    code = "empty_data"


class NonFiniteData(LspError, ValueError):
    code = "non_finite_data"


class DegenerateWeights(LspError, ValueError):
    code = "degenerate_weights"


class InvalidWeights(LspError, ValueError):
    code = "invalid_weights"


class PTooSmall(LspError, ValueError):
    code = "p_too_small"


class OutOfRange(LspError, ValueError):
    code = "out_of_range"


class ThetaOverflow(LspError, ValueError):
    code = "theta_overflow"


class EtaNotOnGrid(LspError, ValueError):
    code = "eta_not_on_grid"


class NumericalFailure(LspError, ArithmeticError):
    code = "numerical_failure"


class InvalidBudget(LspError, ValueError):
    code = "invalid_budget"


class InsufficientData(LspError, ValueError):
    code = "insufficient_data"


class ParseError(LspError, ValueError):
    code = "parse_error"


class RangeViolation(LspError, ValueError):
    code = "range_violation"


class MissingFeature(LspError, KeyError):
    code = "missing_feature"

    def __str__(self):  # KeyError would repr() the message
        return self.args[0] if self.args else ""


class ConfigError(LspError, ValueError):
    code = "config_error"


class UnknownCommand(LspError, ValueError):
    code = "unknown_command"
