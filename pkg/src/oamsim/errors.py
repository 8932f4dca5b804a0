"""Exception types shared across the package.

The CLI maps these onto exit codes: setup-file problems (syntax or
semantics) exit with 2, numerical failures (degenerate fits, singular
systems, non-finite values) exit with 3.
"""

from __future__ import annotations


class OamSimError(Exception):
    """Base class for all package errors."""


class ZeroStateError(OamSimError, ValueError):
    """A state with no nonzero amplitude was normalized or projected."""


class ModeBoundError(OamSimError, ValueError):
    """An OAM value fell outside the mode-space truncation."""


class UnsupportedPumpError(OamSimError, ValueError):
    """A crystal was configured with an odd pump OAM."""


class ChainShapeError(OamSimError, ValueError):
    """A crystal chain does not have the layout an operation requires."""


class ModelError(OamSimError, ValueError):
    """A physical model input is inconsistent (e.g. non-PSD overlap matrix)."""


class CompletenessError(OamSimError, ValueError):
    """A tomography design does not span the operator space it targets."""


class FitError(OamSimError, RuntimeError):
    """A least-squares fit was degenerate or failed to converge."""


class SetupParseError(OamSimError, ValueError):
    """A setup file was rejected; carries the offending position.

    Attributes:
        line: 1-based line number of the rejected token.
        column: 1-based column number of the rejected token.
        expected: tuple of token descriptions that would have been accepted.
    """

    def __init__(self, message: str, line: int, column: int,
                 expected: tuple[str, ...] = ()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        where = f"line {line}, column {column}: {message}"
        if self.expected:
            where += " (expected " + " | ".join(self.expected) + ")"
        super().__init__(where)
