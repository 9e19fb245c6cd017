"""Custom exceptions for the protocol synthesizer."""

from __future__ import annotations


class SynthesisError(Exception):
    """Base exception for all protosynth errors."""
    pass


class ConfigurationError(SynthesisError):
    """Raised when configuration is invalid or missing."""
    pass


class ExprError(SynthesisError):
    """Raised when an expression cannot be typed or evaluated."""
    pass


class UnboundNameError(ExprError):
    """Raised when an expression mentions a name with no binding."""
    pass


class TypeMismatchError(ExprError):
    """Raised when operand types do not fit an operator."""
    pass


class MissingArgError(ExprError):
    """Raised when a hole argument is bound neither by the state nor the parameters."""
    pass


class SketchError(SynthesisError):
    """Raised when a sketch source fails to parse or validate.

    Attributes:
        diagnostics: every problem found, each carrying a source location
    """

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0] if self.diagnostics else None
        super().__init__(str(first) if first else "invalid sketch")


class SketchSyntaxError(SketchError):
    """Raised when the sketch text does not match the DSL grammar."""
    pass


class SketchTypeError(SketchError):
    """Raised when a declaration is ill-typed or names something undeclared."""
    pass


class MissingPostClauseError(SketchError):
    """Raised when an action has no post-clause for some state variable."""
    pass


class DuplicateHoleError(SketchError):
    """Raised when a hole is declared or used more than once."""
    pass


class HoleOutsideActionError(SketchError):
    """Raised when a hole is used anywhere but as a whole pre-condition or post-clause."""
    pass


class CheckerError(SynthesisError):
    """Base exception for model-checking failures."""
    pass


class NotEnabledError(CheckerError):
    """Raised when a successor is requested for a disabled action instance."""
    pass


class StateBudgetExceededError(CheckerError):
    """Raised when the reachable state space outgrows the configured budget."""
    pass


class KindMismatchError(SynthesisError):
    """Raised when a generalizer receives a counterexample of another kind."""
    pass


class SynthTimeoutError(SynthesisError):
    """Raised when a synthesis run exceeds its wall-clock limit."""
    pass


class CandidateBudgetError(SynthesisError):
    """Raised when a synthesis run exceeds its candidate budget."""
    pass


class InternalError(SynthesisError):
    """Raised when an algorithmic invariant is breached."""
    pass
