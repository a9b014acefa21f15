"""Exception types shared across the package."""


class FhmcError(Exception):
    """Base class for all package errors."""


class CapExceeded(FhmcError):
    """A configured resource cap (states, paths, nodes, time) was hit."""


class BudgetExceeded(CapExceeded):
    pass


class StateCapExceeded(CapExceeded):
    pass


class NodeCapExceeded(CapExceeded):
    pass


class SizeCap(CapExceeded):
    pass


class InvalidDistribution(FhmcError, ValueError):
    pass


class NotWellDefined(FhmcError, ValueError):
    """A valuation does not turn every row into a probability distribution."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class InvalidPath(FhmcError, ValueError):
    pass


class UnknownVariable(FhmcError, KeyError):
    pass


class MixedTerminalKinds(FhmcError, TypeError):
    pass


class VariableClash(FhmcError, ValueError):
    pass


class EncodingTooSmall(FhmcError, ValueError):
    pass


class MissingWeight(FhmcError, KeyError):
    pass


class NonConstantResidual(FhmcError, ValueError):
    pass


class EvenN(FhmcError, ValueError):
    pass


class ModelError(FhmcError):
    """Error in a model source, optionally carrying a source location."""

    def __init__(self, message, line=None, col=None, filename=None):
        self.message = message
        self.line = line
        self.col = col
        self.filename = filename
        super().__init__(self._render())

    def _render(self):
        where = ""
        if self.line is not None:
            where = f"{self.filename or '<input>'}:{self.line}:{self.col}: "
        elif self.filename:
            where = f"{self.filename}: "
        return where + self.message

    def with_filename(self, filename):
        self.filename = filename
        self.args = (self._render(),)
        return self


class ParseError(ModelError):
    pass


class SemanticError(ModelError):
    pass


class EvaluationError(ModelError):
    pass


class ModelDivisionByZero(EvaluationError):
    pass


class DataRace(EvaluationError):
    pass


class OutOfDomain(EvaluationError):
    pass


class OverlappingGuards(EvaluationError):
    pass
