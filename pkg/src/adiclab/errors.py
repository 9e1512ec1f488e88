"""Exception hierarchy shared by every adiclab module."""


class AdicLabError(Exception):
    """Base class for library errors."""


class DomainError(AdicLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class PreconditionError(AdicLabError, ValueError):
    """A documented precondition of an experiment does not hold."""


class ParseError(AdicLabError, ValueError):
    """A definition document could not be parsed or validated."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:{column or 0}:"
        super().__init__(f"{where} {message}" if where else message)


class EmptySetError(ParseError):
    """The automaton accepts no infinite sequence after pruning."""


class DepthTooLarge(AdicLabError):
    """A cover or pair enumeration would exceed its hard cap."""


class NumericalError(AdicLabError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class SplitRequired(DomainError):
    """A cover interval straddles a breakpoint of a piecewise map."""
