"""Exception types raised across the package."""


class Beta3Error(Exception):
    """Base class for all package errors."""


class DomainError(Beta3Error, ValueError):
    """A value lies outside the domain a type or operation accepts."""


class ZeroDiscrimination(DomainError):
    """The ICC is flat (a == 0) and cannot be inverted."""


class DegenerateResponse(DomainError):
    """A response sits on the boundary of the Beta support."""


class LengthMismatch(Beta3Error, ValueError):
    pass


class IndexOutOfRange(Beta3Error, IndexError):
    pass


class InsufficientData(Beta3Error, ValueError):
    pass


class TooFewPairs(Beta3Error, ValueError):
    pass


class ZeroVariance(Beta3Error, ValueError):
    pass


class DegenerateAUC(Beta3Error, ValueError):
    """Only one class is present, so AUC is undefined."""


class UnsupportedCombination(Beta3Error, ValueError):
    pass


class FamilyMismatch(Beta3Error, ValueError):
    pass


class FormatError(Beta3Error, ValueError):
    """An input file does not follow the expected layout."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where = str(path)
            if line is not None:
                where += f":{line}"
                if column is not None:
                    where += f":{column}"
            where += ": "
        super().__init__(where + message)


class ParseError(FormatError):
    """A configuration file could not be parsed or validated."""


class NumericalFailure(Beta3Error, ArithmeticError):
    """A fit produced non-finite values."""
