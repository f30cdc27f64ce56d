"""Exception hierarchy. The CLI maps ``DataError`` to exit code 2 and ``NumericError`` to 3."""


class AlignkitError(Exception):
    pass


class DataError(AlignkitError):
    """Bad input data: malformed files, out-of-range indices, inconsistent shapes."""


class ParseError(DataError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class AlignmentRangeError(DataError):
    pass


class ShapeError(DataError):
    pass


class UnprocessableSampleError(DataError):
    """A sample that preprocessing cannot repair; callers drop it."""


class DecompositionError(DataError):
    pass


class InvalidLabelsError(DataError):
    pass


class ConfigError(AlignkitError):
    pass


class NumericError(AlignkitError):
    """Non-finite losses or an assignment problem without a finite solution."""


class InfeasibleAssignmentError(NumericError):
    pass
