"""Exception hierarchy. Every error carries the CLI exit code it maps to."""


class SurfregError(Exception):
    exit_code = 6


class UsageError(SurfregError):
    exit_code = 2


class CloudIOError(SurfregError):
    exit_code = 3


class ParseError(SurfregError):
    exit_code = 4

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}" if where else message)


class NonFiniteCoordinateError(ParseError):
    pass


class DegenerateInputError(SurfregError):
    exit_code = 5


class EmptyCloudError(DegenerateInputError):
    pass


class DegenerateCloudError(DegenerateInputError):
    pass


class TooFewPairsError(DegenerateInputError):
    pass


class DegenerateConfigurationError(DegenerateInputError):
    pass


class EmptyPopulationError(DegenerateInputError):
    pass


class InvariantViolation(SurfregError):
    exit_code = 6
