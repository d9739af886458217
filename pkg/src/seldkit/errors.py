"""Exception hierarchy shared by all seldkit modules."""


class SeldError(Exception):
    """Base class for every error raised by seldkit."""


class DomainError(SeldError, ValueError):
    """An argument lies outside the domain of the operation."""


class FormatError(SeldError):
    """A file does not follow the expected container format."""


class ParseError(FormatError):
    """A text file could not be parsed; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class DataError(SeldError):
    """Inputs are well-formed but semantically inconsistent."""


class TrainingError(SeldError):
    """Numeric failure during training (e.g. the loss became NaN)."""

    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message)
