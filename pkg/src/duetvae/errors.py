"""Exception types shared across the package."""


class DuetError(Exception):
    """Base class for all package errors."""


class ParseError(DuetError, ValueError):
    def __init__(self, message, frame=None, field=None):
        self.frame = frame
        self.field = field
        where = []
        if frame is not None:
            where.append(f"frame {frame}")
        if field is not None:
            where.append(f"field '{field}'")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class DimensionError(DuetError, ValueError):
    pass


class NoDataError(DuetError, ValueError):
    pass


class UnrecoverableStartError(DuetError, ValueError):
    """Raised when a frame has fewer than two people and nothing to copy from."""


class NumericError(DuetError, ArithmeticError):
    pass


class StateError(DuetError, RuntimeError):
    pass
