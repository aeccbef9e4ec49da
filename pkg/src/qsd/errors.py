"""Exception hierarchy shared by every qsd module."""


class QSDError(Exception):
    """Base class for all errors raised by qsd."""


class ArgumentError(QSDError, ValueError):
    pass


class DimensionError(ArgumentError):
    pass


class HermiticityError(ArgumentError):
    pass


class ChannelCountError(ArgumentError):
    pass


class ConfigError(ArgumentError):
    pass


class NumericalError(QSDError, ArithmeticError):
    pass


class NonFiniteError(NumericalError):
    """A state amplitude became inf/nan; usually dt is too large."""

    def __init__(self, message: str, step: int | None = None, trajectory: int | None = None):
        super().__init__(message)
        self.step = step
        self.trajectory = trajectory


class UndecidedError(NumericalError):
    """Too many trajectories reached t_max without a collapse verdict."""


class InsufficientDataError(QSDError):
    pass


class GridMismatchError(QSDError):
    pass


class ParseError(QSDError):
    def __init__(self, message: str, context: str | None = None):
        super().__init__(f"{context}: {message}" if context else message)
        self.context = context


class ValidationError(QSDError):
    """Collects every violated bound of a run configuration."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)
