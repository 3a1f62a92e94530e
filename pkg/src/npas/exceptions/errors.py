import typing


class NpasException(Exception):


    def __init__(
        self,
        message: str,
        subject: typing.Optional[typing.Any] = None
    ):
        self.message = message
        self.subject = subject

        super().__init__(message if subject is None else f"{message} ({subject})")


class DimensionError(NpasException):
    pass


class ShapeError(DimensionError):
    pass


class ArgumentError(NpasException):
    pass


class ConfigError(NpasException):
    pass


class ParseError(ConfigError):
    pass


class MappingError(ConfigError):
    pass


class AllocationError(NpasException):
    pass


class ContractViolationError(NpasException):
    pass


class RunError(NpasException):


    def __init__(
        self,
        message: str,
        subject: typing.Optional[typing.Any] = None,
        step: typing.Optional[int] = None
    ):
        self.step = step

        super().__init__(message, subject)
