"""Exception hierarchy.

The CLI maps these onto exit codes: usage/schema problems exit 2,
data and numeric problems exit 3, aborted training exits 4.
"""


class Bp6Error(Exception):
    exit_code = 1


class InvalidArgumentError(Bp6Error, ValueError):
    exit_code = 2


class ConfigError(Bp6Error, ValueError):
    exit_code = 2


class SchemaError(Bp6Error, ValueError):
    exit_code = 2


class ParseError(Bp6Error, ValueError):
    exit_code = 2


class ContractError(Bp6Error, ValueError):
    exit_code = 2


class ShapeError(Bp6Error, ValueError):
    exit_code = 2


class DataError(Bp6Error, ValueError):
    exit_code = 3


class PlausibilityError(DataError):
    pass


class NumericFailure(Bp6Error, ArithmeticError):
    exit_code = 3


class FormatError(Bp6Error, ValueError):
    exit_code = 3


class CorruptStoreError(FormatError):
    pass


class TrainingAborted(Bp6Error, RuntimeError):
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
