"""Exception hierarchy.

Every error carries a short ``category`` string; the CLI prints it on stderr
and maps it to a process exit code.
"""


class VCSketchError(Exception):
    category = "error"
    exit_code = 1


class InvalidCompressionSize(VCSketchError, ValueError):
    category = "compression-size"
    exit_code = 3


class ShapeError(VCSketchError, ValueError):
    category = "shape"
    exit_code = 4


class DomainError(VCSketchError, ValueError):
    category = "domain"
    exit_code = 5

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class InvalidOrder(VCSketchError, ValueError):
    category = "basis-order"
    exit_code = 4


class InvalidState(VCSketchError, ValueError):
    category = "invalid-state"
    exit_code = 6


class NumericError(VCSketchError, ArithmeticError):
    category = "numeric"
    exit_code = 7


class DecompositionError(NumericError):
    category = "decomposition"
    exit_code = 7


class DegenerateChainError(VCSketchError, ValueError):
    category = "degenerate-chain"
    exit_code = 8


class InvalidInterval(VCSketchError, ValueError):
    category = "invalid-interval"
    exit_code = 4


class SizeError(VCSketchError, ValueError):
    category = "size"
    exit_code = 9


class ConfigError(VCSketchError, ValueError):
    category = "config"
    exit_code = 2

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line


class IngestionError(VCSketchError, ValueError):
    category = "ingestion"
    exit_code = 10

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
