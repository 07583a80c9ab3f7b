"""
Error taxonomy for the engine

Every error carries a short code token so command-line callers can grep for
it. Model errors map to exit status 1, usage errors to exit status 2.
"""


class EngineError(Exception):
    """Base class for all engine errors"""

    code = "E_ENGINE"

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return f"[{self.code}] {self.message}"


class ProgramSyntaxError(EngineError, ValueError):
    """Malformed program, observation, parameter or goal text"""

    code = "E_SYNTAX"

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = f"{message} at line {line}, column {column}"
        super().__init__(message)
        self.line = line
        self.column = column


class DeclarationError(EngineError, ValueError):
    """Invalid values/table declaration or parameter row"""

    code = "E_DECL"


class ModelError(EngineError):
    """The program or its data violates a modeling condition"""

    code = "E_MODEL"


class UndefinedPredicateError(ModelError):
    code = "E_UNDEFINED"


class UnknownSwitchError(ModelError):
    code = "E_SWITCH"


class InstantiationError(ModelError):
    """A built-in or switch call received an unbound argument"""

    code = "E_INSTANTIATION"


class EvaluationError(ModelError):
    """Arithmetic on non-numbers or division by zero"""

    code = "E_EVAL"


class NonGroundTableCallError(ModelError):
    code = "E_NONGROUND_TABLE"


class CycleError(ModelError):
    """Acyclic-support condition violated among table atoms"""

    code = "E_CYCLE"

    def __init__(self, message, witness=()):
        super().__init__(message)
        self.witness = tuple(witness)


class ZeroProbabilityError(ModelError):
    code = "E_ZERO_PROB"


class NumericDegeneracyError(ModelError):
    code = "E_NUMERIC"


class UniquenessViolationError(ModelError):
    """A sampling run failed after switch draws were made"""

    code = "E_UNIQUENESS"


class EmptySupportError(ModelError):
    code = "E_EMPTY_SUPPORT"


class ResourceLimitError(EngineError):
    """Depth bound or enumeration cap exceeded"""

    code = "E_RESOURCE"


class UsageError(EngineError):
    code = "E_USAGE"
