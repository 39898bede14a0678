"""Exception hierarchy shared by all modules."""


class EITError(Exception):
    """Base class for every error raised by eitqnd."""


class InvalidLabelError(EITError, ValueError):
    pass


class DimensionError(EITError, ValueError):
    pass


class CutoffError(EITError, ValueError):
    """Fock cutoff too small for the requested state."""


class InvalidParameterError(EITError, ValueError):
    pass


class DegenerateSteadyStateError(EITError):
    pass


class StiffnessError(EITError):
    """Adaptive step size underflowed."""


class NumericalFailure(EITError):
    """A physical invariant (trace, hermiticity, positivity) was violated."""


class UndefinedSusceptibilityError(EITError, ValueError):
    pass


class SeriesTooShortError(EITError, ValueError):
    pass


class DtTooLargeError(EITError, ValueError):
    pass


class CalibrationError(EITError):
    """S(n) is not strictly increasing, so photon numbers cannot be told apart."""


class ConfigError(EITError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
