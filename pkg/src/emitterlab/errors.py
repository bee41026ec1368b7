"""Exception hierarchy. CLI exit codes hang off these classes."""


class EmitterLabError(Exception):
    exit_code = 1


class DomainError(EmitterLabError, ValueError):
    """Argument outside the physical domain (non-positive lifetime etc.)."""
    exit_code = 2


class StabilityError(EmitterLabError, ValueError):
    exit_code = 2


class FormatError(EmitterLabError):
    """Malformed input file. `line` is 1-based when known."""
    exit_code = 3

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}: "
        if line is not None:
            where += f"line {line}: "
        super().__init__(where + message)


class ConfigError(FormatError):
    pass


class DegenerateFitError(EmitterLabError):
    exit_code = 4


class ConvergenceError(EmitterLabError):
    exit_code = 4

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}


class InfeasibleError(EmitterLabError):
    """Analysis cannot proceed, e.g. measured width not above the IRF."""
    exit_code = 5


class ResolutionError(InfeasibleError):
    pass


class PropagationError(EmitterLabError):
    exit_code = 5

    def __init__(self, message, failures=0):
        super().__init__(message)
        self.failures = failures
