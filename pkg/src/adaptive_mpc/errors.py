"""Exception hierarchy."""


class AdaptiveMPCError(Exception):
    """Base class for library errors."""


class EmptySetError(AdaptiveMPCError):
    pass


class UnboundedError(AdaptiveMPCError):
    pass


class DimUnsupportedError(AdaptiveMPCError):
    pass


class NumericalFailure(AdaptiveMPCError):
    pass


class InfeasibleError(AdaptiveMPCError):
    pass


class NoConvergence(AdaptiveMPCError):
    pass


class DimensionMismatch(AdaptiveMPCError, ValueError):
    pass


class EmptySetAfterUpdate(AdaptiveMPCError):
    """The parameter set became empty: noise or rate assumptions were violated."""


class EmptyTerminalSet(AdaptiveMPCError):
    pass


class InfeasibleStep(AdaptiveMPCError):
    """The MPC program had no solution at a closed-loop step."""

    def __init__(self, message, t=None, status=None):
        super().__init__(message)
        self.t = t
        self.status = status


class UnsupportedModel(AdaptiveMPCError):
    pass


class InvalidOffsetSchedule(AdaptiveMPCError, ValueError):
    pass


class SeedMismatch(AdaptiveMPCError):
    pass


class ArtifactMismatch(AdaptiveMPCError):
    pass


class ParseError(AdaptiveMPCError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(AdaptiveMPCError, ValueError):
    """Carries every violated invariant, each tagged with its field path."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = "\n".join(f"  {path}: {msg}" for path, msg in self.problems)
        super().__init__(f"invalid configuration:\n{lines}")
