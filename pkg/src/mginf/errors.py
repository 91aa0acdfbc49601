"""Exception types raised by the mginf package."""


class MGInfError(Exception):
    """Base class for all package errors."""


class ParameterError(MGInfError, ValueError):
    """A service-law parameter violates its admissible range."""


class NonPositiveLambda(ParameterError):
    pass


class NonPositiveRho(ParameterError):
    pass


class POutOfRange(ParameterError):
    pass


class BetaBelowMinusLambda(ParameterError):
    pass


class BetaAboveMax(ParameterError):
    def __init__(self, beta: float, beta_max: float):
        self.beta = beta
        self.beta_max = beta_max
        super().__init__(f"beta exceeds beta_max={beta_max:.6f} (beta={beta!r})")


class BetaInadmissible(ParameterError):
    def __init__(self, rho: float, reason: str):
        self.rho = rho
        super().__init__(f"beta inadmissible for rho={rho!r}: {reason}")


class DegenerateParameter(MGInfError, ValueError):
    """Operation undefined at beta = -lambda (service time is identically 0)."""


class UOutOfRange(MGInfError, ValueError):
    pass


class SeriesDiverges(MGInfError, ValueError):
    pass


class RhoTooLarge(MGInfError, ValueError):
    pass


class IndistinctSolutions(MGInfError, ValueError):
    pass


class InsufficientSamples(MGInfError, ValueError):
    pass
