"""Exception hierarchy shared across the package."""


class ConsensusError(Exception):
    """Base class for every domain failure raised by ntcons."""


class InvalidInput(ConsensusError, ValueError):
    pass


class NotPositiveDefinite(ConsensusError):
    pass


class Singular(ConsensusError):
    pass


class HurwitzInconclusive(Singular):
    """The Lyapunov operator is singular, so no certificate can be produced."""


class InvalidGraph(ConsensusError, ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class OmegaSumNotPD(ConsensusError):
    def __init__(self, agent, message=None):
        self.agent = agent
        super().__init__(
            message
            or f"agent {agent}: summed negative in-weights are not positive definite"
        )


class EmptyV1WithAntagonism(ConsensusError):
    pass


class DecompositionNotFound(ConsensusError):
    pass


class TooLarge(ConsensusError):
    pass


class NumericalBlowup(ConsensusError):
    def __init__(self, message, path=None, time=None):
        self.path = path
        self.time = time
        super().__init__(message)


class ParseError(ConsensusError, ValueError):
    """Malformed input file; the message carries the file, line or field."""
