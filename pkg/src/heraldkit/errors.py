"""Exception types shared across the package."""


class HeraldkitError(Exception):
    """Base class for all package errors."""


class DomainError(HeraldkitError):
    """A parameter is outside the domain where the object is defined."""


class TruncationInsufficientError(HeraldkitError):
    """The Fock-space cutoff cannot represent a state or operation faithfully."""


class HeraldImprobableError(HeraldkitError):
    """The heralding outcome has probability below the configured floor."""

    def __init__(self, probability, floor):
        super().__init__(
            f"herald probability {probability:.3e} is below the floor {floor:.3e}"
        )
        self.probability = probability
        self.floor = floor


class TrainingDivergedError(HeraldkitError):
    """Classifier training produced a non-finite loss."""

    def __init__(self, step):
        super().__init__(f"non-finite loss at optimisation step {step}")
        self.step = step


class ConfigError(HeraldkitError):
    """A configuration file or value is invalid."""
