import logging

logger = logging.getLogger(__name__)


class FqessException(Exception):
    pass


class HamiltonianError(FqessException):
    pass


class DimensionError(FqessException):
    pass


class ConfigError(FqessException):
    pass


class KernelError(FqessException):
    """
    The postselected branch vanished: the state lies in the kernel of the applied operator.
    """

    def __init__(self, message: str, probability: float = 0.0) -> None:
        super().__init__(message)
        self.probability = probability


class StagnationError(FqessException):
    pass


class ShotStarvationError(FqessException):

    def __init__(self, message: str, shots: int = 0) -> None:
        super().__init__(message)
        self.shots = shots
