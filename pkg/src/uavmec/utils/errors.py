# src/uavmec/utils/errors.py


class UavMecError(Exception):
    """Base class for all errors raised by the simulator."""


class ConfigError(UavMecError):
    def __init__(self, field: str, message: str):
        """
        Invalid or unparsable configuration.

        :param field: The offending configuration key
        :param message: What is wrong with it
        """
        super().__init__(f"{field}: {message}")
        self.field = field


class InfeasibleError(UavMecError):
    """A task cannot meet its deadline at the requested server or power cap."""


class ConvergenceError(UavMecError):
    """The joint optimizer observed an objective increase between iterations."""
