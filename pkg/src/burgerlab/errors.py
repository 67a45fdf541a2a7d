"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """A configuration file or experiment descriptor is invalid."""


class IntegrationError(RuntimeError):
    """A trajectory left the finite range (blow-up).

    Carries the first time at which a non-finite coefficient appeared and the
    last finite state, when one is available.
    """

    def __init__(self, message, time=None, last_state=None):
        super().__init__(message)
        self.time = time
        self.last_state = last_state
