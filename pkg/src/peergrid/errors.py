"""Exception and warning types shared across the package.

Each error carries the CLI exit code it maps to, so the command-line layer
can translate failures without a lookup table of its own.
"""


class PeerGridError(Exception):
    exit_code = 2


class SingularMatrix(PeerGridError):
    pass


class NotSymmetric(PeerGridError):
    exit_code = 4


class InvalidSize(PeerGridError):
    pass


class InvalidNetwork(PeerGridError):
    pass


class AlphaOutOfRange(PeerGridError):
    pass


class AssumptionViolated(PeerGridError):
    """Raised when ``a_i > p_i`` or ``b_i > gamma_i`` fails for some user.

    ``index`` is the 0-based offending user, or None when the failure is not
    tied to a single user.
    """

    exit_code = 3

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NoConvergence(PeerGridError):
    pass


class PremiseNotMet(PeerGridError):
    pass


class NotConnected(PeerGridError):
    pass


class GammaNotScalar(PeerGridError):
    pass


class NegativeBound(PeerGridError):
    pass


class TooLarge(PeerGridError):
    exit_code = 5


class UndefinedMetric(PeerGridError):
    pass


class ConfigInvalid(PeerGridError):
    exit_code = 6

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class NegativePrice(UserWarning):
    """An unconstrained optimal price came out negative."""
