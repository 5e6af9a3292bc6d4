"""Exception hierarchy shared by the sanitizers and the command-line front end."""


class PrivacyToolkitError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(PrivacyToolkitError, ValueError):
    """A numeric parameter is out of its admissible range (non-positive scale, NaN, ...)."""


class InvalidInputError(PrivacyToolkitError, ValueError):
    """Input data is malformed: wrong length, non-finite coordinates, bad CSV rows."""


class ContractError(PrivacyToolkitError, ValueError):
    """A documented precondition between objects is violated (mixed budget kinds, K < 2, ...)."""


class StateError(PrivacyToolkitError, RuntimeError):
    """An operation was called before the state it depends on was populated."""


class SingularDesignError(PrivacyToolkitError, ValueError):
    """The regression design matrix is rank deficient."""
