"""Exception and warning types raised by the library."""


class NFMMSEError(Exception):
    """Base class for all library errors."""


class DegeneratePoint(NFMMSEError, ValueError):
    """A source point coincides with an array element."""


class InvalidRegion(NFMMSEError, ValueError):
    """Integration region leaves the valid distance/angle domain."""


class EigFailure(NFMMSEError, RuntimeError):
    """The Hermitian eigensolver did not converge."""


class FullRankModel(NFMMSEError, ValueError):
    """A correlation model has no noise subspace."""


class SingularCovariance(NFMMSEError, RuntimeError):
    """Sample covariance could not be inverted even after regularization."""


class ZeroTruthPower(NFMMSEError, ValueError):
    """NMSE requested against all-zero reference channels."""


class NonOrthonormalInput(NFMMSEError, ValueError):
    """Basis matrix columns are not orthonormal."""


class ConfigError(NFMMSEError, ValueError):
    """Invalid or incomplete experiment configuration.

    ``key`` names the offending ``section.key`` entry when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class QuadratureUnderresolved(UserWarning):
    """Doubling quadrature nodes changed a correlation matrix noticeably."""
