"""
Error types raised across twistorkit.

Everything derives from ValueError so callers that only care about
"bad input or bad geometry" can keep catching ValueError.
"""

from typing import Optional


class TwistorKitError(ValueError):
    """Base class for every domain failure in the toolkit"""


class ChartDomainError(TwistorKitError):
    """A point left the chart domain of a model manifold"""


class TransportError(TwistorKitError):
    """Parallel transport or geodesic integration could not proceed"""


class DegenerateImmersionError(TwistorKitError):
    """The coordinate tangent vectors of a surface are (nearly) dependent"""


class FrameCompletionError(TwistorKitError):
    """No reference order produced a usable normal pair"""


class NonOrthonormalFrameError(TwistorKitError):
    """A frame handed to the twistor layer is not oriented orthonormal"""


class FiberChartError(TwistorKitError):
    """A fiber point fell outside the chosen stereographic sub-chart"""


class FiberTangentError(TwistorKitError):
    """The fiber part dj of a tangent vector is not orthogonal to the fiber point j"""


class RankDeficientError(TwistorKitError):
    """A candidate chart of the twistor space is not immersed"""


class ConfigError(TwistorKitError):
    """A scenario configuration could not be read or validated"""


class _LocatedError(TwistorKitError):
    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ExpressionSyntaxError(_LocatedError):
    """Malformed formula text"""


class UnknownIdentifierError(_LocatedError):
    """A name in a formula is neither a variable nor a known function"""


class ExpressionDomainError(_LocatedError):
    """A formula has no finite value or derivative at a sample point"""
