"""Exception hierarchy shared by all warpflow modules."""


class WarpflowError(Exception):
    """Base class for every error raised by this package."""


class BoundaryStencilError(WarpflowError, IndexError):
    """A central stencil was requested too close to the grid boundary."""


class NumericError(WarpflowError, FloatingPointError):
    """Non-finite values were produced or supplied."""


class SingularStateError(WarpflowError, ValueError):
    """A warping function is non-positive, so the metric is degenerate."""


class DomainError(WarpflowError, ValueError):
    """A function was evaluated outside the set where it is defined."""


class ClassError(WarpflowError, ValueError):
    """A control function is not in the admissible class."""


class ParameterError(WarpflowError, ValueError):
    """An example or experiment parameter is out of range."""


class SingularityImminent(WarpflowError):
    """Step rejection drove the time step below its floor."""


class FeasibilityError(WarpflowError, ValueError):
    """The truncated domain cannot realise a requested blowup sequence."""


class InconclusiveError(WarpflowError):
    """Not enough data to form a numeric limit."""


class AlignmentError(WarpflowError, ValueError):
    """Frames passed together do not share a grid or a uniform time step."""


class TruncationError(WarpflowError, ValueError):
    """A rescaling window reaches past the computational domain."""


class ConfigError(WarpflowError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending path."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class SchemaError(WarpflowError, ValueError):
    """Artifact trees with incompatible schema versions were compared."""
