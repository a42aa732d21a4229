"""Exception hierarchy.

Every error carries a ``stage`` so the pipeline and CLI can map failures to
exit codes without inspecting concrete types.
"""


class StitchError(Exception):
    stage = "rendering"


# geometry
class DegenerateDepth(StitchError):
    """Homogeneous depth vanished (point on or past the horizon line)."""


class SingularMatrix(StitchError):
    pass


class OutOfRange(StitchError):
    """Abscissa outside the image of the cylindrical arctangent."""


# registration
class RegistrationError(StitchError):
    stage = "registration"


class TooFewMatches(RegistrationError):
    pass


class DegenerateSample(RegistrationError):
    pass


class NoConsensus(RegistrationError):
    pass


class DegenerateConfiguration(RegistrationError):
    pass


# parameter estimation
class ParameterError(StitchError):
    stage = "params"


class AmbiguousSide(ParameterError):
    pass


class VerticalLayout(ParameterError):
    """Displacement is predominantly vertical; only horizontal stitching is supported."""


class EmptyNonOverlap(ParameterError):
    pass


class InvalidBracket(ParameterError):
    pass


class ScaleTooSmall(ParameterError):
    pass


# compositing
class EmptyCanvas(StitchError):
    pass


class NoOverlap(StitchError):
    pass


class InvalidOverlap(StitchError):
    stage = "synthetic"


EXIT_CODES = {"io": 2, "registration": 3, "params": 4, "rendering": 5, "synthetic": 5}
