"""Exception hierarchy.

Validation problems (bad config, malformed files, out-of-domain inputs) derive
from :class:`ValidationError`; failures of the numerics themselves derive from
:class:`NumericalError`. The CLI maps these to exit codes 1 and 2.
"""


class ClothTrackError(Exception):
    pass


class ValidationError(ClothTrackError, ValueError):
    pass


class NumericalError(ClothTrackError, ArithmeticError):
    pass


class BehindCameraError(NumericalError):
    """A point sits at or behind the camera plane and cannot be projected."""


class SingularInnovationError(NumericalError):
    pass


class DivergenceError(NumericalError):
    """Non-finite values showed up in a simulation or Jacobian."""

    def __init__(self, message, frame=None, column=None):
        super().__init__(message)
        self.frame = frame
        self.column = column


class OutsideMeshError(ValidationError):
    def __init__(self, message, coord=None, feature_ids=()):
        super().__init__(message)
        self.coord = coord
        self.feature_ids = tuple(feature_ids)


class FormatError(ValidationError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line
