"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
error classes onto distinct process exit statuses.
"""


class ScaleDimError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    module = "scaledim"

    def __init__(self, message="", module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class InputError(ScaleDimError, ValueError):
    """Malformed input data (CSV problems, NaNs, too few points)."""

    exit_code = 3
    module = "cli_io"


class ParameterError(ScaleDimError, ValueError):
    """A numeric or categorical parameter outside its allowed range."""

    exit_code = 4
    module = "scaledim"


class DegenerateInputError(ScaleDimError, ValueError):
    """Geometry is degenerate: all points coincide, a single distinct distance, ..."""

    exit_code = 5
    module = "geometry_core"


class DegenerateAngleError(DegenerateInputError):
    """Angle undefined because the apex or every base vector is zero."""


class InsufficientPointsError(DegenerateInputError):
    """Fewer candidate neighbors than requested."""


class MissingNullError(ScaleDimError, LookupError):
    """A required null table is neither cached nor allowed to be generated."""

    exit_code = 6
    module = "null_reference"


class CacheIntegrityError(ScaleDimError):
    """A cache file exists but cannot be parsed or fails its checksum."""

    exit_code = 7
    module = "null_reference"

    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"corrupt null cache file {path}: {reason}")


class NumericEscapeError(ScaleDimError, ArithmeticError):
    """An iterated map left its bounded region."""

    exit_code = 8
    module = "synthetic_data"
