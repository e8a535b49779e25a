"""Exception types raised by the package.

Every error carries a short machine-readable ``code`` (e.g. ``"not-well-posed"``)
so that the CLI and tests can match on it without parsing messages.
"""


class ImpiqcError(Exception):
    code = "error"

    def __init__(self, message=None, code=None):
        if code is not None:
            self.code = code
        super().__init__(message or self.code)


class DimensionError(ImpiqcError, ValueError):
    code = "dimension-mismatch"


class SchurPivotError(ImpiqcError, ValueError):
    code = "schur-pivot-singular"


class NotWellPosedError(ImpiqcError, ValueError):
    code = "not-well-posed"


class DwellSpecError(ImpiqcError, ValueError):
    code = "invalid-dwell-spec"


class SolverError(ImpiqcError, RuntimeError):
    code = "solver-error"


class ReconstructionError(ImpiqcError, RuntimeError):
    code = "reconstruction-failed"


class SystemFileError(ImpiqcError, ValueError):
    code = "bad-system-file"
