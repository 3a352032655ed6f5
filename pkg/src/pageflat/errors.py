"""Exception types shared across the pipeline stages."""


class PageflatError(Exception):
    """Base class for every error raised by pageflat."""


class DegenerateHistogramError(PageflatError):
    pass


class NoQuadrilateralError(PageflatError):
    pass


class LandmarkError(PageflatError):
    pass


class DegenerateAbscissaeError(PageflatError):
    pass


class MeshFoldError(PageflatError):
    def __init__(self, i, j, message="mesh fold"):
        super().__init__(f"{message} at column {i}, row {j}")
        self.i = i
        self.j = j


class DegenerateCorrespondenceError(PageflatError):
    pass


class NoHomographyError(PageflatError):
    pass


class TileMismatchError(PageflatError):
    def __init__(self, k, reason):
        super().__init__(f"tile mismatch for block {k}: {reason}")
        self.k = k


class InvalidCameraError(PageflatError):
    pass


class StageError(PageflatError):
    """Wraps a failure with the pipeline stage it came from."""

    def __init__(self, stage, cause, hint=""):
        msg = f"[{stage}] {cause}"
        if hint:
            msg += f" (hint: {hint})"
        super().__init__(msg)
        self.stage = stage
        self.cause = cause
        self.hint = hint
