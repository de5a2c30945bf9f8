"""Exception hierarchy shared by all tracker modules."""


class TrackingError(Exception):
    """Base class for all errors raised by groupmot."""


class CovarianceNotPSD(TrackingError):
    """Cholesky factorisation failed even after jitter; the filter blew up."""


class SingularInnovation(TrackingError):
    """The innovation covariance could not be inverted."""


class FrameOrderError(TrackingError):
    """Frames were fed to the tracker out of order."""


class ZeroVelocity(TrackingError):
    """A velocity used for a cosine similarity was (numerically) zero."""


class MissingHistory(TrackingError):
    """A track lacks the previous-frame record needed for compensation."""


class WindowTooShort(TrackingError):
    """Fewer consecutive history frames than the predictor consumes."""


class DivergedLoss(TrackingError):
    """Training loss became NaN or infinite."""


class ZeroGT(TrackingError):
    """MOTA is undefined without ground-truth boxes."""


class NoMatches(TrackingError):
    """MOTP is undefined without matched boxes."""


class ParseError(TrackingError):
    """A MOT text file or config file could not be parsed."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(TrackingError):
    """Invalid or inconsistent configuration values."""
