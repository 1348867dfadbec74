"""Exception types shared across the package."""

from __future__ import annotations


class PairEloError(Exception):
    """Base class for all package errors."""


class ConfigError(PairEloError):
    """Invalid study or corpus configuration.

    Carries the full list of validation messages in ``errors``.
    """

    def __init__(self, errors: list[str] | str):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = errors
        super().__init__("; ".join(errors))


class UnknownMethodError(PairEloError):
    pass


class UnknownRaterError(PairEloError):
    pass


class UnknownQuestionError(PairEloError):
    pass


class DuplicateAnswerError(PairEloError):
    pass


class BlockedRaterError(PairEloError):
    pass


class OutstandingQuestionError(PairEloError):
    """The rater already holds an unanswered question within its lease."""


class ReplayError(PairEloError):
    """The event log contradicts the study config or itself."""


class UnknownTokenError(PairEloError):
    """A variant token that no issued question produced."""


class FitUnavailableError(PairEloError):
    """Results were requested before any data-driven fit exists."""


class NoEligibleImageError(PairEloError):
    pass


class FitConvergenceError(PairEloError):
    """Optimizer failed to reach the gradient tolerance."""

    def __init__(self, message: str, grad_norm: float, n_iter: int):
        self.grad_norm = grad_norm
        self.n_iter = n_iter
        super().__init__(message)


class SingularCurvatureError(PairEloError):
    """Posterior curvature is singular; ``methods`` names the unconstrained ones."""

    def __init__(self, message: str, methods: list[str]):
        self.methods = methods
        super().__init__(message)


class NonMonotoneLadderError(PairEloError):
    """Selected (elo, bpp) points do not form a monotone ladder."""

    def __init__(self, message: str, offending_pair: tuple[str, str] | None = None):
        self.offending_pair = offending_pair
        super().__init__(message)


class OutOfRangeError(PairEloError):
    """Interpolation query outside the ladder's span (no extrapolation)."""


class MappingError(PairEloError):
    """Ratings column mapping does not fit the input file."""


class IncompleteManifestError(PairEloError):
    """Corpus manifest is missing (image, method) entries."""

    def __init__(self, message: str, missing: list[tuple[str, str]]):
        self.missing = missing
        super().__init__(message)


class CapabilityError(PairEloError):
    """A required external tool is unavailable on this host."""


class CommandError(PairEloError):
    """An external command exited nonzero; captured output attached."""

    def __init__(self, message: str, returncode: int = -1, output: str = ""):
        self.returncode = returncode
        self.output = output
        super().__init__(message)
