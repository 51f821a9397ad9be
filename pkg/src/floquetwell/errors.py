"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A constructor or operation received out-of-contract parameters."""


class DomainError(ParameterError):
    """Grid/domain construction rejected (size, spacing, point count)."""


class SingularSeedError(ParameterError):
    """A seed function vanishes (or risks vanishing) on the working domain.

    Attributes
    ----------
    location : (x, t) pair of the offending minimum, when known.
    min_abs : the smallest |u| found.
    """

    def __init__(self, msg, location=None, min_abs=None):
        super().__init__(msg)
        self.location = location
        self.min_abs = min_abs


class ObservableError(ValueError):
    """An observable is undefined for the given field (e.g. zero norm)."""


class BlowupError(RuntimeError):
    """Propagation produced non-finite values or an unstable step.

    Carries ``step`` (index of the failing step) when raised mid-run.
    """

    def __init__(self, msg, step=None):
        super().__init__(msg)
        self.step = step


class EdgeLeakError(RuntimeError):
    """Probability reached the domain edges beyond the configured guard."""

    def __init__(self, msg, step=None, leak=None):
        super().__init__(msg)
        self.step = step
        self.leak = leak


class TruncationError(RuntimeError):
    """A truncated representation failed its residual target.

    Carries ``residual`` (achieved) and ``target``.
    """

    def __init__(self, msg, residual=None, target=None):
        super().__init__(msg)
        self.residual = residual
        self.target = target


class ConditioningError(RuntimeError):
    """A linear solve inside the channel solver is untrustworthy."""

    def __init__(self, msg, cond=None):
        super().__init__(msg)
        self.cond = cond


class AnalysisWindowError(ValueError):
    """Field analysis asked for before its preconditions hold
    (packet still inside the interaction region, bands unresolvable, ...)."""


class ConfigError(ValueError):
    """Experiment configuration file rejected (unknown key, bad value,
    inconsistent sections)."""
