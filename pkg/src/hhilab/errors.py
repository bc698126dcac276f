"""Exception types raised across the package."""


class HHILabError(Exception):
    """Base class for all package errors."""


class ModelError(HHILabError, ValueError):
    """Invalid model parameters (non-positive kappa, L, mass floor, bad lapse)."""


class GridMismatchError(HHILabError, ValueError):
    """Two objects were built on different grids."""


class LayoutError(HHILabError, ValueError):
    """A block operator was passed in the wrong layout."""


class SupportError(HHILabError, ValueError):
    """Test data violates a support requirement."""


class SpectralError(HHILabError, RuntimeError):
    """The eigen-solver failed or produced an invalid decomposition."""


class ConicSingularity(HHILabError):
    """The Euclidean cone at the bifurcation point does not close smoothly.

    Raised when ``kappa * beta`` differs from ``2*pi``; the total cone angle is
    kept on the instance.
    """

    def __init__(self, angle, kappa=None, beta=None):
        self.angle = float(angle)
        self.kappa = kappa
        self.beta = beta
        super().__init__(
            f"conic singularity at B: total angle kappa*beta = {self.angle!r} "
            f"(smooth extension needs 2*pi)"
        )


class BetaMismatch(HHILabError, ValueError):
    """beta is not the Hawking value where one is required."""


class ConfigError(HHILabError):
    """Configuration parse or validation failure.

    ``violations`` lists every problem found, as ``(key_path, message)`` pairs;
    ``line`` is set for syntax errors.
    """

    def __init__(self, violations, line=None):
        self.violations = list(violations)
        self.line = line
        lines = [f"{k}: {m}" for k, m in self.violations]
        head = f"line {line}: " if line is not None else ""
        super().__init__(head + "; ".join(lines))
