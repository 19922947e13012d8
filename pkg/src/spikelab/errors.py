"""Exception taxonomy shared by all spikelab modules."""


class SpikelabError(Exception):
    """Base class for every error raised by spikelab."""


class SpecError(SpikelabError):
    """A model spec, measure, or config violates a documented invariant."""


class DomainError(SpikelabError):
    """An evaluation point sits outside a function's domain (atom, pole, wrong half-plane)."""


class ConvergenceError(SpikelabError):
    """A fixed-point solve exhausted its iteration budget.

    Carries the final residual, the iteration count, and (for grid
    evaluations) the index of the failing grid point.
    """

    def __init__(self, message, residual=None, iterations=None, grid_index=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.grid_index = grid_index


class NumericalError(SpikelabError):
    """A numeric routine produced output that fails its accuracy contract."""


class TheoryError(SpikelabError):
    """A requested verification is inconsistent with the computed theory."""


class DegenerateOutlierError(SpikelabError):
    """An outlier spike maps to the excluded degenerate location Z(1/theta)=0."""
