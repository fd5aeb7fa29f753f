"""Exception hierarchy shared by all modules."""


class MixlabError(Exception):
    """Base class for errors raised by mixlab."""


class DimensionError(MixlabError, ValueError):
    """Inputs live on mismatched index sets."""


class ConstructionError(MixlabError, ValueError):
    """A graph or chain could not be built from the given parameters."""


class SizeCapError(MixlabError):
    """A state space would exceed the configured size cap."""


class ConvergenceError(MixlabError, RuntimeError):
    """An iterative scan did not reach its target before the step cap."""


class UnsupportedError(MixlabError, NotImplementedError):
    """The requested computation is not available for this input."""


class HorizonError(MixlabError, RuntimeError):
    """A search ran past the truncation horizon it was allowed to use."""


class ClaimViolationError(MixlabError, AssertionError):
    """A constructive claim produced no admissible witness."""
