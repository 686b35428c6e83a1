"""Exception hierarchy.  The CLI maps these onto exit codes."""


class HiggsHYMError(Exception):
    """Base class for all package errors."""


class GridMismatchError(HiggsHYMError, ValueError):
    """Arrays live on incompatible grids."""


class NotHermitianError(HiggsHYMError, ValueError):
    """A metric or endomorphism fails its Hermitian / positivity check."""


class ConfigError(HiggsHYMError, ValueError):
    """Malformed or inconsistent run configuration."""


class HypothesisError(HiggsHYMError):
    """A mathematical precondition fails; ``hypothesis`` names it."""

    def __init__(self, hypothesis: str, detail: str = ""):
        self.hypothesis = hypothesis
        self.detail = detail
        super().__init__(f"{hypothesis}: {detail}" if detail else hypothesis)


class NumericalError(HiggsHYMError):
    """Iteration broke down (non-finite values, step collapse, lost positivity)."""
