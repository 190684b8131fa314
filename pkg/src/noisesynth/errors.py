"""Exception types shared across the package.

The CLI maps these onto its exit-code contract: data/parse problems are
exit 2, numerical/degenerate-fit problems are exit 3.
"""


class NoiseSynthError(Exception):
    """Base class for all package-specific errors."""


class PtbParseError(NoiseSynthError):
    """A tensor file does not conform to the PTB format."""


class ShapeMismatchError(NoiseSynthError, ValueError):
    """Two operands that must share a (C, H, W) shape do not."""


class SymmetryViolationError(NoiseSynthError):
    """An inverse transform was asked to realize a non-Hermitian spectrum."""


class InsufficientDataError(NoiseSynthError):
    """Too few usable samples/groups remain to run an estimation."""


class DegenerateFitError(NoiseSynthError):
    """A regression produced a physically meaningless result (e.g. gain <= 0)."""


class DegenerateInputError(NoiseSynthError):
    """Input carries no usable variation (e.g. every row constant)."""
