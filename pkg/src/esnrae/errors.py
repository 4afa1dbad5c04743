"""Exception types shared across the package.

The CLI maps these onto stable exit codes: FormatError -> 2,
NumericalError (and subclasses) -> 3.
"""


class FormatError(ValueError):
    """A data file does not conform to the expected text format."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (SVD non-convergence, degenerate input)."""


class DegenerateMatrixError(NumericalError):
    """A matrix is unusable for the requested operation (e.g. zero spectral radius)."""


class TrainingError(NumericalError):
    """Autoencoder training could not produce a usable network."""
