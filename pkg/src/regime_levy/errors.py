"""Exception types shared across the toolkit.

The CLI maps these onto exit codes, so raising the right class matters:
bad user parameters are plain ``ValueError``, everything below is a
runtime condition of the data or the numerics.
"""


class RegimeLevyError(Exception):
    """Base class for toolkit-specific failures."""


class DataError(RegimeLevyError):
    """Input file cannot be parsed or violates a series invariant."""


class NumericalError(RegimeLevyError):
    """A numerical routine failed (underflow, divergence, mismatch)."""


class DegenerateRegimeError(RegimeLevyError):
    """A regime lost essentially all posterior weight during estimation."""


class UnderPopulatedRegimeError(RegimeLevyError):
    """A regime retained too few classified observations to fit."""


class InfeasibleMomentsError(RegimeLevyError):
    """Sample moments violate the NIG method-of-moments feasibility bound."""
