"""Exception types raised across the package.

Everything derives from :class:`MultibeamError` so callers can catch the
whole family with one clause; the concrete classes name the violated
contract.
"""


class MultibeamError(Exception):
    pass


class NonHermitian(MultibeamError, ValueError):
    """Matrix expected to be Hermitian is not (beyond tolerance)."""


# some call sites historically use the alternate spelling
NotHermitian = NonHermitian


class ConvergenceFailure(MultibeamError, RuntimeError):
    """An iterative routine exhausted its iteration budget."""


class TraceNotOne(MultibeamError, ValueError):
    """Density matrix trace differs from 1 beyond tolerance."""


class NotPositive(MultibeamError, ValueError):
    """Matrix has an eigenvalue below the positivity tolerance."""


class DimensionMismatch(MultibeamError, ValueError):
    """Operands have incompatible dimensions."""


class OutOfRange(MultibeamError, ValueError):
    """Scalar argument outside its documented domain."""


class DomainError(MultibeamError, ValueError):
    """Function evaluated outside its domain of definition."""


class UnsupportedMoment(MultibeamError, ValueError):
    """Phase moment requested for an order that is not implemented."""


class IndexOutOfRange(MultibeamError, IndexError):
    """Beam index outside 0..n-1."""


class SameIndex(MultibeamError, ValueError):
    """Operation needs two distinct beam indices."""


class InvalidGram(MultibeamError, ValueError):
    """Overlap matrix is not a valid Gram matrix of unit vectors."""


class CountMismatch(MultibeamError, ValueError):
    """Detector state count differs from the beam count."""


class NotUnit(MultibeamError, ValueError):
    """Vector expected to have unit norm does not."""


class InvalidPovm(MultibeamError, ValueError):
    """Operator collection fails the POVM conditions."""


class TooLarge(MultibeamError, ValueError):
    """Joint system too large to densify."""


class WrongDimension(MultibeamError, ValueError):
    """Operation restricted to two-dimensional detector spaces."""


class WrongBeamCount(MultibeamError, ValueError):
    """Operation restricted to a specific number of beams."""


class InfeasibleStart(MultibeamError, RuntimeError):
    """Every optimizer restart was rejected as infeasible."""


class NotSymmetric(MultibeamError, ValueError):
    """POVM is not in mirror-paired form about the z axis."""


class TooFewPairs(MultibeamError, ValueError):
    """POVM reduction needs at least two mirror pairs."""


class NoRankOneForm(MultibeamError, ValueError):
    """POVM does not carry a rank-one (weight, direction) decomposition."""


class DegenerateFringeWarning(UserWarning):
    """Fringe pattern has vanishing total intensity; contrast set to 0."""
