"""Exception types raised across the package."""


class ConsensusError(Exception):
    """Base class for every error raised by avgcons."""


class IndexOutOfRange(ConsensusError, IndexError):
    pass


class DuplicateEdge(ConsensusError, ValueError):
    pass


class ZeroDegreeNode(ConsensusError, ValueError):
    pass


class Disconnected(ConsensusError, ValueError):
    pass


class SizeMismatch(ConsensusError, ValueError):
    pass


class DefectiveMatrix(ConsensusError, ValueError):
    """Raised when an eigendecomposition fails the reconstruction gate."""


class NoConvergence(ConsensusError, RuntimeError):
    pass


class RankDeficient(ConsensusError, ValueError):
    pass


class SingularPivot(ConsensusError, ValueError):
    pass


class NotLaplacianSpectrum(ConsensusError, ValueError):
    pass


class ZeroEigenvalueStep(ConsensusError, ValueError):
    pass


class ZeroEigenvectorEntry(ConsensusError, ValueError):
    pass


class DegenerateNormalizer(ConsensusError, ValueError):
    pass


class TiedDominantEigenvalues(ConsensusError, ValueError):
    pass


class DivisionByZeroEigenvalue(ConsensusError, ZeroDivisionError):
    pass


class ImaginaryResidue(ConsensusError, ValueError):
    pass


class EmptyColumn(ConsensusError, ValueError):
    """A factor column has no neighbour below the diagonal (bad ordering)."""


class WrongWeighting(ConsensusError, ValueError):
    pass


class NotStrictlyLowerTriangular(ConsensusError, ValueError):
    pass


class ParseError(ConsensusError, ValueError):
    """Malformed graph file. Carries the 1-based line and column."""

    def __init__(self, message, line, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = f"line {line}" if column is None else f"line {line}, column {column}"
        if path is not None:
            where = f"{path}: {where}"
        super().__init__(f"{where}: {message}")
