"""Exception types raised across the package."""


class ImpossibleOutcomeError(RuntimeError):
    """A post-selection branch has (numerically) zero probability."""


class UnrealizableSpecError(ValueError):
    """A monomial group cannot be produced by a single set of permutation gates."""


class NothingToEncodeError(ValueError):
    """The matrix handed to the block encoder is identically zero."""


class RegisterWidthError(ValueError):
    """The requested dense simulation needs more qubits than is feasible."""
