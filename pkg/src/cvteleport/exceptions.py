"""Exception hierarchy shared by all modules."""


class CVTeleportError(Exception):
    """Base class for package errors."""


class ContractViolation(CVTeleportError, ValueError):
    """Inputs do not satisfy an operation's preconditions (shapes, symmetry, ranges)."""


class InvariantViolation(CVTeleportError, ValueError):
    """A configuration breaks a modelling invariant, e.g. the slice length is too coarse."""


class SingularConfiguration(CVTeleportError, ArithmeticError):
    """A decomposition hit a degenerate (zero-norm or rank-deficient) input."""


class UnphysicalState(CVTeleportError, ValueError):
    """A covariance matrix violates the uncertainty relation."""
