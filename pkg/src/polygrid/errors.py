"""Exception types raised by the polygrid analyses."""


class PolygridError(Exception):
    """Base class for all polygrid errors."""


class SingularMatrixError(PolygridError):
    """LU factorization hit a pivot below the relative singularity threshold."""


class SingularBlockError(PolygridError):
    """The block to be eliminated in a Schur complement is singular."""


class DisconnectedGraphError(PolygridError):
    """The branch graph is not weakly connected."""


class NonSymmetricParameterError(PolygridError):
    """A compound branch or shunt matrix is not symmetric."""


class SingularBranchImpedanceError(PolygridError):
    """A compound branch impedance matrix is not invertible."""


class SingularInteriorBlockError(PolygridError):
    """The interior (eliminated) admittance block is singular."""


class PreconditionViolatedError(PolygridError):
    """A reduction precondition (connectivity, Re{Z} > 0, roles) does not hold."""


class SingularJacobianError(PolygridError):
    """The power-flow Jacobian is singular at the current iterate."""


class RankDeficientError(PolygridError):
    """The measurement matrix does not have full column rank."""


class SingularGainError(PolygridError):
    """The weighted-least-squares gain matrix cannot be factorized."""


class SingularAugmentedJacobianError(PolygridError):
    """The bordered continuation system is singular for the current index."""


class CorrectorFailedError(PolygridError):
    """The continuation corrector failed after exhausting step halvings."""


class InputFormatError(PolygridError):
    """A grid, device, line-configuration, or profile file is malformed."""
