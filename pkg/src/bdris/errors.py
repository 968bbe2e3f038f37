"""Exception types raised across the simulator."""


class BdrisError(Exception):
    """Base class for all simulator errors."""


class DimensionMismatch(BdrisError):
    """Inputs are not dimensionally consistent."""


class DegenerateReference(BdrisError):
    """The reference user-RIS coefficient r_{1,1,1} is numerically zero."""


class ZeroChannel(BdrisError):
    """A cascaded channel has zero Frobenius norm; NMSE is undefined."""


class ScheduleRankFailure(BdrisError):
    """Schedule construction could not reach the required design rank."""


class InfeasibleAllocation(BdrisError):
    """Northwest-corner supply is smaller than the total demand."""


class InsufficientPhase2Length(BdrisError):
    """Requested phase-2 length is below the full-rank minimum."""


class RankDeficientPsi(BdrisError):
    """The phase-1 pilot/column matrix is rank deficient."""


class RankDeficientTheta1(BdrisError):
    """The phase-1 scaling-coefficient regressor is rank deficient."""


class RankDeficientTheta2(BdrisError):
    """The phase-2 scaling-coefficient regressor is rank deficient."""


class PhasePairingViolation(BdrisError):
    """Received record does not carry a paired phase-1 schedule."""


class SingularRegularizedMatrix(BdrisError):
    """LMMSE normal matrix is singular (only possible at zero noise)."""
