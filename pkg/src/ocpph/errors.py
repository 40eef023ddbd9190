"""Exception hierarchy shared by every module of the package."""

import numpy as np


class OcpphError(Exception):
    """Base class for all errors raised by ``ocpph``."""


class InvalidInputError(OcpphError, ValueError):
    """An argument is malformed (non-finite entries, wrong shape, ...)."""


class SingularMatrixError(OcpphError, np.linalg.LinAlgError):
    """A linear system is numerically singular."""


class InvalidRepresentationError(InvalidInputError):
    """A phase-type representation violates one of its invariants.

    The violated invariant is available as ``invariant``.
    """

    def __init__(self, invariant, message):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant


class DomainError(OcpphError, ValueError):
    """A measure was requested outside the domain where it is defined."""


class TailUnderflowError(DomainError):
    """The reliability underflows, so hazard quantities are not representable."""


class DegenerateDataError(OcpphError, ValueError):
    """The data carry no usable dispersion for the requested estimator."""


class UnfittableDataError(OcpphError, ValueError):
    """No admissible model could be fitted to the data."""


class InvalidStartError(OcpphError, ValueError):
    """The optimizer start point is infeasible or its objective is not finite."""


class BoundaryError(DomainError):
    """A fitted cdf evaluates to exactly 0 or 1 at an observation."""

    def __init__(self, index, value, message):
        super().__init__(message)
        self.index = index
        self.value = value


class UnreliableEstimateError(OcpphError, RuntimeError):
    """Too many bootstrap replicates failed to produce a fit."""

    def __init__(self, completed_fraction, message):
        super().__init__(message)
        self.completed_fraction = completed_fraction
