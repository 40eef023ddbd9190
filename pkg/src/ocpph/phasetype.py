"""Plain phase-type distributions and the Erlang structure.

A phase-type distribution with representation ``(alpha, T)`` is the law of
the absorption time of a continuous-time Markov chain with transient
sub-generator ``T`` started from ``alpha``.  Its reliability is
``alpha exp(T x) e`` and its density ``alpha exp(T x) t0`` with exit vector
``t0 = -T e``.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.special import logsumexp

from . import _shared
from .data import Dataset
from .errors import (
    DomainError,
    InvalidInputError,
    InvalidRepresentationError,
    SingularMatrixError,
)
from .linalg import erlang_log_row, expm, solve_complex_shifted, solve_real

__all__ = ["ErlangSpec", "PhaseType", "validate", "erlang_rep", "decay_rate"]


@dataclass(frozen=True)
class ErlangSpec:
    """Erlang distribution with `phases` sequential phases of common `rate`."""

    phases: int
    rate: float

    def __post_init__(self):
        if int(self.phases) != self.phases or self.phases < 1:
            raise InvalidInputError(f"phases must be a positive integer, got {self.phases!r}")
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise InvalidInputError(f"rate must be positive, got {self.rate!r}")
        object.__setattr__(self, "phases", int(self.phases))
        object.__setattr__(self, "rate", float(self.rate))

    @property
    def mean(self):
        return self.phases / self.rate


def erlang_matrix(n, lam):
    """Bidiagonal Erlang sub-generator: ``-lam`` on the diagonal, ``lam`` above it."""
    return -lam * np.eye(n) + lam * np.eye(n, k=1)


def decay_rate(T, erlang_rate=None):
    """Negated spectral abscissa of a sub-generator.

    Erlang blocks have the single eigenvalue ``-lam``; numerical eigenvalues of
    that defective matrix are inaccurate, so the rate is taken directly.
    """
    if erlang_rate is not None:
        return float(erlang_rate)
    return float(-np.max(np.linalg.eigvals(T).real))


class PhaseType:
    """Phase-type distribution with representation ``(alpha, T)``.

    Parameters
    ----------
    alpha : array_like, shape (n,)
        Initial probability vector; must sum to one.
    T : array_like, shape (n, n)
        Sub-generator: negative diagonal, nonnegative off-diagonal entries,
        nonpositive row sums and nonsingular.

    Raises
    ------
    InvalidRepresentationError
        Naming the first violated invariant.

    Notes
    -----
    Instances are immutable.  Representations built by :func:`erlang_rep`
    evaluate densities and reliabilities through the log-domain Erlang path
    instead of a dense matrix exponential.
    """

    def __init__(self, alpha, T, *, erlang=None):
        alpha = _shared.check_alpha(alpha)
        T, exit_vector = _shared.check_subgenerator(T)
        if alpha.size != T.shape[0]:
            raise InvalidRepresentationError(
                "order", f"alpha has length {alpha.size} but T has order {T.shape[0]}"
            )
        try:
            solve_real(T, np.ones(T.shape[0]))
        except SingularMatrixError as exc:
            raise InvalidRepresentationError("T-nonsingular", str(exc)) from None
        for arr in (alpha, T, exit_vector):
            arr.setflags(write=False)
        self.alpha = alpha
        self.T = T
        self.exit_vector = exit_vector
        self.erlang = erlang

    @classmethod
    def from_erlang(cls, spec):
        n, lam = spec.phases, spec.rate
        alpha = np.zeros(n)
        alpha[0] = 1.0
        return cls(alpha, erlang_matrix(n, lam), erlang=spec)

    @property
    def order(self):
        return self.alpha.size

    def __repr__(self):
        if self.erlang is not None:
            return f"PhaseType(erlang={self.erlang})"
        return f"PhaseType(order={self.order})"

    # -- evaluation core -------------------------------------------------

    def _logs(self, x):
        """Return (log density, log reliability) arrays at the times `x`."""
        if self.erlang is not None:
            n, lam = self.erlang.phases, self.erlang.rate
            rows = erlang_log_row(n, lam, x)
            return rows[..., n - 1] + np.log(lam), logsumexp(rows, axis=-1)
        flat = x.ravel()
        occupancy = np.array([self.alpha @ expm(self.T * xi) for xi in flat])
        occupancy = np.clip(occupancy, 0.0, None).reshape(x.shape + (self.order,))
        with np.errstate(divide="ignore"):
            return np.log(occupancy @ self.exit_vector), np.log(occupancy.sum(axis=-1))

    def logpdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(self._logs(x)[0], scalar)

    def pdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.exp(self._logs(x)[0]), scalar)

    def reliability(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.minimum(np.exp(self._logs(x)[1]), 1.0), scalar)

    def cdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(1.0 - np.minimum(np.exp(self._logs(x)[1]), 1.0), scalar)

    def log_reliability(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.minimum(self._logs(x)[1], 0.0), scalar)

    def hazard(self, x):
        x, scalar = _shared.as_times(x)
        logf, logr = self._logs(x)
        return _shared.unwrap(_shared.hazard_from_logs(logf, logr), scalar)

    def cum_hazard(self, x):
        x, scalar = _shared.as_times(x)
        logr = np.minimum(self._logs(x)[1], 0.0)
        return _shared.unwrap(_shared.cum_hazard_from_log(logr), scalar)

    def quantile(self, p):
        """Inverse cdf by bisection on the reliability."""
        return _shared.bisect_quantile(
            lambda v: float(self._logs(np.asarray(v))[1]), p, 0.0, self.mean()
        )

    # -- transforms and moments -----------------------------------------

    def char_fn(self, t):
        """Characteristic function ``-alpha (T + i t I)^{-1} t0``."""
        return complex(-self.alpha @ solve_complex_shifted(self.T, t, self.exit_vector))

    def mgf_bound(self):
        return decay_rate(self.T, None if self.erlang is None else self.erlang.rate)

    def mgf(self, t):
        """Moment-generating function; defined for ``t`` below :meth:`mgf_bound`."""
        t = float(t)
        if t >= self.mgf_bound():
            raise DomainError(f"mgf diverges for t >= {self.mgf_bound()!r}")
        shifted = self.T + t * np.eye(self.order)
        return float(-self.alpha @ solve_real(shifted, self.exit_vector))

    def moment(self, k):
        """Raw moment ``E[X^k] = (-1)^k k! alpha T^{-k} e``."""
        if int(k) != k or k < 1:
            raise InvalidInputError(f"moment order must be a positive integer, got {k!r}")
        v = np.ones(self.order)
        for _ in range(int(k)):
            v = solve_real(self.T, v)
        return float((-1) ** int(k) * factorial(int(k)) * (self.alpha @ v))

    def mean(self):
        return self.moment(1)

    def var(self):
        return self.moment(2) - self.moment(1) ** 2

    def sd(self):
        return float(np.sqrt(max(self.var(), 0.0)))

    # -- sampling --------------------------------------------------------

    def sample(self, count, seed):
        """Draw `count` absorption times by simulating the jump process."""
        if int(count) != count or count < 1:
            raise InvalidInputError(f"count must be a positive integer, got {count!r}")
        rng = np.random.default_rng(seed)
        times = _shared.simulate_absorption(
            self.alpha, self.T, self.exit_vector, self.T, self.exit_vector,
            np.inf, int(count), rng,
        )
        return Dataset(times)


def validate(alpha, T):
    """Build a :class:`PhaseType`, raising on the first violated invariant."""
    return PhaseType(alpha, T)


def erlang_rep(spec):
    """Expand an :class:`ErlangSpec` into its bidiagonal representation."""
    return PhaseType.from_erlang(spec)
