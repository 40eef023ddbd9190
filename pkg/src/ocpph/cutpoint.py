"""One cut-point phase-type distributions.

The absorbing chain runs with sub-generator ``T1`` on ``[0, a]`` and with
``T2`` afterwards, keeping the occupied phase at the switch.  For ``x <= a``
every measure is that of ``PH(alpha, T1)``; beyond the cut the chain restarts
from the occupancy vector ``v = alpha exp(T1 a)``:

    f(x) = v exp(T2 (x - a)) t2,      R(x) = v exp(T2 (x - a)) e.

Density and hazard may jump at ``a``; reliability and cumulative hazard are
continuous.  A point exactly at ``a`` belongs to the first regime.
"""

from dataclasses import dataclass

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
from .linalg import erlang_exp_row, erlang_log_row, expm, solve_complex_shifted, solve_real
from .phasetype import PhaseType, decay_rate, erlang_matrix

__all__ = ["OcpErlangSpec", "OneCutPoint", "expand_ocp_erlang", "homogeneous"]


@dataclass(frozen=True)
class OcpErlangSpec:
    """Cut point plus two Erlang rates sharing one phase count."""

    cut_point: float
    phases: int
    rate1: float
    rate2: float

    def __post_init__(self):
        if not (np.isfinite(self.cut_point) and self.cut_point > 0):
            raise InvalidInputError(f"cut point must be positive, got {self.cut_point!r}")
        if int(self.phases) != self.phases or self.phases < 1:
            raise InvalidInputError(f"phases must be a positive integer, got {self.phases!r}")
        for name in ("rate1", "rate2"):
            rate = getattr(self, name)
            if not (np.isfinite(rate) and rate > 0):
                raise InvalidInputError(f"{name} must be positive, got {rate!r}")
            object.__setattr__(self, name, float(rate))
        object.__setattr__(self, "cut_point", float(self.cut_point))
        object.__setattr__(self, "phases", int(self.phases))

    def as_tuple(self):
        return (self.cut_point, self.phases, self.rate1, self.rate2)


class OneCutPoint:
    """One cut-point phase-type distribution ``(a, alpha, T1, T2)``.

    Parameters
    ----------
    cut_point : float
        Regime switch time ``a > 0``.
    alpha : array_like, shape (n,)
        Initial distribution over the phases.
    T1, T2 : array_like, shape (n, n)
        Sub-generators before and after the cut.  ``T1`` must be
        nonsingular together with `alpha` as a phase-type representation;
        ``T2`` must satisfy the same sign and nonsingularity conditions.
    """

    def __init__(self, cut_point, alpha, T1, T2, *, erlang=None):
        cut_point = float(cut_point)
        if not (np.isfinite(cut_point) and cut_point > 0):
            raise InvalidRepresentationError("cut-point", f"cut point must be positive, got {cut_point!r}")
        first = PhaseType(alpha, T1)
        T2, exit2 = _shared.check_subgenerator(T2, name="T2")
        if T2.shape[0] != first.order:
            raise InvalidRepresentationError(
                "order", f"T1 has order {first.order} but T2 has order {T2.shape[0]}"
            )
        try:
            solve_real(T2, np.ones(T2.shape[0]))
        except SingularMatrixError as exc:
            raise InvalidRepresentationError("T2-nonsingular", str(exc)) from None
        T2.setflags(write=False)
        exit2.setflags(write=False)
        self.cut_point = cut_point
        self.alpha = first.alpha
        self.T1 = first.T
        self.T2 = T2
        self.exit1 = first.exit_vector
        self.exit2 = exit2
        self.erlang = erlang
        if erlang is not None:
            v = erlang_exp_row(erlang.phases, erlang.rate1, cut_point)
        else:
            v = np.clip(self.alpha @ expm(self.T1 * cut_point), 0.0, None)
        v.setflags(write=False)
        self._occupancy_at_cut = v

    @classmethod
    def from_erlang(cls, spec):
        n = spec.phases
        alpha = np.zeros(n)
        alpha[0] = 1.0
        return cls(
            spec.cut_point, alpha,
            erlang_matrix(n, spec.rate1), erlang_matrix(n, spec.rate2),
            erlang=spec,
        )

    @property
    def order(self):
        return self.alpha.size

    @property
    def occupancy_at_cut(self):
        """Row vector ``alpha exp(T1 a)``: phase occupancy just before the switch."""
        return self._occupancy_at_cut

    def first_regime(self):
        return PhaseType(self.alpha, self.T1)

    def __repr__(self):
        if self.erlang is not None:
            return f"OneCutPoint(erlang={self.erlang})"
        return f"OneCutPoint(cut_point={self.cut_point!r}, order={self.order})"

    # -- evaluation core -------------------------------------------------

    def _logs(self, x):
        """Return (log density, log reliability) at the times `x`."""
        x = np.asarray(x, dtype=float)
        logf = np.empty(x.shape)
        logr = np.empty(x.shape)
        before = x <= self.cut_point
        after = ~before
        if self.erlang is not None:
            n, lam1, lam2 = self.erlang.phases, self.erlang.rate1, self.erlang.rate2
            if np.any(before):
                rows = erlang_log_row(n, lam1, x[before])
                logf[before] = rows[..., n - 1] + np.log(lam1)
                logr[before] = logsumexp(rows, axis=-1)
            if np.any(after):
                log_v = erlang_log_row(n, lam1, self.cut_point)
                terms = erlang_log_row(n, lam2, x[after] - self.cut_point)
                # v exp(T2 y) is the convolution of v with Poisson(lam2 y) terms.
                flipped = terms[..., ::-1]
                tails = np.logaddexp.accumulate(terms, axis=-1)[..., ::-1]
                logf[after] = logsumexp(log_v + flipped, axis=-1) + np.log(lam2)
                logr[after] = logsumexp(log_v + tails, axis=-1)
            return logf, logr
        with np.errstate(divide="ignore"):
            for idx in np.ndindex(x.shape):
                xi = x[idx]
                if xi <= self.cut_point:
                    u = np.clip(self.alpha @ expm(self.T1 * xi), 0.0, None)
                    logf[idx] = np.log(u @ self.exit1)
                else:
                    u = np.clip(self._occupancy_at_cut @ expm(self.T2 * (xi - self.cut_point)), 0.0, None)
                    logf[idx] = np.log(u @ self.exit2)
                logr[idx] = np.log(u.sum())
        return logf, logr

    def logpdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(self._logs(x)[0], scalar)

    def pdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.exp(self._logs(x)[0]), scalar)

    def log_reliability(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.minimum(self._logs(x)[1], 0.0), scalar)

    def reliability(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(np.minimum(np.exp(self._logs(x)[1]), 1.0), scalar)

    def cdf(self, x):
        x, scalar = _shared.as_times(x)
        return _shared.unwrap(1.0 - np.minimum(np.exp(self._logs(x)[1]), 1.0), scalar)

    def hazard(self, x):
        x, scalar = _shared.as_times(x)
        logf, logr = self._logs(x)
        return _shared.unwrap(_shared.hazard_from_logs(logf, logr), scalar)

    def cum_hazard(self, x):
        x, scalar = _shared.as_times(x)
        logr = np.minimum(self._logs(x)[1], 0.0)
        return _shared.unwrap(_shared.cum_hazard_from_log(logr), scalar)

    def density_jump(self):
        """``f(a+) - f(a) = alpha exp(T1 a) (t2 - t1)``."""
        return float(self._occupancy_at_cut @ (self.exit2 - self.exit1))

    def quantile(self, p):
        if self.erlang is not None:
            hi = self.cut_point + 50.0 * self.erlang.phases / self.erlang.rate2
        else:
            hi = self.mean()
        return _shared.bisect_quantile(
            lambda v: float(self._logs(np.asarray(v))[1]), p, 0.0, hi
        )

    # -- transforms -------------------------------------------------------

    def char_fn(self, t):
        """Characteristic function ``E[exp(i t X)]``.

        ``exp(a (T1 + i t I))`` is evaluated as the scalar phase
        ``exp(i t a)`` times the real ``exp(a T1)``.
        """
        t = float(t)
        g1 = solve_complex_shifted(self.T1, t, self.exit1)
        g2 = solve_complex_shifted(self.T2, t, self.exit2)
        phase = np.exp(1j * t * self.cut_point)
        return complex(phase * (self._occupancy_at_cut @ (g1 - g2)) - self.alpha @ g1)

    def mgf_bound(self):
        """Supremum of the ``t`` for which the moment-generating function is finite here."""
        if self.erlang is not None:
            return min(self.erlang.rate1, self.erlang.rate2)
        return min(decay_rate(self.T1), decay_rate(self.T2))

    def mgf(self, t):
        """Moment-generating function ``E[exp(t X)]`` for ``t < mgf_bound()``."""
        t = float(t)
        bound = self.mgf_bound()
        if t >= bound:
            raise DomainError(f"mgf is only evaluated for t < {bound!r}, got {t!r}")
        ident = np.eye(self.order)
        try:
            g1 = solve_real(self.T1 + t * ident, self.exit1)
            g2 = solve_real(self.T2 + t * ident, self.exit2)
        except SingularMatrixError as exc:
            raise DomainError(f"shifted generator is singular at t={t!r}") from exc
        return float(np.exp(t * self.cut_point) * (self._occupancy_at_cut @ (g1 - g2)) - self.alpha @ g1)

    # -- moments -----------------------------------------------------------

    def _inverse_terms(self):
        e = np.ones(self.order)
        w1 = solve_real(self.T1, e)
        w2 = solve_real(self.T2, e)
        return w1, w2, solve_real(self.T1, w1), solve_real(self.T2, w2)

    def mean(self):
        """``-alpha T1^{-1} e + alpha exp(T1 a) (T1^{-1} - T2^{-1}) e``."""
        w1, w2, _, _ = self._inverse_terms()
        return float(-self.alpha @ w1 + self._occupancy_at_cut @ (w1 - w2))

    def second_moment(self):
        """``E[X^2]`` from the closed matrix expression.

        ``2 alpha T1^{-2} e - 2 alpha exp(T1 a) [T2^{-1}(a I - T2^{-1})
        - T1^{-1}(a I - T1^{-1})] e``, with ``a`` the scalar cut point.
        """
        a = self.cut_point
        w1, w2, ww1, ww2 = self._inverse_terms()
        bracket = (a * w2 - ww2) - (a * w1 - ww1)
        return float(2.0 * self.alpha @ ww1 - 2.0 * self._occupancy_at_cut @ bracket)

    def var(self):
        return self.second_moment() - self.mean() ** 2

    def sd(self):
        return float(np.sqrt(max(self.var(), 0.0)))

    # -- sampling ------------------------------------------------------------

    def sample(self, count, seed):
        """Simulate `count` absorption times of the switching jump process."""
        if int(count) != count or count < 1:
            raise InvalidInputError(f"count must be a positive integer, got {count!r}")
        rng = np.random.default_rng(seed)
        times = _shared.simulate_absorption(
            self.alpha, self.T1, self.exit1, self.T2, self.exit2,
            self.cut_point, int(count), rng,
        )
        return Dataset(times)


def expand_ocp_erlang(spec):
    """Build the bidiagonal-Erlang :class:`OneCutPoint` for an :class:`OcpErlangSpec`."""
    return OneCutPoint.from_erlang(spec)


def homogeneous(ph, cut_point):
    """Cut-point representation with ``T1 = T2``; equal in law to `ph`."""
    erlang = None
    if ph.erlang is not None:
        erlang = OcpErlangSpec(cut_point, ph.erlang.phases, ph.erlang.rate, ph.erlang.rate)
    return OneCutPoint(cut_point, ph.alpha, ph.T, ph.T, erlang=erlang)

