"""Goodness of fit and nonparametric reference curves.

The Anderson-Darling p-value is calibrated by a parametric bootstrap that
refits the model on every replicate, because parameters estimated from the
same data invalidate the tabulated null distribution.  The smoothed density
and hazard estimators are direct global-bandwidth kernel sums, meant for
overlay plots rather than inference.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset
from .errors import (
    BoundaryError,
    DegenerateDataError,
    InvalidInputError,
    UnfittableDataError,
    UnreliableEstimateError,
)
from .estimation import (
    GOF_STREAM,
    MAX_FAILURE_FRACTION,
    FitConfig,
    FitResult,
    refit,
    replicate_seed,
)

__all__ = [
    "GofReport",
    "anderson_darling",
    "bootstrap_pvalue",
    "ad_pvalue_bootstrap",
    "ecdf",
    "empirical_cum_hazard",
    "kde_density",
    "silverman_bandwidth",
    "kernel_hazard",
]

MIN_GOF_REPS = 99


@dataclass(frozen=True)
class GofReport:
    a_squared: float
    p_value: float
    bootstrap_reps: int
    replicate_stats: np.ndarray
    failures: int = 0


def anderson_darling(data, cdf):
    """Anderson-Darling statistic of `data` against a continuous `cdf`.

    ``A^2 = -m - (1/m) sum_i (2i - 1) [ln F(x_(i)) + ln(1 - F(x_(m+1-i)))]``

    Raises
    ------
    BoundaryError
        If the cdf is numerically 0 or 1 at an observation.
    """
    x = Dataset.coerce(data).values
    m = x.size
    F = np.asarray(cdf(x), dtype=float).reshape(m)
    outside = ~((F > 0.0) & (F < 1.0))
    if np.any(outside):
        i = int(np.argmax(outside))
        raise BoundaryError(
            i, float(x[i]),
            f"cdf is {F[i]!r} at observation {i} (x={x[i]!r}); A^2 is undefined",
        )
    i = np.arange(1, m + 1)
    s = np.sum((2 * i - 1) * (np.log(F) + np.log1p(-F[::-1])))
    return float(-m - s / m)


def bootstrap_pvalue(observed, replicate_stats):
    """``(1 + #{replicates >= observed}) / (B + 1)``."""
    stats = np.asarray(replicate_stats, dtype=float)
    return float((1 + np.count_nonzero(stats >= observed)) / (stats.size + 1))


def ad_pvalue_bootstrap(data, fit, config=FitConfig(), reps=None):
    """Parametric-bootstrap Anderson-Darling test of a fitted model.

    Each replicate draws ``m`` points from the fitted model, refits the same
    family (phase count fixed) and computes A^2 of the replicate against its
    own refit.  `reps` defaults to ``config.bootstrap_reps`` and must be at
    least 99.
    """
    data = Dataset.coerce(data)
    if not isinstance(fit, FitResult):
        raise InvalidInputError("ad_pvalue_bootstrap needs a FitResult")
    B = config.bootstrap_reps if reps is None else int(reps)
    if B < MIN_GOF_REPS:
        raise InvalidInputError(f"need at least {MIN_GOF_REPS} bootstrap replicates, got {B}")
    dist = fit.distribution()
    observed = anderson_darling(data, dist.cdf)
    stats = np.full(B, np.nan)
    failures = 0
    for b in range(B):
        sample = dist.sample(data.m, replicate_seed(config.seed, GOF_STREAM, b))
        try:
            again = refit(fit.model, sample, config)
            stats[b] = anderson_darling(sample, again.distribution().cdf)
        except (UnfittableDataError, BoundaryError, DegenerateDataError):
            failures += 1
    if failures > MAX_FAILURE_FRACTION * B:
        raise UnreliableEstimateError(
            (B - failures) / B, f"{failures} of {B} goodness-of-fit replicates failed"
        )
    done = stats[np.isfinite(stats)]
    return GofReport(observed, bootstrap_pvalue(observed, done), B, done, failures)


# -- empirical curves ---------------------------------------------------------


def ecdf(data, x):
    """Right-continuous empirical cdf ``#{x_i <= x} / m``."""
    values = Dataset.coerce(data).values
    x = np.asarray(x, dtype=float)
    out = np.searchsorted(values, x, side="right") / values.size
    return float(out) if out.ndim == 0 else out


def _risk_table(values):
    """Distinct times, tie counts and risk-set sizes."""
    times, first, counts = np.unique(values, return_index=True, return_counts=True)
    at_risk = values.size - first
    return times, counts, at_risk


def empirical_cum_hazard(data, x):
    """Nelson-Aalen cumulative hazard for uncensored data."""
    values = Dataset.coerce(data).values
    times, counts, at_risk = _risk_table(values)
    steps = np.concatenate([[0.0], np.cumsum(counts / at_risk)])
    x = np.asarray(x, dtype=float)
    out = steps[np.searchsorted(times, x, side="right")]
    return float(out) if out.ndim == 0 else out


def silverman_bandwidth(data):
    """``0.9 * min(sd, IQR / 1.34) * m^(-1/5)``, skipping a zero IQR."""
    values = Dataset.coerce(data).values
    if values.size < 2:
        raise DegenerateDataError("bandwidth rule needs at least two observations")
    sd = values.std(ddof=1)
    q75, q25 = np.percentile(values, [75, 25])
    spread = [s for s in (sd, (q75 - q25) / 1.34) if s > 0]
    if not spread:
        raise DegenerateDataError("data have zero dispersion; give a bandwidth explicitly")
    return 0.9 * min(spread) * values.size ** (-0.2)


def kde_density(data, x, bandwidth=None):
    """Gaussian kernel density estimate evaluated by direct summation."""
    values = Dataset.coerce(data).values
    h = silverman_bandwidth(values) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise DegenerateDataError(f"bandwidth must be positive, got {h!r}")
    x = np.asarray(x, dtype=float)
    u = (x[..., None] - values) / h
    out = norm.pdf(u).sum(axis=-1) / (values.size * h)
    return float(out) if out.ndim == 0 else out


def _epanechnikov(u):
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def kernel_hazard(data, x, bandwidth=None):
    """Epanechnikov smoothing of the Nelson-Aalen increments.

    A single global bandwidth is used, by default ``(max - min) / m^(1/5)``.
    """
    values = Dataset.coerce(data).values
    if values.size < 5:
        raise DegenerateDataError("kernel hazard needs at least 5 observations")
    if bandwidth is None:
        span = values[-1] - values[0]
        if span <= 0:
            raise DegenerateDataError("data have zero range; give a bandwidth explicitly")
        h = span / values.size ** 0.2
    else:
        h = float(bandwidth)
        if not h > 0:
            raise DegenerateDataError(f"bandwidth must be positive, got {h!r}")
    times, counts, at_risk = _risk_table(values)
    x = np.asarray(x, dtype=float)
    weights = counts / at_risk
    out = (_epanechnikov((x[..., None] - times) / h) * weights).sum(axis=-1) / h
    return float(out) if out.ndim == 0 else out
