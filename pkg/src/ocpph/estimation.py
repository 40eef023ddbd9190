"""Maximum-likelihood fitting of Erlang and Erlang cut-point models.

The cut point enters the likelihood only piecewise smoothly: an observation
changes branch whenever ``a`` crosses it.  Fitting therefore profiles ``a``
over a quantile grid (rates optimized for each candidate), refines the
profile over the order statistics next to the best candidate, and finally
polishes ``(a, rate1, rate2)`` jointly inside the one inter-observation
interval that contains the best candidate, where the likelihood is smooth.

Rates are optimized on the log scale within the configured bounds.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize
from scipy.special import gammaincinv, gammaln, logsumexp

from .cutpoint import OcpErlangSpec, expand_ocp_erlang
from .data import Dataset
from .errors import (
    DegenerateDataError,
    InvalidInputError,
    InvalidStartError,
    UnfittableDataError,
    UnreliableEstimateError,
)
from .linalg import erlang_log_row
from .phasetype import ErlangSpec, erlang_rep

logger = logging.getLogger(__name__)

__all__ = [
    "FitConfig",
    "FitResult",
    "OptimizeResult",
    "CutpointInterval",
    "loglik_ocp",
    "loglik_erlang",
    "mle_erlang_rate",
    "optimize_box",
    "fit_erlang",
    "fit_ocp_erlang",
    "select_phases",
    "bootstrap_ci_cutpoint",
    "replicate_seed",
]

# Observations with density below this contribute PENALTY instead of log(0).
DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = np.log(DENSITY_FLOOR)
PENALTY = -1e10

# L-BFGS-B also stops once an iteration improves the objective by less than
# this relative amount; finite-difference noise makes tighter values useless.
RELATIVE_DECREASE_TOL = 100 * np.finfo(float).eps

MIN_SIDE = 3
MAX_REFINE = 48
EARLY_STOP = 5
MAX_FAILURE_FRACTION = 0.2

# Seed streams keep bootstrap CI and goodness-of-fit replicates independent.
CI_STREAM = 0
GOF_STREAM = 1


@dataclass(frozen=True)
class FitConfig:
    """Knobs for fitting, phase selection and the bootstrap."""

    phase_range: tuple = (1, 30)
    cutpoint_grid_size: int = 49
    rate_bounds: tuple = (1e-6, 1e8)
    multistarts: int = 3
    bootstrap_reps: int = 500
    confidence_level: float = 0.95
    seed: int = 0
    tolerance: float = 1e-8
    max_iter: int = 500

    def __post_init__(self):
        lo, hi = self.phase_range
        if int(lo) != lo or lo < 1 or hi < lo:
            raise InvalidInputError(f"invalid phase range {self.phase_range!r}")
        rlo, rhi = self.rate_bounds
        if not (0 < rlo < rhi < np.inf):
            raise InvalidInputError(f"invalid rate bounds {self.rate_bounds!r}")
        if self.cutpoint_grid_size < 1:
            raise InvalidInputError("cutpoint_grid_size must be >= 1")
        if self.multistarts < 1:
            raise InvalidInputError("multistarts must be >= 1")
        if self.bootstrap_reps < 0:
            raise InvalidInputError("bootstrap_reps must be >= 0")
        if not 0 < self.confidence_level < 1:
            raise InvalidInputError("confidence_level must lie in (0, 1)")
        if not self.tolerance > 0:
            raise InvalidInputError("tolerance must be positive")
        object.__setattr__(self, "phase_range", (int(lo), int(hi)))


@dataclass(frozen=True)
class OptimizeResult:
    x: np.ndarray
    value: float
    converged: bool
    evaluations: int
    projected_gradient: float
    message: str = ""


@dataclass(frozen=True)
class CutpointInterval:
    """Percentile bootstrap interval for the cut point.

    ``lower``/``upper`` are ``None`` when the bootstrap was skipped.
    """

    lower: float | None
    upper: float | None
    level: float
    estimates: np.ndarray
    failures: int
    flags: tuple = ()

    @property
    def bounds(self):
        return None if self.lower is None else (self.lower, self.upper)


@dataclass(frozen=True)
class FitResult:
    model: object
    log_likelihood: float
    converged: bool
    evaluations: int
    trace: tuple = ()
    cutpoint_ci: tuple | None = None
    flags: tuple = ()
    penalized: int = 0

    @property
    def phases(self):
        return self.model.phases

    @property
    def kind(self):
        return "ocp-erlang" if isinstance(self.model, OcpErlangSpec) else "ph-erlang"

    def distribution(self):
        if isinstance(self.model, OcpErlangSpec):
            return expand_ocp_erlang(self.model)
        return erlang_rep(self.model)


# -- likelihood ----------------------------------------------------------------


def _penalize(terms):
    bad = ~(terms > LOG_DENSITY_FLOOR)
    if np.any(bad):
        terms = np.where(bad, PENALTY, terms)
    return terms, int(np.count_nonzero(bad))


def loglik_ocp(model, data, full_output=False):
    """Log-likelihood of a cut-point model.

    `model` is an :class:`OcpErlangSpec` or any :class:`OneCutPoint`.  Points
    at or below the cut use the first-regime density.  An observation whose
    density is below ``1e-300`` contributes ``-1e10`` instead of ``-inf``;
    with ``full_output=True`` the number of such points is returned too.
    """
    if isinstance(model, OcpErlangSpec):
        model = expand_ocp_erlang(model)
    x = Dataset.coerce(data).values
    terms, penalized = _penalize(model.logpdf(x))
    value = float(terms.sum())
    return (value, penalized) if full_output else value


def loglik_erlang(spec, data, full_output=False):
    """Log-likelihood of a plain Erlang model, with the same penalty rule."""
    x = Dataset.coerce(data).values
    terms, penalized = _penalize(erlang_rep(spec).logpdf(x))
    value = float(terms.sum())
    return (value, penalized) if full_output else value


def mle_erlang_rate(n, data):
    """Closed-form Erlang rate estimate ``n / mean(data)``."""
    x = Dataset.coerce(data).values
    mean = x.mean()
    if mean <= 0:
        raise DegenerateDataError("all observations are zero")
    return n / mean


# -- optimizer -------------------------------------------------------------------


def optimize_box(objective, bounds, start, tolerance=1e-8, max_iter=500):
    """Maximize `objective` inside a box with L-BFGS-B.

    Gradients are central finite differences with per-coordinate step
    ``eps**(1/3) * max(1, |theta_j|)``, switched to one-sided differences
    against an active bound.

    Parameters
    ----------
    objective : callable
        Maps a 1-d float array to a float.
    bounds : sequence of (low, high)
    start : array_like
        Must lie inside `bounds`.
    tolerance : float
        Projected-gradient threshold.

    Returns
    -------
    OptimizeResult
        Never worse than `start`.  ``converged`` is false when the iteration
        cap was reached.
    """
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    lo, hi = bounds[:, 0], bounds[:, 1]
    x0 = np.asarray(start, dtype=float).ravel()
    if x0.shape[0] != lo.shape[0]:
        raise InvalidStartError("start and bounds have different lengths")
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise InvalidStartError(f"start {x0} is outside the bounds")
    counter = [0]

    def f(theta):
        counter[0] += 1
        return -float(objective(theta))

    f0 = f(x0)
    if not np.isfinite(f0):
        raise InvalidStartError(f"objective is not finite at the start ({-f0!r})")

    step_base = np.finfo(float).eps ** (1.0 / 3.0)

    def grad(theta):
        g = np.empty_like(theta)
        for j in range(theta.size):
            h = step_base * max(1.0, abs(theta[j]))
            up = min(theta[j] + h, hi[j])
            down = max(theta[j] - h, lo[j])
            tu = theta.copy()
            tu[j] = up
            td = theta.copy()
            td[j] = down
            # one-sided automatically when a bound clips either step
            g[j] = 0.0 if up == down else (f(tu) - f(td)) / (up - down)
        return g

    def fun_and_grad(theta):
        return f(theta), grad(theta)

    res = scipy.optimize.minimize(
        fun_and_grad, x0, jac=True, method="L-BFGS-B",
        bounds=list(map(tuple, bounds)),
        options={"maxiter": max_iter, "gtol": tolerance, "ftol": RELATIVE_DECREASE_TOL},
    )
    x = np.clip(res.x, lo, hi)
    fx = f(x)
    if not (fx <= f0):
        x, fx = x0, f0
    g = grad(x)
    pg = float(np.max(np.abs(np.clip(x - g, lo, hi) - x)))
    converged = bool(res.success) and res.nit < max_iter
    return OptimizeResult(x, -fx, converged, counter[0], pg, str(res.message))


# -- Erlang ----------------------------------------------------------------------


def fit_erlang(data, n):
    """Fit a plain Erlang with `n` phases by its closed-form MLE."""
    data = Dataset.coerce(data)
    spec = ErlangSpec(n, mle_erlang_rate(n, data))
    value, penalized = loglik_erlang(spec, data, full_output=True)
    return FitResult(spec, value, True, 1, ((n, value),), penalized=penalized)


# -- cut-point model -------------------------------------------------------------


class _CutLikelihood:
    """Log-likelihood of the Erlang cut-point model for a fixed data split.

    The rate-free parts of the log Poisson terms are cached per split, so an
    evaluation costs one exp/log sweep over a (points above the cut, n) array.
    """

    def __init__(self, x, n, a):
        self.n = n
        self.a = a
        self.x = x
        split = np.searchsorted(x, a, side="right")
        self.low = x[:split]
        self.high = x[split:]
        with np.errstate(divide="ignore"):
            self.sum_log_low = np.log(self.low).sum() if n > 1 else 0.0
        self.sum_low = self.low.sum()
        self.j = np.arange(n)
        self._fixed_cut = self._rate_free(a)

    def _rate_free(self, a):
        y = self.high - a
        with np.errstate(divide="ignore", invalid="ignore"):
            base = self.j * np.log(y)[:, None] - gammaln(self.j + 1.0)
        base[y == 0.0] = np.where(self.j == 0, 0.0, -np.inf)
        # reversed so column i pairs with occupancy of phase i
        return y, base[:, ::-1]

    def __call__(self, lam1, lam2, a=None):
        n = self.n
        y, base = self._fixed_cut if a is None else self._rate_free(a)
        a = self.a if a is None else a
        with np.errstate(divide="ignore", invalid="ignore"):
            low = (
                self.low.size * (n * np.log(lam1) - gammaln(n))
                + (n - 1) * self.sum_log_low
                - lam1 * self.sum_low
            )
            log_v = erlang_log_row(n, lam1, a)
            z = base + (log_v + self.j[::-1] * np.log(lam2))
            peak = z.max(axis=1)
            high = np.log(np.exp(z - peak[:, None]).sum(axis=1)) + peak - lam2 * y + np.log(lam2)
        if not np.isfinite(low) or not np.all(high > LOG_DENSITY_FLOOR):
            # the per-point rule counts the penalty once per offending observation
            return loglik_ocp(OcpErlangSpec(a, n, lam1, lam2), self.x)
        return float(low + high.sum())


def _warm_start(x, n, a, rate_bounds):
    """Moment/quantile-matched starting rates for one candidate cut point."""
    m = x.size
    k = np.searchsorted(x, a, side="right")
    # rate1 places the empirical fraction below a at the Erlang quantile
    frac = min(max((k - 0.5) / m, 1e-6), 1 - 1e-6)
    lam1 = gammaincinv(n, frac) / a
    lam1 = float(np.clip(lam1, *rate_bounds))
    occ = np.exp(erlang_log_row(n, lam1, a))
    remaining = float((occ * (n - np.arange(n))).sum() / max(occ.sum(), 1e-300))
    resid = max(float(np.mean(x[k:] - a)), 1e-12 * max(a, 1.0))
    lam2 = float(np.clip(max(remaining, 1.0) / resid, *rate_bounds))
    return lam1, lam2


def _candidate_cuts(x, grid_size):
    """Interior empirical quantiles with at least MIN_SIDE points on each side."""
    levels = np.arange(1, grid_size + 1) / (grid_size + 1)
    cuts = np.unique(np.quantile(x, levels))
    return [a for a in cuts if _admissible(x, a)]


def _admissible(x, a):
    if not (x[0] < a < x[-1]) or a <= 0:
        return False
    k = np.searchsorted(x, a, side="right")
    return k >= MIN_SIDE and x.size - k >= MIN_SIDE


def _profile(x, n, a, config, starts):
    """Best (loglik, lam1, lam2, evals, converged) for a fixed cut point."""
    lik = _CutLikelihood(x, n, a)
    log_bounds = np.log(config.rate_bounds)
    box = [tuple(log_bounds), tuple(log_bounds)]

    def objective(theta):
        return lik(np.exp(theta[0]), np.exp(theta[1]))

    best = None
    evals = 0
    for lam1, lam2 in starts:
        start = np.clip(np.log([lam1, lam2]), *log_bounds)
        try:
            res = optimize_box(objective, box, start, config.tolerance, config.max_iter)
        except InvalidStartError:
            continue
        evals += res.evaluations
        if best is None or res.value > best.value:
            best = res
    if best is None:
        return None
    lam1, lam2 = np.exp(best.x)
    return best.value, float(lam1), float(lam2), evals, best.converged


def _start_set(lam1, lam2, multistarts, rate_bounds):
    factors = [1.0, 0.5, 2.0, 0.25, 4.0, 0.125, 8.0]
    out = []
    for f in factors[:multistarts]:
        out.append((float(np.clip(lam1 * f, *rate_bounds)), float(np.clip(lam2 * f, *rate_bounds))))
    return out


def _polish(x, n, a, lam1, lam2, config):
    """Joint optimization over (a, log lam1, log lam2) within one smooth piece."""
    k = np.searchsorted(x, a, side="right")
    left, right = x[k - 1], x[k]
    width = right - left
    if width <= 0:
        return None
    # the right end belongs to the next piece, where x[k] switches branch
    top = 1.0 - 1e-9
    lik = _CutLikelihood(x, n, 0.5 * (left + right))
    log_bounds = np.log(config.rate_bounds)

    def objective(theta):
        cut = left + theta[0] * width
        if cut <= 0:
            return -np.inf
        return lik(np.exp(theta[1]), np.exp(theta[2]), cut)

    u0 = min(max((a - left) / width, 0.0), top)
    start = np.array([u0, *np.clip(np.log([lam1, lam2]), *log_bounds)])
    box = [(0.0, top), tuple(log_bounds), tuple(log_bounds)]
    try:
        res = optimize_box(objective, box, start, config.tolerance, config.max_iter)
    except InvalidStartError:
        return None
    cut = left + res.x[0] * width
    return res.value, float(cut), float(np.exp(res.x[1])), float(np.exp(res.x[2])), res.evaluations, res.converged


def fit_ocp_erlang(data, n, config=FitConfig()):
    """Fit an Erlang cut-point model with `n` phases by maximum likelihood.

    Parameters
    ----------
    data : Dataset or array_like
        At least 10 observations.
    n : int
        Shared phase count of both regimes.
    config : FitConfig

    Returns
    -------
    FitResult
        ``model`` is an :class:`OcpErlangSpec`.

    Raises
    ------
    UnfittableDataError
        Fewer than 10 observations, or no admissible cut point.
    """
    data = Dataset.coerce(data)
    x = data.values
    if x.size < 10:
        raise UnfittableDataError(f"need at least 10 observations, got {x.size}")
    if int(n) != n or n < 1:
        raise InvalidInputError(f"phases must be a positive integer, got {n!r}")
    n = int(n)
    cuts = _candidate_cuts(x, config.cutpoint_grid_size)
    if not cuts:
        raise UnfittableDataError("no candidate cut point has enough observations on both sides")

    evaluations = 0
    profile = {}
    previous = None
    for a in cuts:
        start = _warm_start(x, n, a, config.rate_bounds)
        if previous is not None:
            # the profile is smooth in a: the neighbour's optimum is often closer
            lik = _CutLikelihood(x, n, a)
            evaluations += 2
            if lik(*previous) > lik(*start):
                start = previous
        out = _profile(x, n, a, config, [start])
        if out is None:
            continue
        profile[a] = out
        previous = out[1:3]
        evaluations += out[3]
    if not profile:
        raise UnfittableDataError("optimization failed for every candidate cut point")

    best_a = max(profile, key=lambda c: profile[c][0])
    if config.multistarts > 1:
        # extra starts only where they matter: at the best grid candidate
        lam1, lam2 = _warm_start(x, n, best_a, config.rate_bounds)
        starts = _start_set(lam1, lam2, config.multistarts, config.rate_bounds)[1:]
        out = _profile(x, n, best_a, config, starts + [profile[best_a][1:3]])
        evaluations += out[3]
        if out[0] > profile[best_a][0]:
            profile[best_a] = out
    # refine over the order statistics between the neighbouring grid points
    grid = sorted(profile)
    i = grid.index(best_a)
    lo_edge = grid[i - 1] if i > 0 else x[MIN_SIDE - 1]
    hi_edge = grid[i + 1] if i + 1 < len(grid) else x[x.size - MIN_SIDE - 1]
    inner = np.unique(x[(x > lo_edge) & (x < hi_edge)])
    if inner.size > MAX_REFINE:
        inner = inner[np.linspace(0, inner.size - 1, MAX_REFINE).round().astype(int)]
    lam1, lam2 = profile[best_a][1:3]
    for a in inner:
        if a in profile or not _admissible(x, a):
            continue
        out = _profile(x, n, a, config, [(lam1, lam2)])
        if out is None:
            continue
        profile[a] = out
        evaluations += out[3]

    best_a = max(profile, key=lambda c: profile[c][0])
    value, lam1, lam2, _, converged = profile[best_a]
    # each piece is [x_(k), x_(k+1)); try the piece holding best_a and, when
    # best_a is itself an observation, the piece just below it
    pieces = [best_a]
    k = np.searchsorted(x, best_a, side="left")
    if k > 0 and x[k] == best_a:
        pieces.append(0.5 * (x[k - 1] + best_a))
    for a0 in pieces:
        if not _admissible(x, a0):
            continue
        out = _polish(x, n, a0, lam1, lam2, config)
        if out is None:
            continue
        evaluations += out[4]
        if out[0] > value:
            value, best_a, lam1, lam2, _, converged = out[0], out[1], out[2], out[3], None, out[5]

    spec = OcpErlangSpec(best_a, n, lam1, lam2)
    value, penalized = loglik_ocp(spec, data, full_output=True)
    flags = ("penalized",) if penalized else ()
    logger.debug("n=%d fit %s loglik=%.6f", n, spec, value)
    return FitResult(spec, value, bool(converged), evaluations, ((n, value),), flags=flags, penalized=penalized)


def select_phases(data, config=FitConfig(), kind="ocp-erlang"):
    """Fit every phase count in ``config.phase_range`` and keep the best.

    Stops early once the log-likelihood has failed to beat the running best
    for five consecutive phase counts.
    """
    data = Dataset.coerce(data)
    lo, hi = config.phase_range
    best = None
    trace = []
    stale = 0
    evaluations = 0
    for n in range(lo, hi + 1):
        if kind == "ocp-erlang":
            fit = fit_ocp_erlang(data, n, config)
        elif kind == "ph-erlang":
            fit = fit_erlang(data, n)
        else:
            raise InvalidInputError(f"cannot select phases for kind {kind!r}")
        trace.append((n, fit.log_likelihood))
        evaluations += fit.evaluations
        if best is None or fit.log_likelihood > best.log_likelihood:
            best = fit
            stale = 0
        else:
            stale += 1
            if stale >= EARLY_STOP:
                break
    return replace(best, trace=tuple(trace), evaluations=evaluations)


# -- bootstrap ---------------------------------------------------------------------


def replicate_seed(seed, stream, index):
    """Seed for one bootstrap replicate; independent of execution order."""
    return np.random.SeedSequence([int(seed), int(stream), int(index)])


def refit(model, data, config):
    """Refit the family of `model` (phase count fixed) to `data`."""
    if isinstance(model, OcpErlangSpec):
        return fit_ocp_erlang(data, model.phases, config)
    if isinstance(model, ErlangSpec):
        return fit_erlang(data, model.phases)
    raise InvalidInputError(f"cannot refit model of type {type(model).__name__}")


def bootstrap_ci_cutpoint(data, fit, config=FitConfig()):
    """Parametric percentile bootstrap interval for the cut point.

    ``config.bootstrap_reps`` samples of the data size are drawn from the
    fitted model, the cut-point model is refitted to each with the phase count
    held fixed, and the interval is read off the empirical quantiles of the
    refitted cut points.

    Raises
    ------
    UnreliableEstimateError
        When more than 20% of the replicate fits fail.
    """
    data = Dataset.coerce(data)
    model = fit.model if isinstance(fit, FitResult) else fit
    if not isinstance(model, OcpErlangSpec):
        raise InvalidInputError("the cut-point interval needs a fitted cut-point model")
    B = config.bootstrap_reps
    level = config.confidence_level
    if B == 0:
        return CutpointInterval(None, None, level, np.empty(0), 0, ("ci-skipped",))
    dist = expand_ocp_erlang(model)
    estimates = np.full(B, np.nan)
    failures = 0
    for b in range(B):
        sample = dist.sample(data.m, replicate_seed(config.seed, CI_STREAM, b))
        try:
            estimates[b] = fit_ocp_erlang(sample, model.phases, config).model.cut_point
        except UnfittableDataError:
            failures += 1
    if failures > MAX_FAILURE_FRACTION * B:
        raise UnreliableEstimateError(
            (B - failures) / B,
            f"{failures} of {B} bootstrap refits failed",
        )
    done = estimates[np.isfinite(estimates)]
    tail = 0.5 * (1.0 - level)
    lower, upper = np.quantile(done, [tail, 1.0 - tail])
    flags = []
    if B < 100:
        flags.append("few-replicates")
    if not lower <= model.cut_point <= upper:
        flags.append("ci-excludes-estimate")
    return CutpointInterval(float(lower), float(upper), level, done, failures, tuple(flags))


def with_cutpoint_ci(fit, interval):
    """Return `fit` with the interval (or its skip flag) attached."""
    flags = tuple(dict.fromkeys(fit.flags + interval.flags))
    return replace(fit, cutpoint_ci=interval.bounds, flags=flags)
