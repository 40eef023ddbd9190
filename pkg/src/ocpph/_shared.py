"""Helpers shared by the plain and the cut-point phase-type classes."""

import numpy as np

from .errors import DomainError, InvalidRepresentationError, TailUnderflowError

# Reliability at or below this value makes hazard quantities unrepresentable.
UNDERFLOW_FLOOR = 1e-300
LOG_UNDERFLOW_FLOOR = np.log(UNDERFLOW_FLOOR)

VALIDATION_TOL = 1e-12


def as_times(x):
    """Return (array, was_scalar) after checking every time is >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)):
        raise DomainError("time is NaN")
    if np.any(arr < 0):
        raise DomainError(f"time must be nonnegative, got {np.min(arr)!r}")
    return arr, arr.ndim == 0


def unwrap(values, scalar):
    return float(values) if scalar else values


def check_alpha(alpha, tol=VALIDATION_TOL):
    alpha = np.array(alpha, dtype=float).ravel()
    if alpha.size < 1:
        raise InvalidRepresentationError("alpha-length", "alpha must have at least one entry")
    if not np.all(np.isfinite(alpha)):
        raise InvalidRepresentationError("alpha-finite", "alpha has non-finite entries")
    if np.any(alpha < 0):
        i = int(np.argmin(alpha))
        raise InvalidRepresentationError(
            "alpha-nonnegative", f"alpha[{i}] = {alpha[i]!r} is negative"
        )
    total = alpha.sum()
    if abs(total - 1.0) > tol:
        raise InvalidRepresentationError(
            "alpha-sum", f"alpha sums to {total!r}; an atom at zero is not supported"
        )
    return alpha


def check_subgenerator(T, name="T", tol=VALIDATION_TOL):
    """Validate sign structure and return (T, exit vector)."""
    T = np.array(T, dtype=float)
    if T.ndim == 0:
        T = T.reshape(1, 1)
    if T.ndim != 2 or T.shape[0] != T.shape[1] or T.shape[0] < 1:
        raise InvalidRepresentationError(f"{name}-square", f"{name} must be square, got {T.shape}")
    if not np.all(np.isfinite(T)):
        raise InvalidRepresentationError(f"{name}-finite", f"{name} has non-finite entries")
    diag = np.diag(T)
    if np.any(diag >= 0):
        i = int(np.argmax(diag))
        raise InvalidRepresentationError(
            f"{name}-diagonal", f"{name}[{i},{i}] = {diag[i]!r} must be negative"
        )
    off = T - np.diag(diag)
    if np.any(off < 0):
        i, j = np.unravel_index(np.argmin(off), off.shape)
        raise InvalidRepresentationError(
            f"{name}-offdiagonal", f"{name}[{i},{j}] = {T[i, j]!r} must be nonnegative"
        )
    rows = T.sum(axis=1)
    # tolerance scales with the row magnitude so rounding in large rates is not rejected
    slack = tol * np.maximum(1.0, np.abs(diag))
    if np.any(rows > slack):
        i = int(np.argmax(rows - slack))
        raise InvalidRepresentationError(
            f"{name}-row-sum", f"row {i} of {name} sums to {rows[i]!r} > 0"
        )
    exit_vector = np.maximum(-rows, 0.0)
    return T, exit_vector


def hazard_from_logs(log_density, log_survival):
    if np.any(log_survival <= LOG_UNDERFLOW_FLOOR):
        raise TailUnderflowError(
            f"reliability below {UNDERFLOW_FLOOR:g}; hazard is not representable"
        )
    return np.exp(log_density - log_survival)


def cum_hazard_from_log(log_survival):
    if np.any(log_survival <= LOG_UNDERFLOW_FLOOR):
        raise TailUnderflowError(
            f"reliability below {UNDERFLOW_FLOOR:g}; cumulative hazard is not representable"
        )
    return -log_survival


def bisect_quantile(log_survival, p, lo, hi, rtol=1e-12):
    """Locate x with F(x) = p by bisection on the monotone reliability.

    `hi` is doubled until it brackets the quantile.
    """
    if not 0.0 <= p < 1.0:
        raise DomainError(f"probability must lie in [0, 1), got {p!r}")
    if p == 0.0:
        return 0.0
    target = np.log1p(-p)
    hi = max(hi, np.finfo(float).tiny)
    for _ in range(2000):
        if log_survival(hi) <= target:
            break
        lo, hi = hi, 2.0 * hi
    else:  # pragma: no cover - reliability never drops
        raise DomainError("could not bracket the quantile")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if log_survival(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _jump_table(T, exit_vector):
    n = T.shape[0]
    rates = -np.diag(T)
    probs = np.empty((n, n + 1))
    probs[:, :n] = T / rates[:, None]
    probs[np.arange(n), np.arange(n)] = 0.0
    probs[:, n] = exit_vector / rates
    cum = np.cumsum(probs, axis=1)
    cum /= cum[:, -1:]
    cum[:, -1] = 1.0
    return rates, cum


def simulate_absorption(alpha, T1, exit1, T2, exit2, cut, count, rng):
    """Absorption times of a jump process that switches from T1 to T2 at `cut`.

    With ``cut = inf`` this is plain phase-type sampling.  Phases are drawn
    from `alpha`; each holding time is exponential with the diagonal rate of
    the active regime.  A holding period that would carry a path past `cut`
    while still in the first regime is stopped at `cut` and restarted under
    the second regime from the same phase, which is exact by memorylessness.
    """
    n = alpha.size
    rates1, cum1 = _jump_table(T1, exit1)
    rates2, cum2 = _jump_table(T2, exit2)
    state = rng.choice(n, size=count, p=alpha)
    time = np.zeros(count)
    second = np.zeros(count, dtype=bool)
    alive = np.arange(count)
    while alive.size:
        s = state[alive]
        reg2 = second[alive]
        rate = np.where(reg2, rates2[s], rates1[s])
        hold = rng.exponential(size=alive.size) / rate
        u = rng.random(alive.size)
        t_new = time[alive] + hold
        crossing = ~reg2 & (t_new > cut)
        cum = np.where(reg2[:, None], cum2[s], cum1[s])
        nxt = (u[:, None] > cum).sum(axis=1)
        nxt = np.minimum(nxt, n)

        cross_idx = alive[crossing]
        time[cross_idx] = cut
        second[cross_idx] = True

        moved = ~crossing
        mov_idx = alive[moved]
        time[mov_idx] = t_new[moved]
        state[mov_idx] = nxt[moved]
        absorbed = np.zeros(alive.size, dtype=bool)
        absorbed[moved] = nxt[moved] == n
        alive = alive[~absorbed]
    return time
