"""Dense linear-algebra kernels used by every distribution formula.

The matrix exponential is a scaling-and-squaring Padé implementation
(Higham, 2005).  The Erlang helpers work in the log domain so that rate-time
products in the thousands do not overflow intermediate factorials.
"""

import warnings

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import InvalidInputError, SingularMatrixError

__all__ = [
    "expm",
    "solve_real",
    "solve_complex_shifted",
    "erlang_exp_row",
    "erlang_log_row",
]

# Pivot magnitudes below this fraction of the infinity norm are treated as zero.
SINGULAR_RTOL = 1e-13

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
        16380.0, 182.0, 1.0,
    ),
}

# Largest 1-norm for which the degree-m approximant is accurate to unit roundoff.
_THETA = (
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
)
_THETA_13 = 5.371920351148152e0


def _as_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InvalidInputError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def _pade_low(A, m):
    b = _PADE_COEFFS[m]
    n = A.shape[0]
    ident = np.eye(n)
    A2 = A @ A
    U = b[1] * ident
    V = b[0] * ident
    power = ident
    for k in range(1, m // 2 + 1):
        power = power @ A2
        U = U + b[2 * k + 1] * power
        V = V + b[2 * k] * power
    return A @ U, V


def _pade13(A):
    b = _PADE_COEFFS[13]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A2 @ A4
    U = A @ (
        A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
        + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident
    )
    V = (
        A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
        + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    )
    return U, V


def expm(A):
    """Matrix exponential of a real square matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Finite real matrix.  Scalars are treated as 1x1 matrices.

    Returns
    -------
    ndarray, shape (n, n)

    Raises
    ------
    InvalidInputError
        If `A` is not square or has non-finite entries.
    """
    A = _as_square(A)
    if A.shape[0] == 1:
        return np.exp(A)
    norm1 = np.linalg.norm(A, 1)
    for m, theta in _THETA:
        if norm1 <= theta:
            U, V = _pade_low(A, m)
            return scipy.linalg.solve(V - U, V + U)
    squarings = 0
    if norm1 > _THETA_13:
        squarings = max(0, int(np.ceil(np.log2(norm1 / _THETA_13))))
    U, V = _pade13(A / 2.0**squarings)
    E = scipy.linalg.solve(V - U, V + U)
    for _ in range(squarings):
        E = E @ E
    return E


def _lu_checked(A):
    scale = np.linalg.norm(A, np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if scale == 0.0 or np.min(pivots) < SINGULAR_RTOL * scale:
        raise SingularMatrixError(
            f"matrix is numerically singular (smallest pivot {np.min(pivots):.3g}, "
            f"norm {scale:.3g})"
        )
    return lu, piv


def solve_real(A, b):
    """Solve ``A x = b`` by LU with partial pivoting.

    `b` may be a vector or a matrix of right-hand sides.  A pivot smaller than
    ``1e-13 * ||A||_inf`` raises :class:`SingularMatrixError`.
    """
    A = _as_square(A)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise InvalidInputError(f"right-hand side has length {b.shape[0]}, expected {A.shape[0]}")
    lu, piv = _lu_checked(A)
    return scipy.linalg.lu_solve((lu, piv), b, check_finite=False)


def solve_complex_shifted(T, t, b):
    """Solve ``(T + i t I) x = b`` for complex `x`.

    Raises :class:`SingularMatrixError` when the shifted matrix is singular,
    which for a sub-generator only happens outside the stable half-plane.
    """
    T = _as_square(T, "T")
    b = np.asarray(b)
    if b.shape[0] != T.shape[0]:
        raise InvalidInputError(f"right-hand side has length {b.shape[0]}, expected {T.shape[0]}")
    shifted = T + 1j * float(t) * np.eye(T.shape[0])
    lu, piv = _lu_checked(shifted)
    return scipy.linalg.lu_solve((lu, piv), b.astype(complex), check_finite=False)


def erlang_log_row(n, lam, x):
    """Log of the first row of ``exp(T x)`` for an n-phase Erlang generator.

    Entry ``j`` is ``log(exp(-lam x) (lam x)^j / j!)`` for ``j = 0..n-1``.
    `x` may be an array; the result then has shape ``x.shape + (n,)``.
    """
    if n < 1 or lam <= 0:
        raise InvalidInputError(f"need n >= 1 and lam > 0, got n={n}, lam={lam}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise InvalidInputError("time must be nonnegative")
    z = lam * x
    j = np.arange(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -z[..., None] + j * np.log(z)[..., None] - gammaln(j + 1.0)
    # 0 * log(0) is taken as 0: at time zero all mass sits in phase 0.
    zero = z == 0.0
    if np.any(zero):
        out[zero] = -np.inf
        out[zero, 0] = 0.0
    return out


def erlang_exp_row(n, lam, x):
    """First row of ``exp(T x)`` for an n-phase Erlang generator with rate `lam`.

    Entry ``j`` equals ``exp(-lam x) (lam x)^j / j!``, evaluated in the log
    domain so that ``lam * x`` up to ~1e4 does not overflow.

    Examples
    --------
    >>> erlang_exp_row(2, 2.0, 1.0).round(6)
    array([0.135335, 0.270671])
    """
    return np.exp(erlang_log_row(n, lam, x))
