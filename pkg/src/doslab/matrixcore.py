"""Small dense real-matrix kernel backing every other module.

Matrices are plain 2-D ``float64`` numpy arrays validated through
:func:`as_matrix`; vectors are 1-D arrays.  The norm used throughout the
library is the max-row-sum norm, i.e. the operator norm induced by the
max norm on vectors.
"""

from __future__ import annotations

import numpy as np

from .errors import ExpOverflowError, InvalidMatrixError, SingularMatrixError

__all__ = [
    "as_matrix",
    "as_vector",
    "inf_norm",
    "mat_exp",
    "mat_pow",
    "gelfand_radius",
    "rank_with_tol",
    "solve_linear",
]

# e^{A t} is refused past this magnitude; doubles overflow near 709 and a
# plant/time pair anywhere close to that is pathological input, not data.
EXP_MAGNITUDE_CAP = 200.0

# Diagonal Pade order-13 numerator/denominator coefficients.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)


def as_matrix(m, square: bool = False) -> np.ndarray:
    """Validate and return ``m`` as a finite float64 2-D array."""
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidMatrixError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("matrix entries must be finite")
    if square and a.shape[0] != a.shape[1]:
        raise InvalidMatrixError(f"expected a square matrix, got shape {a.shape}")
    return a


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """Validate and return ``v`` as a finite float64 1-D array."""
    a = np.array(v, dtype=float)
    if a.ndim != 1:
        raise InvalidMatrixError(f"expected a vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrixError("vector entries must be finite")
    if dim is not None and a.shape[0] != dim:
        raise InvalidMatrixError(f"expected dimension {dim}, got {a.shape[0]}")
    return a


def inf_norm(m) -> float:
    """Max-row-sum norm of a matrix, or max-abs entry of a vector."""
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        return float(np.max(np.abs(a))) if a.size else 0.0
    return float(np.max(np.sum(np.abs(a), axis=1)))


def mat_exp(m, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{m t}`` by scaling-and-squaring with Pade 13.

    The argument is scaled so its norm is at most 0.5 before the Pade
    approximant is evaluated, then squared back up.  Raises
    :class:`ExpOverflowError` when ``inf_norm(m)*t`` exceeds
    :data:`EXP_MAGNITUDE_CAP`.
    """
    a = as_matrix(m, square=True)
    if t < 0:
        raise ValueError("mat_exp is defined here for nonnegative t only")
    a = a * t
    norm = inf_norm(a)
    if norm > EXP_MAGNITUDE_CAP:
        raise ExpOverflowError(
            f"inf_norm(m)*t = {norm:.3g} exceeds the cap {EXP_MAGNITUDE_CAP}"
        )
    squarings = 0 if norm <= 0.5 else int(np.ceil(np.log2(norm / 0.5)))
    a = a / (2.0 ** squarings)

    n = a.shape[0]
    ident = np.eye(n)
    b = _PADE13
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (
        a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
        + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident
    )
    v = (
        a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
        + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    )
    r = solve_linear(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def mat_pow(m, k: int) -> np.ndarray:
    """``m**k`` for integer ``k >= 0`` by repeated squaring; ``m**0`` is I."""
    a = as_matrix(m, square=True)
    if k < 0:
        raise ValueError("mat_pow requires k >= 0")
    result = np.eye(a.shape[0])
    base = a
    while k:
        if k & 1:
            result = result @ base
        k >>= 1
        if k:
            base = base @ base
    return result


def gelfand_radius(m, max_power: int = 64) -> float:
    """Upper bound on the spectral radius from norms of powers.

    Returns ``min_k inf_norm(m^k)^(1/k)`` over ``k = 1..max_power``.  The
    bound never increases with ``max_power`` and converges to the spectral
    radius, so a return value below one certifies Schur stability.  A value
    of one or more at ``max_power`` is inconclusive; the caller decides.
    """
    a = as_matrix(m, square=True)
    if max_power < 8:
        raise ValueError("max_power must be at least 8")
    best = np.inf
    p = np.eye(a.shape[0])
    for k in range(1, max_power + 1):
        p = p @ a
        norm = inf_norm(p)
        if norm == 0.0:
            return 0.0
        if not np.isfinite(norm):
            break
        best = min(best, norm ** (1.0 / k))
        if norm < 1e-300:
            break
    return float(best)


def rank_with_tol(m, tol: float = 1e-9) -> int:
    """Numerical rank via row-echelon reduction with partial pivoting.

    Pivots below ``tol`` times the largest-magnitude entry of the input
    count as zero.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_matrix(m).copy()
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return 0
    rows, cols = a.shape
    rank = 0
    for col in range(cols):
        if rank == rows:
            break
        pivot_row = rank + int(np.argmax(np.abs(a[rank:, col])))
        pivot = a[pivot_row, col]
        if abs(pivot) <= tol * scale:
            continue
        if pivot_row != rank:
            a[[rank, pivot_row]] = a[[pivot_row, rank]]
        a[rank + 1:, col:] -= np.outer(a[rank + 1:, col] / a[rank, col], a[rank, col:])
        rank += 1
    return rank


def solve_linear(a, b, tol: float = 1e-12) -> np.ndarray:
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting.

    ``b`` may be a vector or a matrix of right-hand sides.  Raises
    :class:`SingularMatrixError` when a pivot falls below ``tol`` relative
    to the largest-magnitude entry of ``a``.
    """
    a = as_matrix(a, square=True).copy()
    rhs = np.array(b, dtype=float)
    vector_rhs = rhs.ndim == 1
    if vector_rhs:
        rhs = rhs[:, None]
    n = a.shape[0]
    if rhs.shape[0] != n:
        raise InvalidMatrixError(
            f"right-hand side has {rhs.shape[0]} rows, expected {n}"
        )
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        raise SingularMatrixError("coefficient matrix is zero")
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot_row, col]) <= tol * scale:
            raise SingularMatrixError(f"pivot {col} below tolerance")
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            rhs[[col, pivot_row]] = rhs[[pivot_row, col]]
        factors = a[col + 1:, col] / a[col, col]
        a[col + 1:, col:] -= np.outer(factors, a[col, col:])
        rhs[col + 1:] -= np.outer(factors, rhs[col])
    x = np.empty_like(rhs)
    for row in range(n - 1, -1, -1):
        x[row] = (rhs[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x[:, 0] if vector_rhs else x
