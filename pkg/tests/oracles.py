"""Independent reference computations used by the tests.

Each oracle deliberately avoids the code path it checks: the exponential
oracle is a plain truncated series, the input-matrix oracle is composite
Simpson quadrature, and the index oracles are direct Kalman rank tests on
explicitly stacked blocks.
"""

import numpy as np

from doslab import mat_exp, rank_with_tol


def taylor_expm(a, t=1.0, max_terms=300):
    """Truncated-series matrix exponential, summed to machine convergence."""
    a = np.asarray(a, dtype=float) * t
    n = a.shape[0]
    term = np.eye(n)
    total = np.eye(n)
    for k in range(1, max_terms):
        term = term @ a / k
        total = total + term
        if np.abs(term).max() < 1e-30 * max(1.0, np.abs(total).max()):
            return total
    raise AssertionError("series did not converge")


def simpson_input_matrix(a, b, delta, panels=10_000):
    """Composite-Simpson quadrature of the ZOH input integral."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if panels % 2:
        panels += 1
    h = delta / panels
    total = np.zeros_like(b)
    for i in range(panels + 1):
        weight = 1 if i in (0, panels) else (4 if i % 2 else 2)
        total = total + weight * (mat_exp(a, i * h) @ b)
    return total * h / 3.0


def kalman_controllability_index(a, b, tol=1e-9):
    """Smallest block count reaching full rank, by explicit stacking."""
    n = a.shape[0]
    blocks = b
    for eta in range(1, n + 1):
        if rank_with_tol(blocks, tol) == n:
            return eta
        blocks = np.hstack([blocks, np.linalg.matrix_power(a, eta) @ b])
    return None


def random_controllable_pair(generator, n, m):
    """Random (a, b) that passes the Kalman rank test."""
    while True:
        a = generator.uniform(-2, 2, size=(n, n))
        b = generator.uniform(-2, 2, size=(n, m))
        if kalman_controllability_index(a, b) is not None:
            return a, b
