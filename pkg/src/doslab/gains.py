"""Controller and observer gain synthesis plus decay-constant extraction.

Three synthesis routines live here:

* :func:`design_deadbeat_gain` builds a feedback gain making the closed
  loop nilpotent with index equal to the controllability index, via a
  staircase basis of the controllability matrix and block-companion
  coefficient zeroing.
* :func:`design_observer_gain` iterates the filtering Riccati recursion to
  the steady-state gain and certifies the closed error transition.
* :func:`design_deadbeat_observer` is the dual deadbeat construction.

:func:`derive_decay_constants` scans powers of the closed matrices and
extracts the geometric-decay constants the encoding schemes and stability
conditions consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretize import DiscretePlant
from .errors import (
    IllConditionedBasisError,
    RiccatiConvergenceError,
    StabilityCertificationError,
    UncontrollablePairError,
)
from .matrixcore import as_matrix, gelfand_radius, inf_norm, mat_pow, solve_linear

__all__ = [
    "GainSet",
    "DecayConstants",
    "design_deadbeat_gain",
    "verify_nilpotent",
    "design_observer_gain",
    "design_deadbeat_observer",
    "design_stabilizing_gain",
    "build_gain_set",
    "derive_decay_constants",
]

# A synthesized deadbeat gain must reach this residual, relative to
# inf_norm(a_d)**eta.  Printed gains truncated to a few decimals cannot and
# are verified by callers against their own looser threshold.
NILPOTENCY_RTOL = 1e-8

# Power scan limits for decay-constant extraction.
DECAY_SCAN_CAP = 512
DECAY_SCAN_FLOOR = 1e-14


@dataclass(frozen=True)
class GainSet:
    """Synthesized or injected closed-loop gains.

    ``error_transition`` is ``a_lift (I - observer_gain c)`` -- the slotwise
    transition of the estimation error; ``closed_loop`` is
    ``a_d + b_d controller_gain``.
    """

    controller_gain: np.ndarray
    observer_gain: np.ndarray
    error_transition: np.ndarray
    closed_loop: np.ndarray
    deadbeat_observer: bool = False


@dataclass(frozen=True)
class DecayConstants:
    """Geometric envelopes on powers of the closed matrices.

    With ``r`` the error transition and ``rbar`` the closed loop, for every
    scanned power ``l``::

        inf_norm(r^l)                                   <= a0 * rho^l
        inf_norm(r^l a_lift m)                          <= a1 * rho^l
        sum_i inf_norm(r^l a_d^(eta-i-1) b_d) * s_i     <= a2 * rho^l

    where ``s_i = inf_norm(k rbar^i m)``.  ``h0, h1`` are the analogous
    constants for a predictor matrix ``a_d - l_obs c`` when one is supplied,
    and ``g0, g1`` alias ``a0, a1`` (the output-only scheme bounds the same
    two quantities).
    """

    rho: float
    a0: float
    a1: float
    a2: float
    g0: float
    g1: float
    h0: float | None
    h1: float | None
    max_power_used: int


def _select_chains(a: np.ndarray, b: np.ndarray, tol: float):
    """Degree-first independent-column selection from [b, ab, a^2 b, ...].

    Returns per-input chain lengths and the selected columns grouped by
    input chain.  Once a power of an input column goes dependent, higher
    powers of that input are dependent too, so the input is retired.
    """
    n = a.shape[0]
    m = b.shape[1]
    col_scale = max(1.0, float(np.max(np.abs(b))))
    ortho: list[np.ndarray] = []
    chains: list[list[np.ndarray]] = [[] for _ in range(m)]
    current = [b[:, j].copy() for j in range(m)]
    active = list(range(m))
    selected = 0
    while active and selected < n:
        surviving = []
        for j in active:
            v = current[j]
            w = v.copy()
            for u in ortho:
                w -= (u @ w) * u
            # re-orthogonalize once; classical GS alone loses accuracy
            for u in ortho:
                w -= (u @ w) * u
            norm_w = float(np.linalg.norm(w))
            if norm_w > tol * max(float(np.linalg.norm(v)), col_scale):
                ortho.append(w / norm_w)
                chains[j].append(v.copy())
                surviving.append(j)
                selected += 1
                if selected == n:
                    break
        active = surviving
        for j in active:
            current[j] = a @ current[j]
    return [len(ch) for ch in chains], chains


def _deadbeat_feedback(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Feedback k with (a + b k)^eta = 0, eta the controllability index."""
    a = as_matrix(a, square=True)
    b = as_matrix(b)
    n = a.shape[0]
    m = b.shape[1]
    lengths, chains = _select_chains(a, b, tol)
    if sum(lengths) != n:
        raise UncontrollablePairError(
            f"selected only {sum(lengths)} independent columns of {n}"
        )
    basis = np.column_stack([col for ch in chains for col in ch])
    basis_inv = solve_linear(basis, np.eye(n))
    rcond = 1.0 / (inf_norm(basis) * inf_norm(basis_inv))
    if rcond < 1e-10:
        raise IllConditionedBasisError(
            f"staircase basis reciprocal condition {rcond:.2e} below 1e-10"
        )
    live = [j for j in range(m) if lengths[j] > 0]
    ends = np.cumsum([lengths[j] for j in live])
    # q_i: the basis-inverse row dual to the last column of chain i.  It
    # annihilates every selected column except that one, which makes the
    # transformed system block-companion: the only rows of a + b k that are
    # not pure shifts are q_i a^(mu_i), and q_i a^(mu_i - 1) b is the i-th
    # row of an invertible coupling matrix.
    gamma = np.zeros((len(live), len(live)))
    high = np.zeros((len(live), n))
    for i, j in enumerate(live):
        q = basis_inv[ends[i] - 1]
        q_am = q @ mat_pow(a, lengths[j] - 1)
        gamma[i] = (q_am @ b)[live]
        high[i] = q_am @ a
    k_live = -solve_linear(gamma, high)
    k = np.zeros((m, n))
    for i, j in enumerate(live):
        k[j] = k_live[i]
    return k


def design_deadbeat_gain(dp: DiscretePlant) -> np.ndarray:
    """Controller gain k with ``(a_d + b_d k)^eta = 0``.

    The residual is checked against ``NILPOTENCY_RTOL`` relative to
    ``inf_norm(a_d)**eta``; the construction is exact in real arithmetic so
    anything larger signals a conditioning problem.
    """
    k = _deadbeat_feedback(dp.a_d, dp.b_d)
    residual = verify_nilpotent(dp.a_d, dp.b_d, k, dp.eta)
    bound = NILPOTENCY_RTOL * inf_norm(dp.a_d) ** dp.eta
    if residual > bound:
        raise IllConditionedBasisError(
            f"deadbeat residual {residual:.3e} exceeds {bound:.3e}"
        )
    return k


def verify_nilpotent(a_d, b_d, k, eta: int) -> float:
    """Residual ``inf_norm((a_d + b_d k)^eta)`` for caller-side thresholds."""
    closed = as_matrix(a_d, square=True) + as_matrix(b_d) @ as_matrix(k)
    return inf_norm(mat_pow(closed, eta))


def design_observer_gain(
    a_lift,
    c,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    radius_power: int = DECAY_SCAN_CAP,
    rtol: float = 0.0,
) -> np.ndarray:
    """Steady-state filter gain m for the pair (c, a_lift).

    Iterates ``p <- a (p - p c' (c p c' + I)^-1 c p) a' + I`` from ``p = I``
    until the update stalls below ``tol`` (plus ``rtol`` relative to the
    iterate, for badly scaled duals) in inf-norm, then returns
    ``m = p c' (c p c' + I)^-1`` and certifies that
    ``a_lift (I - m c)`` has Gelfand bound below one.
    """
    a = as_matrix(a_lift, square=True)
    c = as_matrix(c)
    n = a.shape[0]
    p = np.eye(n)
    for _ in range(max_iter):
        s = c @ p @ c.T + np.eye(c.shape[0])
        gain = solve_linear(s, c @ p)  # s^-1 c p
        p_next = a @ (p - p @ c.T @ gain) @ a.T + np.eye(n)
        p_next = 0.5 * (p_next + p_next.T)
        if inf_norm(p_next - p) < tol + rtol * inf_norm(p_next):
            p = p_next
            break
        p = p_next
    else:
        raise RiccatiConvergenceError(
            f"Riccati iteration did not stall within {max_iter} steps"
        )
    s = c @ p @ c.T + np.eye(c.shape[0])
    m = solve_linear(s.T, (p @ c.T).T).T
    closed = a @ (np.eye(n) - m @ c)
    bound = gelfand_radius(closed, radius_power)
    if bound >= 1.0:
        raise StabilityCertificationError(
            f"error transition not certified Schur (Gelfand bound {bound:.4f})"
        )
    return m


def design_deadbeat_observer(a_lift, c, mu: int) -> np.ndarray:
    """Observer gain m with ``(a_lift (I - m c))^mu = 0``.

    Dual of the deadbeat feedback applied to ``(a_lift', c')``; since
    ``a_lift`` is a matrix exponential it is invertible, which converts the
    dual gain into the reset form used here.
    """
    a = as_matrix(a_lift, square=True)
    c = as_matrix(c)
    k_dual = _deadbeat_feedback(a.T, c.T)
    m = solve_linear(a, -k_dual.T)
    closed = a @ (np.eye(a.shape[0]) - m @ c)
    residual = inf_norm(mat_pow(closed, mu))
    bound = NILPOTENCY_RTOL * inf_norm(a) ** mu
    if residual > bound:
        raise IllConditionedBasisError(
            f"deadbeat observer residual {residual:.3e} exceeds {bound:.3e}"
        )
    return m


def design_stabilizing_gain(
    a_d,
    b_d,
    control_weight: float = 1.0,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    radius_power: int = DECAY_SCAN_CAP,
) -> np.ndarray:
    """Schur-stabilizing (non-deadbeat) feedback via the control Riccati dual.

    Used by the output-channel schemes, which only require a stable closed
    loop and whose mismatch analysis degenerates under a nilpotent one.
    Raising ``control_weight`` penalizes input effort and slows the closed
    loop toward the reflected open-loop spectrum.
    """
    a = as_matrix(a_d, square=True)
    b = as_matrix(b_d)
    scaled = b / np.sqrt(control_weight)
    m_dual = design_observer_gain(a.T, scaled.T, tol, max_iter, radius_power,
                                  rtol=1e-12)
    k = -(m_dual.T @ a) / np.sqrt(control_weight)
    bound = gelfand_radius(a + b @ k, radius_power)
    if bound >= 1.0:
        raise StabilityCertificationError(
            f"closed loop not certified Schur (Gelfand bound {bound:.4f})"
        )
    return k


def build_gain_set(dp: DiscretePlant, observer: str = "kalman") -> GainSet:
    """Synthesize the full gain set for a protocol-form plant."""
    k = design_deadbeat_gain(dp)
    if observer == "kalman":
        m = design_observer_gain(dp.a_lift, dp.c)
        deadbeat_observer = False
    elif observer == "deadbeat":
        m = design_deadbeat_observer(dp.a_lift, dp.c, dp.mu)
        deadbeat_observer = True
    else:
        raise ValueError(f"unknown observer mode {observer!r}")
    return make_gain_set(dp, k, m, deadbeat_observer)


def make_gain_set(dp: DiscretePlant, k, m, deadbeat_observer: bool = False) -> GainSet:
    """Assemble a GainSet from explicit (possibly injected) gains."""
    k = as_matrix(k)
    m = as_matrix(m)
    n = dp.n_x
    return GainSet(
        controller_gain=k,
        observer_gain=m,
        error_transition=dp.a_lift @ (np.eye(n) - m @ dp.c),
        closed_loop=dp.a_d + dp.b_d @ k,
        deadbeat_observer=deadbeat_observer,
    )


def _scan_constants(r: np.ndarray, rho: float, quantities) -> tuple[list[float], int]:
    """Max of quantity(l)/rho^l over l = 1..L, L the first power of r below
    the floor.  Returns the per-quantity maxima and L.

    The sup over all l is attained in the scanned range: submultiplying any
    tail power through r^L multiplies its ratio by inf_norm(r^L)/rho^L <= 1,
    which is asserted on exit.
    """
    best = [0.0] * len(quantities)
    power = np.eye(r.shape[0])
    rho_l = 1.0
    for ell in range(1, DECAY_SCAN_CAP + 1):
        power = power @ r
        rho_l *= rho
        for i, quantity in enumerate(quantities):
            best[i] = max(best[i], quantity(power) / rho_l)
        norm = inf_norm(power)
        if norm < DECAY_SCAN_FLOOR:
            if norm > rho_l:
                raise StabilityCertificationError(
                    "tail justification failed: inf_norm(r^L) exceeds rho^L"
                )
            return best, ell
    raise StabilityCertificationError(
        f"no power of the closed matrix dropped below {DECAY_SCAN_FLOOR} "
        f"within {DECAY_SCAN_CAP} steps"
    )


def derive_decay_constants(
    gs: GainSet, dp: DiscretePlant, l_obs=None
) -> DecayConstants:
    """Extract the geometric decay constants for a gain set.

    ``rho`` is the midpoint between the certified Gelfand bound of the
    closed matrices and one -- deterministic and reproducible.  Every
    constant is the max of its quantity over the scanned powers divided by
    ``rho^l``, so the defining inequalities hold exhaustively there and the
    geometric tail is covered by the floor assertion in the scan.
    """
    r = gs.error_transition
    radii = [gelfand_radius(r, DECAY_SCAN_CAP)]
    pi_l = None
    if l_obs is not None:
        l_obs = as_matrix(l_obs)
        pi_l = dp.a_lift - l_obs @ dp.c
        radii.append(gelfand_radius(pi_l, DECAY_SCAN_CAP))
    worst = max(radii)
    if worst >= 1.0:
        raise StabilityCertificationError(
            f"Gelfand bound {worst:.4f} is not below one; cannot pick rho"
        )
    rho = (worst + 1.0) / 2.0

    lifted_m = dp.a_lift @ gs.observer_gain
    input_cols = [
        mat_pow(dp.a_d, dp.eta - i - 1) @ dp.b_d for i in range(dp.eta)
    ]
    input_weights = [
        inf_norm(gs.controller_gain @ mat_pow(gs.closed_loop, i) @ gs.observer_gain)
        for i in range(dp.eta)
    ]
    (a0, a1, a2), used = _scan_constants(
        r,
        rho,
        (
            inf_norm,
            lambda p: inf_norm(p @ lifted_m),
            lambda p: sum(
                inf_norm(p @ col) * w for col, w in zip(input_cols, input_weights)
            ),
        ),
    )
    h0 = h1 = None
    if pi_l is not None:
        (h0, h1), used_l = _scan_constants(
            pi_l, rho, (inf_norm, lambda p: inf_norm(p @ l_obs))
        )
        used = max(used, used_l)
    return DecayConstants(
        rho=rho, a0=a0, a1=a1, a2=a2, g0=a0, g1=a1, h0=h0, h1=h1,
        max_power_used=used,
    )
