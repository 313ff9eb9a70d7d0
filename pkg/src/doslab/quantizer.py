"""Uniform hypercube quantizer codecs and event-driven range states.

A codec partitions the hypercube ``{v : |v - center| <= range}`` into
``levels`` equal boxes per component; an index names the box holding the
value and decodes to that box's center.  Range states implement the
per-slot update laws: the range expands during attacked slots, pays a
resynchronization factor on the first success after an attack, and
contracts on consecutive successes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .conditions import ThetaSet
from .errors import SaturationError
from .gains import GainSet
from .matrixcore import as_vector, inf_norm, mat_pow

__all__ = [
    "UniformCodec",
    "QuantIndex",
    "RangeScheme",
    "RangeState",
    "Outcome",
    "encode",
    "decode",
    "quantization_error_bound",
    "update_range",
    "derive_input_range",
    "initial_ranges",
    "classify_outcome",
]


@dataclass(frozen=True)
class UniformCodec:
    """Level count and vector dimension of one quantized channel."""

    levels: int
    dim: int

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be at least 1")
        if self.dim < 1:
            raise ValueError("dim must be at least 1")


@dataclass(frozen=True)
class QuantIndex:
    """Per-component box indices, each in [0, levels-1]."""

    cells: tuple[int, ...]

    def to_wire(self, codec: UniformCodec) -> int:
        """Row-major mixed-radix flattening, fits an unsigned 64-bit field."""
        word = 0
        for cell in self.cells:
            word = word * codec.levels + cell
        return word

    @classmethod
    def from_wire(cls, word: int, codec: UniformCodec) -> "QuantIndex":
        cells = []
        for _ in range(codec.dim):
            cells.append(word % codec.levels)
            word //= codec.levels
        return cls(cells=tuple(reversed(cells)))


class Outcome(Enum):
    ATTACKED = "attacked"
    FIRST_SUCCESS_AFTER_ATTACK = "first_success"
    CONSECUTIVE_SUCCESS = "consecutive_success"


class RangeScheme(Enum):
    CONSTANT = "constant"                  # estimated-output channel, frozen
    INPUT = "input"                        # derived from the output range
    OUTPUT_DUAL = "output_dual"
    OUTPUT_ACK = "output_ack"
    OUTPUT_ACK_FREE = "output_ack_free"
    MISMATCH_ENCODER = "mismatch_encoder"  # never observes attacks
    MISMATCH_DECODER = "mismatch_decoder"


_THREE_BRANCH = {
    RangeScheme.OUTPUT_DUAL,
    RangeScheme.OUTPUT_ACK,
    RangeScheme.OUTPUT_ACK_FREE,
    RangeScheme.MISMATCH_DECODER,
}


@dataclass(frozen=True)
class RangeState:
    """Current bound with the law that evolves it.

    ``slot`` counts applied updates; ``prev_attacked`` is the branch memory
    of the three-branch law.  A zero bound is legal only for the constant
    scheme (the estimated-output channel starts and stays at zero) or a
    zero initial state bound.
    """

    value: float
    scheme: RangeScheme
    thetas: ThetaSet
    prev_attacked: bool = False
    slot: int = 0

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("range must be nonnegative")


def classify_outcome(attacked: bool, prev_attacked: bool, slot: int) -> Outcome:
    """Branch selection for slot ``slot``.

    A successful initial slot counts as a first success: there is no prior
    successful transmission, which is the same branch condition an attack
    recovery satisfies.
    """
    if attacked:
        return Outcome.ATTACKED
    if slot == 0 or prev_attacked:
        return Outcome.FIRST_SUCCESS_AFTER_ATTACK
    return Outcome.CONSECUTIVE_SUCCESS


def encode(
    v,
    center,
    rng: float,
    codec: UniformCodec,
    clip: bool = False,
) -> QuantIndex:
    """Index of the box containing ``v`` in the hypercube around ``center``.

    Raises :class:`SaturationError` when any component of ``v - center``
    exceeds ``rng`` in magnitude -- the failure mode the stability
    conditions preclude -- unless ``clip`` maps out-of-range values to the
    nearest box (used only by the divergence demonstration).  Points on a
    shared box boundary go to the lower-index box.
    """
    v = as_vector(v, codec.dim)
    center = as_vector(center, codec.dim)
    if rng < 0.0:
        raise ValueError("range must be nonnegative")
    offset = v - center
    worst = float(np.max(np.abs(offset))) if offset.size else 0.0
    if worst > rng and not clip:
        raise SaturationError(
            f"value leaves its quantization range: |v - center| = {worst:.6g} "
            f"> {rng:.6g}"
        )
    if rng == 0.0:
        return QuantIndex(cells=((codec.levels - 1) // 2,) * codec.dim)
    n = codec.levels
    cells = []
    for u in (offset + rng) * n / (2.0 * rng):
        cell = int(math.ceil(u)) - 1
        cells.append(min(max(cell, 0), n - 1))
    return QuantIndex(cells=tuple(cells))


def decode(idx: QuantIndex, center, rng: float, codec: UniformCodec) -> np.ndarray:
    """Center of the indexed box: ``center + (2 cell + 1 - N) * rng/N``.

    The offset form keeps the grid geometry exact in floating point: the
    decoded value differs from the true value by at most ``rng/N``, and for
    even ``N`` around a zero center no component can be zero -- the
    property the ACK-free attack inference relies on.
    """
    center = as_vector(center, codec.dim)
    if len(idx.cells) != codec.dim:
        raise ValueError("index dimension does not match codec")
    cells = np.array(idx.cells, dtype=float)
    if np.any(cells < 0) or np.any(cells >= codec.levels):
        raise ValueError("index cells out of range for codec")
    return center + (2.0 * cells + 1.0 - codec.levels) * (rng / codec.levels)


def quantization_error_bound(rng: float, codec: UniformCodec) -> float:
    """Worst-case distance between a value and its decoded box center."""
    return rng / codec.levels


def update_range(rs: RangeState, outcome: Outcome) -> RangeState:
    """Apply one slot's branch factor and advance the state.

    The constant scheme never changes; the mismatch-encoder scheme cannot
    observe attacks and applies its two-branch law (resync factor on the
    initial slot, steady contraction after) regardless of the outcome.
    The input scheme is not updated here: its bound is derived from the
    output bound at each successful slot (see :func:`derive_input_range`).
    """
    if rs.scheme is RangeScheme.CONSTANT:
        return replace(rs, slot=rs.slot + 1,
                       prev_attacked=outcome is Outcome.ATTACKED)
    if rs.scheme is RangeScheme.INPUT:
        raise ValueError("input ranges are derived, not updated per slot")
    th = rs.thetas
    if rs.scheme is RangeScheme.MISMATCH_ENCODER:
        factor = th.theta_first if rs.slot == 0 else th.theta_steady
    elif rs.scheme in _THREE_BRANCH:
        factor = {
            Outcome.ATTACKED: th.theta_attack,
            Outcome.FIRST_SUCCESS_AFTER_ATTACK: th.theta_first,
            Outcome.CONSECUTIVE_SUCCESS: th.theta_steady,
        }[outcome]
    else:
        raise ValueError(f"unknown scheme {rs.scheme!r}")
    return replace(
        rs,
        value=rs.value * factor,
        slot=rs.slot + 1,
        prev_attacked=outcome is Outcome.ATTACKED,
    )


def derive_input_range(
    e3: float, k_step: int, gs: GainSet, codec3: UniformCodec
) -> float:
    """Input bound at sub-step ``k_step`` of a successful slot.

    The closed loop expresses the input as a gain acting on the decoded
    output innovation, whose magnitude is at most ``(n3-1)/n3`` of the
    output range.  During attacked slots no input is transmitted and the
    previous value is held by the caller.
    """
    if k_step < 0:
        raise ValueError("k_step must be nonnegative")
    gain = inf_norm(
        gs.controller_gain @ mat_pow(gs.closed_loop, k_step) @ gs.observer_gain
    )
    n3 = codec3.levels
    return (n3 - 1) / n3 * gain * e3


def initial_ranges(x0_bound: float, c) -> tuple[float, float, float]:
    """Initial bounds for the three dual-channel quantizers.

    The estimated output and the input start at zero because the estimate
    starts at zero; the output bound covers ``|C x0|``.
    """
    if x0_bound < 0.0:
        raise ValueError("x0_bound must be nonnegative")
    return 0.0, 0.0, inf_norm(c) * x0_bound
