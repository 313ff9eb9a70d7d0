"""Closed-loop simulation engines.

Four engines step plant, encoders, decoders, controller, and range states
in lockstep and record a full trace:

* :func:`run_dual_channel` -- both channels jammed together; deadbeat
  feedback, lifted observer reset, three quantized signals.
* :func:`run_output_ack`   -- output channel only, encoder kept in sync by
  instant acknowledgments; single-rate predictor on both sides.
* :func:`run_output_ackfree` -- output channel only, no acknowledgments;
  the encoder infers attacks from exactly-zero inputs.
* :func:`run_mismatch_demo` -- the ACK-based scheme misused without ACKs;
  a single attack desynchronizes the predictors and the run exhibits the
  resulting divergence instead of treating saturation as fatal.

Plant propagation between sub-steps uses the exact discretization; an
oversample factor adds intra-step points computed from the exponential on
the residual interval, so no integrator error enters the invariants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .conditions import ThetaSet, ThetaVariant, compute_thetas
from .discretize import (
    ContinuousPlant,
    DiscretePlant,
    discretize,
    sample_plant,
    sample_plant_single_rate,
)
from .dos import DoSParams, DoSPattern, generate
from .errors import (
    DeadbeatContractError,
    InferenceMismatchError,
    SaturationError,
    ScenarioError,
)
from .gains import (
    GainSet,
    build_gain_set,
    derive_decay_constants,
    design_deadbeat_observer,
    design_observer_gain,
    design_stabilizing_gain,
    make_gain_set,
)
from .matrixcore import as_vector, inf_norm, mat_pow
from .quantizer import (
    RangeScheme,
    RangeState,
    UniformCodec,
    classify_outcome,
    decode,
    derive_input_range,
    encode,
    initial_ranges,
    update_range,
)

__all__ = [
    "Scenario",
    "SimConfig",
    "LoopTrace",
    "run_dual_channel",
    "run_output_ack",
    "run_output_ackfree",
    "run_mismatch_demo",
    "run_scenario",
]

# |C xhat| at the end of every slot must vanish under a deadbeat gain; the
# residual is floating-point noise and anything above this is a bad gain.
DEADBEAT_NULL_TOL = 1e-9

# The divergence demo stops stepping once the state norm passes this; the
# point has been made and further arithmetic would overflow.
DIVERGENCE_CAP = 1e12


class Scenario(Enum):
    DUAL_CHANNEL = "dual_channel"
    OUTPUT_ACK = "output_ack"
    OUTPUT_ACK_FREE = "output_ackfree"
    MISMATCH_DEMO = "mismatch_demo"


@dataclass
class SimConfig:
    """Everything one closed-loop run needs.

    ``levels`` is an ``(n1, n2, n3)`` triple for the dual-channel scenario
    and a single integer for the output-channel scenarios.  ``gains`` may
    be a ready :class:`GainSet` or ``None`` to synthesize.  The attack
    pattern comes either ready-made or from ``(dos_params, seed,
    intensity)``.
    """

    plant: ContinuousPlant
    big_delta: float
    x0: np.ndarray
    x0_bound: float
    scenario: Scenario
    horizon_slots: int
    levels: tuple[int, int, int] | int
    pattern: DoSPattern | None = None
    dos_params: DoSParams | None = None
    seed: int = 0
    intensity: float = 0.5
    gains: GainSet | None = None
    observer: str = "kalman"
    control_weight: float = 1.0
    oversample: int = 1
    attack_slot: int | None = None

    def __post_init__(self):
        self.x0 = as_vector(self.x0, self.plant.n_x)
        if self.x0_bound < 0:
            raise ScenarioError("x0_bound must be nonnegative")
        if inf_norm(self.x0) > self.x0_bound:
            raise ScenarioError("|x0| exceeds x0_bound")
        if self.horizon_slots < 1:
            raise ScenarioError("horizon_slots must be at least 1")
        if self.oversample < 1:
            raise ScenarioError("oversample must be a positive integer")


@dataclass
class LoopTrace:
    """Full per-sub-step time series plus per-slot diagnostic tables."""

    scenario: Scenario
    t: np.ndarray
    q: np.ndarray
    k: np.ndarray
    x: np.ndarray
    x_hat: np.ndarray
    u_sent: np.ndarray
    u_applied: np.ndarray
    y: np.ndarray
    ranges: dict[str, np.ndarray]
    outcome: list[str]
    saturated: np.ndarray
    inferred_attack: np.ndarray
    slots: dict[str, np.ndarray]
    final_state: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        header = ["t", "q", "k"]
        header += [f"x_{i}" for i in range(self.x.shape[1])]
        header += [f"xhat_{i}" for i in range(self.x_hat.shape[1])]
        header += [f"u_sent_{i}" for i in range(self.u_sent.shape[1])]
        header += [f"u_applied_{i}" for i in range(self.u_applied.shape[1])]
        header += [f"y_{i}" for i in range(self.y.shape[1])]
        header += list(self.ranges.keys())
        header += ["outcome", "saturated", "inferred_attack"]
        fmt = "{:.17g}".format
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(len(self.t)):
                row = [fmt(self.t[i]), str(int(self.q[i])), str(int(self.k[i]))]
                row += [fmt(v) for v in self.x[i]]
                row += [fmt(v) for v in self.x_hat[i]]
                row += [fmt(v) for v in self.u_sent[i]]
                row += [fmt(v) for v in self.u_applied[i]]
                row += [fmt(v) for v in self.y[i]]
                row += [fmt(col[i]) for col in self.ranges.values()]
                row += [
                    self.outcome[i],
                    str(int(self.saturated[i])),
                    str(int(self.inferred_attack[i])),
                ]
                fh.write(",".join(row) + "\n")


class _TraceBuilder:
    def __init__(self, scenario, range_names):
        self.scenario = scenario
        self.range_names = range_names
        self.rows = {name: [] for name in
                     ("t", "q", "k", "x", "x_hat", "u_sent", "u_applied", "y",
                      "outcome", "saturated", "inferred")}
        self.range_rows = {name: [] for name in range_names}
        self.slots = {}

    def add_row(self, t, q, k, x, x_hat, u_sent, u_applied, y, ranges,
                outcome, saturated, inferred):
        r = self.rows
        r["t"].append(t)
        r["q"].append(q)
        r["k"].append(k)
        r["x"].append(np.array(x))
        r["x_hat"].append(np.array(x_hat))
        r["u_sent"].append(np.array(u_sent))
        r["u_applied"].append(np.array(u_applied))
        r["y"].append(np.array(y))
        for name, value in zip(self.range_names, ranges):
            self.range_rows[name].append(value)
        r["outcome"].append(outcome.value)
        r["saturated"].append(saturated)
        r["inferred"].append(inferred)

    def add_slot(self, **values):
        for name, value in values.items():
            self.slots.setdefault(name, []).append(value)

    def build(self, final_state, meta=None):
        r = self.rows
        return LoopTrace(
            scenario=self.scenario,
            t=np.array(r["t"]),
            q=np.array(r["q"], dtype=int),
            k=np.array(r["k"], dtype=int),
            x=np.vstack(r["x"]),
            x_hat=np.vstack(r["x_hat"]),
            u_sent=np.vstack(r["u_sent"]),
            u_applied=np.vstack(r["u_applied"]),
            y=np.vstack(r["y"]),
            ranges={n: np.array(v) for n, v in self.range_rows.items()},
            outcome=r["outcome"],
            saturated=np.array(r["saturated"], dtype=bool),
            inferred_attack=np.array(r["inferred"], dtype=bool),
            slots={n: np.array(v) for n, v in self.slots.items()},
            final_state=np.array(final_state),
            meta=meta or {},
        )


def _resolve_pattern(cfg: SimConfig) -> DoSPattern:
    if cfg.pattern is not None:
        if cfg.pattern.horizon < cfg.horizon_slots:
            raise ScenarioError(
                f"pattern covers {cfg.pattern.horizon} slots, "
                f"run needs {cfg.horizon_slots}"
            )
        return cfg.pattern
    if cfg.dos_params is None:
        raise ScenarioError("either a pattern or DoS parameters are required")
    return generate(cfg.dos_params, cfg.horizon_slots, cfg.seed, cfg.intensity)


def _oversample_maps(plant, delta, oversample):
    """(a_tau, b_tau) pairs for the intra-step offsets j*delta/oversample."""
    maps = []
    for j in range(1, oversample):
        maps.append(discretize(plant.a, plant.b, j * delta / oversample))
    return maps


def run_dual_channel(cfg: SimConfig) -> LoopTrace:
    """Dual-channel loop: attacks blot out both channels for a whole slot.

    On a successful slot the controller resets its estimate from the
    quantized output innovation and emits ``eta`` quantized inputs; during
    an attacked slot the plant coasts with zero input and the controller
    holds its (identically zero) open-loop estimate.  The estimated-output
    quantizer is degenerate by construction: the deadbeat gain drives the
    estimate exactly to zero at the end of every slot, which is asserted
    each slot before the zero is reused as the next quantization center.
    """
    if cfg.scenario is not Scenario.DUAL_CHANNEL:
        raise ScenarioError("config is not a dual-channel scenario")
    plant = cfg.plant
    try:
        n1, n2, n3 = cfg.levels
    except (TypeError, ValueError):
        raise ScenarioError(
            "dual-channel runs need an (n1, n2, n3) triple"
        ) from None
    if n1 < 1 or n1 % 2 == 0:
        raise ScenarioError("n1 must be odd (and at least 1)")
    dp = sample_plant(plant, cfg.big_delta)
    gs = cfg.gains if cfg.gains is not None else build_gain_set(dp, cfg.observer)
    dc = derive_decay_constants(gs, dp)
    thetas = compute_thetas(ThetaVariant.DUAL, dc, dp, (n1, n2, n3))
    pattern = _resolve_pattern(cfg)

    n_x, n_u, n_y = plant.n_x, plant.n_u, plant.n_y
    codec1 = UniformCodec(n1, n_y)
    codec2 = UniformCodec(n2, n_u)
    codec3 = UniformCodec(n3, n_y)
    e1, _, e3 = initial_ranges(cfg.x0_bound, plant.c)
    rs1 = RangeState(e1, RangeScheme.CONSTANT, thetas)
    rs3 = RangeState(e3, RangeScheme.OUTPUT_DUAL, thetas)
    enc3 = RangeState(e3, RangeScheme.OUTPUT_DUAL, thetas)
    e2_held = [0.0] * dp.eta

    x = cfg.x0.copy()
    xh_eta = np.zeros(n_x)  # estimate carried across slots; exactly zero
    zero_y = np.zeros(n_y)
    zero_u = np.zeros(n_u)
    os_maps = _oversample_maps(plant, dp.delta, cfg.oversample)
    tb = _TraceBuilder(cfg.scenario, ("E1", "E2", "E3"))

    for q in range(cfg.horizon_slots):
        y = plant.c @ x
        attacked = pattern.attacked(q)
        outcome = classify_outcome(attacked, rs3.prev_attacked, q)
        tb.add_slot(
            attacked=attacked,
            e3=rs3.value,
            y_err=inf_norm(y),  # center is the zero vector every slot
        )
        if attacked:
            xh = xh_eta
        else:
            idx1 = encode(zero_y, zero_y, rs1.value, codec1)
            center3 = decode(idx1, zero_y, rs1.value, codec1)
            try:
                idx3 = encode(y, center3, rs3.value, codec3)
            except SaturationError as exc:
                raise SaturationError(
                    f"output quantizer saturated at slot {q}: {exc}",
                    slot=q, channel="output",
                ) from exc
            q3 = decode(idx3, center3, rs3.value, codec3)
            xh = xh_eta + gs.observer_gain @ (q3 - center3)
            for k in range(dp.eta):
                e2_held[k] = derive_input_range(rs3.value, k, gs, codec3)

        for k in range(dp.eta):
            e2_k = e2_held[k]
            if attacked:
                u = zero_u
                ua = zero_u
            else:
                u = gs.controller_gain @ xh
                try:
                    idx2 = encode(u, zero_u, e2_k, codec2)
                except SaturationError as exc:
                    raise SaturationError(
                        f"input quantizer saturated at slot {q}.{k}: {exc}",
                        slot=q, substep=k, channel="input",
                    ) from exc
                ua = decode(idx2, zero_u, e2_k, codec2)
            t0 = q * cfg.big_delta + k * dp.delta
            tb.add_row(t0, q, k, x, xh, u, ua, plant.c @ x,
                       (rs1.value, e2_k, rs3.value), outcome, False, attacked)
            for j, (a_t, b_t) in enumerate(os_maps, start=1):
                xs = a_t @ x + b_t @ ua
                tb.add_row(t0 + j * dp.delta / cfg.oversample, q, k, xs, xh,
                           u, ua, plant.c @ xs,
                           (rs1.value, e2_k, rs3.value), outcome, False,
                           attacked)
            x = dp.a_d @ x + dp.b_d @ ua
            xh = dp.a_d @ xh + dp.b_d @ u

        residual = inf_norm(plant.c @ xh)
        if residual > DEADBEAT_NULL_TOL:
            raise DeadbeatContractError(
                f"|C xhat| = {residual:.3e} at the end of slot {q}; "
                "the feedback gain is not deadbeat for this plant"
            )
        tb.add_slot(deadbeat_residual=residual, x_norm=inf_norm(x))
        xh_eta = np.zeros(n_x)
        rs1 = update_range(rs1, outcome)
        rs3 = update_range(rs3, outcome)
        enc3 = update_range(enc3, outcome)
        if rs3.value != enc3.value:
            raise InferenceMismatchError(
                f"encoder/decoder output ranges diverged at slot {q}"
            )

    return tb.build(final_state=x, meta={
        "dp": dp, "gains": gs, "constants": dc, "thetas": thetas,
        "pattern": pattern,
    })


def run_output_ack(cfg: SimConfig) -> LoopTrace:
    """Output channel with instant acknowledgments, single-rate predictors.

    The encoder and decoder each run the predictor; acknowledgments keep
    their branch choices identical, which the run asserts bit-exactly.
    The input channel is ideal: the plant receives the computed input.
    """
    if cfg.scenario is not Scenario.OUTPUT_ACK:
        raise ScenarioError("config is not an output-ACK scenario")
    plant = cfg.plant
    n = int(cfg.levels)
    dps = sample_plant_single_rate(plant, cfg.big_delta)
    gs, l_obs = _single_rate_gains(cfg, dps)
    dc = derive_decay_constants(gs, dps, l_obs=l_obs)
    thetas = compute_thetas(ThetaVariant.ACK, dc, dps, n)
    pattern = _resolve_pattern(cfg)
    codec = UniformCodec(n, plant.n_y)
    norm_c = inf_norm(plant.c)

    rs_dec = RangeState(cfg.x0_bound, RangeScheme.OUTPUT_ACK, thetas)
    rs_enc = RangeState(cfg.x0_bound, RangeScheme.OUTPUT_ACK, thetas)
    x = cfg.x0.copy()
    xh = np.zeros(plant.n_x)
    os_maps = _oversample_maps(plant, dps.delta, cfg.oversample)
    tb = _TraceBuilder(cfg.scenario, ("E",))

    for q in range(cfg.horizon_slots):
        y = plant.c @ x
        attacked = pattern.attacked(q)
        outcome = classify_outcome(attacked, rs_dec.prev_attacked, q)
        if rs_enc.value != rs_dec.value:
            raise InferenceMismatchError(
                f"ACK protocol lost encoder/decoder lockstep at slot {q}"
            )
        u = gs.controller_gain @ xh
        yh = plant.c @ xh
        tb.add_slot(attacked=attacked, e=rs_dec.value,
                    err_norm=inf_norm(x - xh), x_norm=inf_norm(x))
        if attacked:
            xh_next = dps.a_d @ xh + dps.b_d @ u
        else:
            rng = norm_c * rs_dec.value
            try:
                idx = encode(y, yh, rng, codec)
            except SaturationError as exc:
                raise SaturationError(
                    f"output quantizer saturated at slot {q}: {exc}",
                    slot=q, channel="output",
                ) from exc
            qv = decode(idx, yh, rng, codec)
            xh_next = dps.a_d @ xh + dps.b_d @ u + l_obs @ (qv - yh)
        t0 = q * cfg.big_delta
        tb.add_row(t0, q, 0, x, xh, u, u, y, (rs_dec.value,), outcome,
                   False, attacked)
        for j, (a_t, b_t) in enumerate(os_maps, start=1):
            xs = a_t @ x + b_t @ u
            tb.add_row(t0 + j * dps.delta / cfg.oversample, q, 0, xs, xh, u, u,
                       plant.c @ xs, (rs_dec.value,), outcome, False, attacked)
        x = dps.a_d @ x + dps.b_d @ u
        xh = xh_next
        rs_dec = update_range(rs_dec, outcome)
        rs_enc = update_range(rs_enc, outcome)

    return tb.build(final_state=x, meta={
        "dp": dps, "gains": gs, "constants": dc, "thetas": thetas,
        "pattern": pattern, "l_obs": l_obs,
    })


def _single_rate_gains(cfg: SimConfig, dps: DiscretePlant):
    """Stabilizing feedback plus predictor gain for the single-rate schemes."""
    if cfg.gains is not None:
        gs = cfg.gains
    else:
        k = design_stabilizing_gain(dps.a_d, dps.b_d, cfg.control_weight)
        if cfg.observer == "deadbeat":
            m = design_deadbeat_observer(dps.a_d, dps.c, dps.mu)
        else:
            m = design_observer_gain(dps.a_d, dps.c)
        gs = make_gain_set(dps, k, m, deadbeat_observer=cfg.observer == "deadbeat")
    l_obs = dps.a_d @ gs.observer_gain
    return gs, l_obs


def run_output_ackfree(cfg: SimConfig) -> LoopTrace:
    """Output channel without acknowledgments.

    Only the decoder runs the observer; the quantization center is the
    origin because the deadbeat gain nulls the estimate every slot.  On an
    attacked slot the decoder's default-zero reception zeroes the estimate,
    so the whole next period's input is exactly zero; on a successful slot
    the even level count keeps the decoded output away from zero, so the
    input is nonzero.  The encoder watches the applied input and infers the
    attack state, which must match the true pattern in every valid run.
    """
    if cfg.scenario is not Scenario.OUTPUT_ACK_FREE:
        raise ScenarioError("config is not an output-ACK-free scenario")
    plant = cfg.plant
    n = int(cfg.levels)
    if n % 2 != 0:
        raise ScenarioError("the ACK-free scheme needs an even level count")
    dp = sample_plant(plant, cfg.big_delta)
    gs = cfg.gains if cfg.gains is not None else build_gain_set(dp, cfg.observer)
    dc = derive_decay_constants(gs, dp)
    thetas = compute_thetas(ThetaVariant.ACK_FREE, dc, dp, n)
    pattern = _resolve_pattern(cfg)
    codec = UniformCodec(n, plant.n_y)
    norm_c = inf_norm(plant.c)

    rs_dec = RangeState(cfg.x0_bound, RangeScheme.OUTPUT_ACK_FREE, thetas)
    rs_enc = RangeState(cfg.x0_bound, RangeScheme.OUTPUT_ACK_FREE, thetas)
    x = cfg.x0.copy()
    xh_eta = np.zeros(plant.n_x)
    zero_y = np.zeros(plant.n_y)
    os_maps = _oversample_maps(plant, dp.delta, cfg.oversample)
    tb = _TraceBuilder(cfg.scenario, ("E",))
    degenerate_inferences = 0

    for q in range(cfg.horizon_slots):
        y = plant.c @ x
        attacked = pattern.attacked(q)
        if rs_enc.value != rs_dec.value:
            raise InferenceMismatchError(
                f"encoder/decoder ranges diverged at slot {q}"
            )
        rng = norm_c * rs_dec.value
        tb.add_slot(attacked=attacked, e=rs_dec.value, x_norm=inf_norm(x),
                    y_err=inf_norm(y))
        if attacked:
            xh = np.zeros(plant.n_x)  # default-zero reception, exact
        else:
            try:
                idx = encode(y, zero_y, rng, codec)
            except SaturationError as exc:
                raise SaturationError(
                    f"output quantizer saturated at slot {q}: {exc}",
                    slot=q, channel="output",
                ) from exc
            qv = decode(idx, zero_y, rng, codec)
            xh = xh_eta + gs.observer_gain @ (qv - zero_y)
        rows = []
        all_zero = True
        for k in range(dp.eta):
            u = gs.controller_gain @ xh
            if attacked:
                u = np.zeros(plant.n_u)  # explicit branch, not arithmetic
            if np.any(u != 0.0):
                all_zero = False
            rows.append((k, x.copy(), xh.copy(), u))
            x = dp.a_d @ x + dp.b_d @ u
            xh = dp.a_d @ xh + dp.b_d @ u
        inferred = all_zero
        if rng == 0.0 and all_zero and not attacked:
            # nothing to infer from an all-zero run; does not count as a
            # protocol failure
            degenerate_inferences += 1
            inferred = attacked
        if inferred != attacked:
            raise InferenceMismatchError(
                f"zero-input inference disagreed with the pattern at slot {q}"
            )
        outcome = classify_outcome(attacked, rs_dec.prev_attacked, q)
        outcome_enc = classify_outcome(inferred, rs_enc.prev_attacked, q)
        for k, xk, xhk, u in rows:
            t0 = q * cfg.big_delta + k * dp.delta
            tb.add_row(t0, q, k, xk, xhk, u, u, plant.c @ xk,
                       (rs_dec.value,), outcome, False, inferred)
            for j, (a_t, b_t) in enumerate(os_maps, start=1):
                xs = a_t @ xk + b_t @ u
                tb.add_row(t0 + j * dp.delta / cfg.oversample, q, k, xs, xhk,
                           u, u, plant.c @ xs, (rs_dec.value,), outcome,
                           False, inferred)
        residual = inf_norm(plant.c @ xh)
        if residual > DEADBEAT_NULL_TOL:
            raise DeadbeatContractError(
                f"|C xhat| = {residual:.3e} at the end of slot {q}"
            )
        tb.add_slot(deadbeat_residual=residual,
                    enc_equals_dec=(rs_enc.value == rs_dec.value))
        xh_eta = np.zeros(plant.n_x)
        rs_dec = update_range(rs_dec, outcome)
        rs_enc = update_range(rs_enc, outcome_enc)

    return tb.build(final_state=x, meta={
        "dp": dp, "gains": gs, "constants": dc, "thetas": thetas,
        "pattern": pattern, "degenerate_inferences": degenerate_inferences,
    })


def run_mismatch_demo(cfg: SimConfig) -> LoopTrace:
    """ACK-based scheme run without ACKs: one attack, growing mismatch.

    The decoder-side predictor switches to its open-loop branch on the
    attacked slot while the encoder-side predictor, blind to the attack,
    keeps applying corrections and its two-branch range law.  The run
    records both ranges, the true encoder-side error, and the derived
    mismatch bound sequence; encoding past saturation clips to the nearest
    box instead of failing, because divergence is the point.
    """
    if cfg.scenario is not Scenario.MISMATCH_DEMO:
        raise ScenarioError("config is not a mismatch-demo scenario")
    if cfg.attack_slot is None:
        raise ScenarioError("mismatch demo needs attack_slot")
    plant = cfg.plant
    n = int(cfg.levels)
    q_a = cfg.attack_slot
    dps = sample_plant_single_rate(plant, cfg.big_delta)
    gs, l_obs = _single_rate_gains(cfg, dps)
    dc = derive_decay_constants(gs, dps, l_obs=l_obs)
    thetas = compute_thetas(ThetaVariant.ACK, dc, dps, n)
    codec = UniformCodec(n, plant.n_y)
    norm_c = inf_norm(plant.c)

    rs_dec = RangeState(cfg.x0_bound, RangeScheme.MISMATCH_DECODER, thetas)
    rs_enc = RangeState(cfg.x0_bound, RangeScheme.MISMATCH_ENCODER, thetas)
    x = cfg.x0.copy()
    xh = np.zeros(plant.n_x)  # decoder/controller side
    xt = np.zeros(plant.n_x)  # encoder side
    tb = _TraceBuilder(cfg.scenario, ("E_e", "E_d"))
    slots_run = 0

    for q in range(cfg.horizon_slots):
        y = plant.c @ x
        attacked = q == q_a
        outcome = classify_outcome(attacked, rs_dec.prev_attacked, q)
        u = gs.controller_gain @ xh
        yt = plant.c @ xt
        rng_e = norm_c * rs_enc.value
        saturated = bool(np.max(np.abs(y - yt)) > rng_e)
        idx = encode(y, yt, rng_e, codec, clip=True)
        qe = decode(idx, yt, rng_e, codec)
        offs = (qe - yt) * codec.levels / rng_e if rng_e > 0 else np.zeros_like(qe)
        tb.add_slot(
            attacked=attacked, e_enc=rs_enc.value, e_dec=rs_dec.value,
            enc_err=inf_norm(x - xt), predictor_gap=inf_norm(xh - xt),
            offs=offs.copy(), saturated=saturated, x_norm=inf_norm(x),
        )
        tb.add_row(q * cfg.big_delta, q, 0, x, xh, u, u, y,
                   (rs_enc.value, rs_dec.value), outcome, saturated, False)
        xt_next = dps.a_d @ xt + dps.b_d @ (gs.controller_gain @ xt) \
            + l_obs @ (qe - yt)
        if attacked:
            xh_next = dps.a_d @ xh + dps.b_d @ u
        else:
            yh = plant.c @ xh
            rng_d = norm_c * rs_dec.value
            qd = decode(idx, yh, rng_d, codec)
            xh_next = dps.a_d @ xh + dps.b_d @ u + l_obs @ (qd - yh)
        x = dps.a_d @ x + dps.b_d @ u
        xh, xt = xh_next, xt_next
        rs_dec = update_range(rs_dec, outcome)
        rs_enc = update_range(rs_enc, outcome)  # outcome ignored by the two-branch law
        slots_run = q + 1
        if inf_norm(x) > DIVERGENCE_CAP:
            break

    trace = tb.build(final_state=x, meta={
        "dp": dps, "gains": gs, "constants": dc, "thetas": thetas,
        "attack_slot": q_a, "slots_run": slots_run,
        "l_obs": l_obs,
    })
    trace.slots["mismatch_bound"] = _mismatch_bound_sequence(trace, cfg, dps, gs,
                                                             l_obs, thetas, codec)
    return trace


def _mismatch_bound_sequence(trace, cfg, dps, gs, l_obs, thetas: ThetaSet,
                             codec) -> np.ndarray:
    """Derived upper-bound sequence on the encoder-side error.

    Before the attack the bound is the encoder range itself.  After it, the
    recorded quantization offsets feed the kick terms accumulated by the
    predictor mismatch recursion: the phantom correction injected at the
    attacked slot, the range-law divergence one slot later, and the
    per-slot mis-scaled corrections after that.
    """
    e_enc = trace.slots["e_enc"]
    offs = trace.slots["offs"]
    q_a = cfg.attack_slot
    th_a, th_0, th_na = (thetas.theta_attack, thetas.theta_first,
                         thetas.theta_steady)
    n = codec.levels
    norm_c = inf_norm(cfg.plant.c)
    bk = dps.b_d @ gs.controller_gain
    closed = gs.closed_loop
    slots = len(e_enc)
    bound = np.array(e_enc, dtype=float)
    if q_a >= slots:
        return bound
    base = e_enc[q_a]
    kick0 = l_obs @ offs[q_a]
    for ell in range(1, slots - q_a):
        q = q_a + ell
        total = e_enc[q]
        if ell >= 2:
            total += (
                inf_norm(bk @ mat_pow(closed, ell - 1) @ kick0)
                * norm_c * base / (n * th_na ** ell)
            )
            kick1 = l_obs @ offs[q_a + 1]
            total += (
                inf_norm(bk @ mat_pow(closed, ell - 2) @ kick1)
                * norm_c * (th_a - th_na) * base / (n * th_na ** ell)
            )
        for i in range(ell - 2):
            kick = l_obs @ offs[q_a + ell - i - 1]
            total += (
                inf_norm(bk @ mat_pow(closed, i) @ kick)
                * norm_c * (th_0 * th_a - th_na ** 2) * base
                / (n * th_na ** (i + 3))
            )
        bound[q] = total
    return bound


_RUNNERS = {
    Scenario.DUAL_CHANNEL: run_dual_channel,
    Scenario.OUTPUT_ACK: run_output_ack,
    Scenario.OUTPUT_ACK_FREE: run_output_ackfree,
    Scenario.MISMATCH_DEMO: run_mismatch_demo,
}


def run_scenario(cfg: SimConfig) -> LoopTrace:
    return _RUNNERS[cfg.scenario](cfg)
