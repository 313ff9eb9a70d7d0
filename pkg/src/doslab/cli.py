"""Configuration-driven command line entry point.

``doslab run|check|tradeoff <scenario.json>`` loads a JSON scenario,
synthesizes or verifies gains, evaluates the stability conditions, runs
the requested simulation, and emits trace CSVs, condition reports, and SVG
charts.  Exit codes: 0 success, 2 configuration error, 3 condition check
failed, 4 saturation or synchronization failure, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .conditions import (
    ThetaVariant,
    build_report,
    report_rows,
    report_text,
    tradeoff_boundary,
)
from .controlloop import (
    Scenario,
    SimConfig,
    run_scenario,
)
from .discretize import ContinuousPlant, sample_plant, sample_plant_single_rate
from .dos import DoSParams, pattern_from_bools
from .errors import (
    DeadbeatContractError,
    DoslabError,
    InferenceMismatchError,
    SaturationError,
    ScenarioError,
)
from .gains import (
    derive_decay_constants,
    design_deadbeat_gain,
    design_deadbeat_observer,
    design_observer_gain,
    design_stabilizing_gain,
    make_gain_set,
    verify_nilpotent,
)
from .matrixcore import gelfand_radius, inf_norm
from .svgplot import line_chart

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONDITION = 3
EXIT_SATURATION = 4
EXIT_NUMERICAL = 5

_MATRIX = {
    "type": "array",
    "minItems": 1,
    "items": {"type": "array", "minItems": 1, "items": {"type": "number"}},
}
_VECTOR = {"type": "array", "minItems": 1, "items": {"type": "number"}}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "plant", "big_delta", "x0", "x0_bound",
                 "levels", "horizon_slots"],
    "properties": {
        "scenario": {"enum": [s.value for s in Scenario]},
        "plant": {
            "type": "object",
            "additionalProperties": False,
            "required": ["a", "b", "c"],
            "properties": {"a": _MATRIX, "b": _MATRIX, "c": _MATRIX},
        },
        "big_delta": {"type": "number", "exclusiveMinimum": 0},
        "x0": _VECTOR,
        "x0_bound": {"type": "number", "minimum": 0},
        "levels": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["n1", "n2", "n3"],
                    "properties": {
                        "n1": {"type": "integer", "minimum": 1},
                        "n2": {"type": "integer", "minimum": 1},
                        "n3": {"type": "integer", "minimum": 1},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["n"],
                    "properties": {"n": {"type": "integer", "minimum": 1}},
                },
            ]
        },
        "dos": {
            "oneOf": [
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["pattern"],
                    "properties": {
                        "pattern": {"type": "array",
                                    "items": {"type": "integer",
                                              "minimum": 0, "maximum": 1}},
                    },
                },
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["params"],
                    "properties": {
                        "params": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["kappa_f", "nu_f", "kappa_d", "nu_d"],
                            "properties": {
                                "kappa_f": {"type": "number", "minimum": 0},
                                "nu_f": {"type": "number", "minimum": 2},
                                "kappa_d": {"type": "number", "minimum": 0},
                                "nu_d": {"type": "integer", "minimum": 1},
                            },
                        },
                        "seed": {"type": "integer", "minimum": 0},
                        "intensity": {"type": "number",
                                      "minimum": 0, "maximum": 1},
                    },
                },
            ]
        },
        "gains": {
            "oneOf": [
                {"const": "synthesize"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "minProperties": 1,
                    "properties": {
                        "k": _MATRIX,
                        "m": _MATRIX,
                        "nilpotency_tol": {"type": "number",
                                           "exclusiveMinimum": 0},
                    },
                },
            ]
        },
        "observer": {"enum": ["kalman", "deadbeat"]},
        "control_weight": {"type": "number", "exclusiveMinimum": 0},
        "horizon_slots": {"type": "integer", "minimum": 1},
        "oversample": {"type": "integer", "minimum": 1},
        "attack_slot": {"type": "integer", "minimum": 0},
        "reference_lines": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["slope", "intercept"],
                "properties": {
                    "slope": {"type": "number"},
                    "intercept": {"type": "number"},
                    "label": {"type": "string"},
                },
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trace": {"type": "string"},
                "report": {"type": "string"},
                "plots": {"type": "boolean"},
            },
        },
    },
}

_VARIANTS = {
    Scenario.DUAL_CHANNEL: ThetaVariant.DUAL,
    Scenario.OUTPUT_ACK: ThetaVariant.ACK,
    Scenario.OUTPUT_ACK_FREE: ThetaVariant.ACK_FREE,
    Scenario.MISMATCH_DEMO: ThetaVariant.ACK,
}


def load_scenario(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario file is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ScenarioError(f"scenario schema violation at {where}: "
                            f"{exc.message}") from exc
    return doc


def _build_config(doc: dict, seed_override: int | None = None) -> SimConfig:
    scenario = Scenario(doc["scenario"])
    plant = ContinuousPlant(a=doc["plant"]["a"], b=doc["plant"]["b"],
                            c=doc["plant"]["c"])
    levels_doc = doc["levels"]
    if "n" in levels_doc:
        levels = levels_doc["n"]
    else:
        levels = (levels_doc["n1"], levels_doc["n2"], levels_doc["n3"])

    pattern = None
    dos_params = None
    seed = 0
    intensity = 0.5
    dos_doc = doc.get("dos")
    if dos_doc is None:
        if scenario is not Scenario.MISMATCH_DEMO:
            raise ScenarioError("scenario needs a dos section")
    elif "pattern" in dos_doc:
        pattern = pattern_from_bools(dos_doc["pattern"])
    else:
        p = dos_doc["params"]
        dos_params = DoSParams(kappa_f=p["kappa_f"], nu_f=p["nu_f"],
                               kappa_d=p["kappa_d"], nu_d=p["nu_d"])
        seed = dos_doc.get("seed", 0)
        intensity = dos_doc.get("intensity", 0.5)
    if seed_override is not None:
        seed = seed_override

    cfg = SimConfig(
        plant=plant,
        big_delta=doc["big_delta"],
        x0=np.array(doc["x0"], dtype=float),
        x0_bound=doc["x0_bound"],
        scenario=scenario,
        horizon_slots=doc["horizon_slots"],
        levels=levels,
        pattern=pattern,
        dos_params=dos_params,
        seed=seed,
        intensity=intensity,
        observer=doc.get("observer", "kalman"),
        control_weight=doc.get("control_weight", 1.0),
        oversample=doc.get("oversample", 1),
        attack_slot=doc.get("attack_slot"),
    )
    if scenario is Scenario.MISMATCH_DEMO and cfg.attack_slot is None:
        raise ScenarioError("mismatch_demo scenarios need attack_slot")
    return cfg


def _prepare_gains(doc: dict, cfg: SimConfig):
    """Build (discrete plant, gain set, provenance string) for the scenario.

    Missing pieces of an injected gain object are synthesized; injected
    pieces are verified against the scenario's requirements before use.
    """
    scenario = cfg.scenario
    protocol = scenario in (Scenario.DUAL_CHANNEL, Scenario.OUTPUT_ACK_FREE)
    if protocol:
        dp = sample_plant(cfg.plant, cfg.big_delta)
    else:
        dp = sample_plant_single_rate(cfg.plant, cfg.big_delta)
    gains_doc = doc.get("gains", "synthesize")
    if gains_doc == "synthesize":
        gains_doc = {}
    injected = sorted(set(gains_doc) & {"k", "m"})
    tol = gains_doc.get("nilpotency_tol", 5e-2)

    if "k" in gains_doc:
        k = np.array(gains_doc["k"], dtype=float)
        if protocol:
            residual = verify_nilpotent(dp.a_d, dp.b_d, k, dp.eta)
            bound = tol * inf_norm(dp.a_d) ** dp.eta
            if residual > bound:
                raise DoslabError(
                    f"injected feedback gain is not deadbeat: residual "
                    f"{residual:.3e} > {bound:.3e}"
                )
        elif gelfand_radius(dp.a_d + dp.b_d @ k, 512) >= 1.0:
            raise DoslabError("injected feedback gain not certified stable")
    elif protocol:
        k = design_deadbeat_gain(dp)
    else:
        k = design_stabilizing_gain(dp.a_d, dp.b_d, cfg.control_weight)

    if "m" in gains_doc:
        m = np.array(gains_doc["m"], dtype=float)
        deadbeat_observer = False
    elif cfg.observer == "deadbeat":
        m = design_deadbeat_observer(dp.a_lift, dp.c, dp.mu)
        deadbeat_observer = True
    else:
        m = design_observer_gain(dp.a_lift, dp.c)
        deadbeat_observer = False
    gs = make_gain_set(dp, k, m, deadbeat_observer)
    err_bound = gelfand_radius(gs.error_transition, 512)
    if err_bound >= 1.0:
        raise DoslabError(
            f"observer gain not certified stable (Gelfand bound "
            f"{err_bound:.4f})"
        )
    source = f"injected ({', '.join(injected)})" if injected else "synthesized"
    return dp, gs, source


def _condition_report(cfg: SimConfig, dp, gs):
    variant = _VARIANTS[cfg.scenario]
    if variant is ThetaVariant.ACK:
        l_obs = dp.a_d @ gs.observer_gain
        dc = derive_decay_constants(gs, dp, l_obs=l_obs)
    else:
        dc = derive_decay_constants(gs, dp)
    params = cfg.dos_params
    if params is None:
        # pattern-only or demo scenarios: report against a unit budget
        params = DoSParams(kappa_f=1, nu_f=max(2.0, cfg.horizon_slots),
                           kappa_d=1, nu_d=max(1, cfg.horizon_slots))
    return build_report(variant, dc, dp, cfg.levels, params), gs, params


def _write_report(path: Path, report, params):
    with open(path, "w") as fh:
        fh.write("name,value\n")
        for name, value in report_rows(report, params):
            fh.write(f"{name},{value}\n")


def _emit_plots(trace, out_dir: Path, stem: str):
    t = trace.t
    x_norm = np.max(np.abs(trace.x), axis=1)
    xh_norm = np.max(np.abs(trace.x_hat), axis=1)
    line_chart(
        out_dir / f"{stem}_state.svg",
        [("|x|", t, x_norm), ("|xhat|", t, xh_norm)],
        title="State and estimate (max norm)",
        xlabel="t [s]", ylabel="max norm",
    )
    range_series = [(name, t, values) for name, values in trace.ranges.items()]
    slot_axis = np.arange(len(next(iter(trace.slots.values()))))
    if "y_err" in trace.slots:
        range_series.append(
            ("actual |y - center|",
             slot_axis * (t[-1] / max(len(slot_axis) - 1, 1)),
             trace.slots["y_err"]))
    line_chart(
        out_dir / f"{stem}_ranges.svg",
        range_series,
        title="Quantization ranges",
        xlabel="t [s]", ylabel="range", ylog=True,
    )
    u_series = []
    for i in range(trace.u_applied.shape[1]):
        u_series.append((f"u_{i}", t, trace.u_applied[:, i]))
    line_chart(
        out_dir / f"{stem}_input.svg",
        u_series,
        title="Applied input (zero-order hold)",
        xlabel="t [s]", ylabel="u",
    )


def cmd_run(args) -> int:
    doc = load_scenario(args.scenario)
    cfg = _build_config(doc, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dp, gs, gain_source = _prepare_gains(doc, cfg)
    cfg.gains = gs
    report, _, params = _condition_report(cfg, dp, gs)
    outputs = doc.get("outputs", {})
    stem = Path(args.scenario).stem
    report_path = out_dir / outputs.get("report", f"{stem}_report.csv")
    _write_report(report_path, report, params)
    print(f"gains: {gain_source}")
    print(report_text(report, params), end="")
    if not report.passes and cfg.scenario is not Scenario.MISMATCH_DEMO:
        print("condition check failed; not running", file=sys.stderr)
        return EXIT_CONDITION
    trace = run_scenario(cfg)
    trace_path = out_dir / outputs.get("trace", f"{stem}_trace.csv")
    trace.to_csv(trace_path)
    print(f"trace written to {trace_path}")
    if outputs.get("plots", True) and not args.no_plots:
        _emit_plots(trace, out_dir, stem)
        print(f"plots written to {out_dir}")
    if trace.saturated.any():
        first = int(trace.q[np.argmax(trace.saturated)])
        print(f"saturation flagged from slot {first} on "
              f"(expected for the mismatch demonstration)")
    final_norm = inf_norm(trace.final_state)
    print(f"final |x| = {final_norm:.6g}")
    return EXIT_OK


def cmd_check(args) -> int:
    doc = load_scenario(args.scenario)
    cfg = _build_config(doc, args.seed)
    dp, gs, gain_source = _prepare_gains(doc, cfg)
    report, _, params = _condition_report(cfg, dp, gs)
    print(f"gains: {gain_source}")
    print(report_text(report, params), end="")
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = Path(args.scenario).stem
        name = doc.get("outputs", {}).get("report", f"{stem}_report.csv")
        _write_report(out_dir / name, report, params)
    return EXIT_OK if report.passes else EXIT_CONDITION


def cmd_tradeoff(args) -> int:
    doc = load_scenario(args.scenario)
    cfg = _build_config(doc, args.seed)
    dp, gs, _ = _prepare_gains(doc, cfg)
    variant = _VARIANTS[cfg.scenario]
    if variant is ThetaVariant.ACK:
        l_obs = dp.a_d @ gs.observer_gain
        dc = derive_decay_constants(gs, dp, l_obs=l_obs)
    else:
        dc = derive_decay_constants(gs, dp)
    if args.grid < 2:
        raise ScenarioError("tradeoff needs a grid of at least 2 points")
    grid = np.linspace(0.0, 0.5, args.grid)
    finite = tradeoff_boundary(variant, dc, dp, cfg.levels, grid)
    limit = tradeoff_boundary(variant, dc, dp, None, grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.scenario).stem
    csv_path = out_dir / f"{stem}_tradeoff.csv"
    with open(csv_path, "w") as fh:
        fh.write("nu_f_inv,nu_d_max_finite,nu_d_max_limit\n")
        for (x, yf), (_, yl) in zip(finite, limit):
            fh.write(f"{x:.17g},{yf:.17g},{yl:.17g}\n")
    print(f"boundary written to {csv_path}")
    for name, pts in (("finite", finite), ("limit", limit)):
        (x0, y0), (x1, y1) = pts[0], pts[-1]
        slope = (y1 - y0) / (x1 - x0)
        print(f"{name} line: 1/nu_d = {slope:.4f} * 1/nu_f + {y0:.4f}")
    for ref in doc.get("reference_lines", []):
        label = ref.get("label", "reference")
        print(f"{label}: 1/nu_d = {ref['slope']:.4f} * 1/nu_f "
              f"+ {ref['intercept']:.4f}")
    if not args.no_plots:
        series = [
            ("finite levels", [p[0] for p in finite], [p[1] for p in finite]),
            ("infinite levels", [p[0] for p in limit], [p[1] for p in limit]),
        ]
        for ref in doc.get("reference_lines", []):
            xs = [grid[0], grid[-1]]
            ys = [ref["intercept"] + ref["slope"] * x for x in xs]
            series.append((ref.get("label", "reference"), xs, ys))
        line_chart(out_dir / f"{stem}_tradeoff.svg", series,
                   title="Admissible DoS budget boundary",
                   xlabel="1/nu_f", ylabel="max 1/nu_d")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doslab",
        description="Quantized control under DoS attacks: condition checks "
                    "and deterministic closed-loop simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in (("run", cmd_run), ("check", cmd_check),
                       ("tradeoff", cmd_tradeoff)):
        p = sub.add_parser(name)
        p.add_argument("scenario", help="path to a scenario JSON file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario's DoS seed")
        p.add_argument("--no-plots", action="store_true")
        if name == "tradeoff":
            p.add_argument("--grid", type=int, default=26,
                           help="number of 1/nu_f grid points in [0, 0.5]")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SaturationError, InferenceMismatchError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_SATURATION
    except (DeadbeatContractError, DoslabError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
