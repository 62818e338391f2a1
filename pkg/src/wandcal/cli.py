"""Command-line front end: ``simulate``, ``calibrate``, ``evaluate``, ``lp-selftest``.

Exit codes: 0 success, 2 bad input, 3 numerical failure, 4 internal invariant breach.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .evaluation import evaluate
from .exceptions import (
    BehindCameraError,
    DegenerateGeometryError,
    InsufficientObservationsError,
    InvalidArgumentError,
    LpFailure,
    NumericError,
    SchemaError,
)
from .io import (
    dataset_from_dict,
    dump_json,
    load_json,
    read_dataset,
    read_state,
    state_doc,
    validate,
    write_csv,
    write_dataset,
)
from .lm import LmConfig
from .lp import LpConfig, selftest
from .refine import RefineConfig, refine
from .residuals import eval_E, eval_LAE, reprojection_rms, wand_length_stats
from .simulate import SceneSpec, generate_scene, perturb_state
from .subproblem import SubproblemConfig

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("wandcal")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_count = {"type": "integer", "minimum": 1}
_seed = {"type": "integer", "minimum": 0, "maximum": 2**64 - 1}

CALIBRATE_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "max_iters": _count,
        "tol": _pos,
        "m_cal": {"type": "integer", "minimum": 0},
        "bound": _pos,
        "seed": _seed,
        "out": {"type": "string"},
        "scheme": {"enum": ["linearized", "separated"]},
        "lp_method": {"enum": ["highs", "simplex"]},
        "n_jobs": _count,
        "trust_radius": _pos,
        "collapse_form": {"enum": ["linear", "frozen"]},
        "scale_method": {"enum": ["mean", "median"]},
        "init": {
            "type": "object",
            "properties": {"perturb_deg": _num, "perturb_translation": _num, "perturb_marker": _num},
            "additionalProperties": False,
        },
        "lm": {
            "type": "object",
            "properties": {"lambda0": _pos, "lambda_up": _pos, "lambda_down": _pos,
                           "max_iter": _count, "grad_tol": _pos, "step_tol": _pos},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

SIMULATE_CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "cameras": {"type": "integer"},
        "frames": {"type": "integer"},
        "noise": _num,
        "dropout": _num,
        "wand_length": _num,
        "m_cal": {"type": "integer"},
        "seed": _seed,
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}

_CALIBRATE_DEFAULTS = {
    "max_iters": 100, "tol": 1e-8, "m_cal": 200, "bound": 10.0, "seed": 0, "out": ".",
    "scheme": "linearized", "lp_method": "highs", "n_jobs": None, "trust_radius": 0.1,
    "collapse_form": "linear", "scale_method": "mean",
    "init": {"perturb_deg": 5.0, "perturb_translation": 0.2, "perturb_marker": 0.1},
    "lm": {},
}

_SIMULATE_DEFAULTS = {"cameras": 4, "frames": 150, "noise": 0.0, "dropout": 0.0,
                      "wand_length": 0.5, "m_cal": 200, "seed": 0, "out": "."}


def _load_config(path, schema):
    if path is None:
        return {}
    doc = load_json(path)
    validate(doc, schema)
    return doc


def _resolve(defaults, config, flags):
    """Flags override the config file, which overrides the defaults."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in defaults.items()}
    for k, v in config.items():
        if isinstance(v, dict):
            out[k].update(v)
        else:
            out[k] = v
    for k, v in flags.items():
        if v is None:
            continue
        if "." in k:
            group, key = k.split(".")
            out[group][key] = v
        else:
            out[k] = v
    return out


def _seed_arg(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def _add_common(p):
    p.add_argument("--config", help="JSON file with run settings; unknown keys are rejected")
    p.add_argument("--seed", type=_seed_arg)
    p.add_argument("--out", help="output directory")
    p.add_argument("--m-cal", dest="m_cal", type=int, help="low-start calibration frames (default 200)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wandcal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset and its ground truth")
    _add_common(p)
    p.add_argument("--cameras", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--noise", type=float, help="pixel noise standard deviation")
    p.add_argument("--dropout", type=float, help="probability of dropping an in-view observation")
    p.add_argument("--wand-length", dest="wand_length", type=float)

    p = sub.add_parser("calibrate", help="refine an initial state against a dataset")
    _add_common(p)
    p.add_argument("dataset")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--init", help="initial state file (kind 'state' or 'results')")
    src.add_argument("--from-truth", action="store_true",
                     help="start from the dataset's ground truth, randomly perturbed")
    p.add_argument("--bound", type=float, help="box bound on coordinates in meters (default 10)")
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--scheme", choices=["linearized", "separated"])
    p.add_argument("--lp-method", dest="lp_method", choices=["highs", "simplex"])
    p.add_argument("--jobs", dest="n_jobs", type=int)
    p.add_argument("--perturb-deg", dest="init.perturb_deg", type=float)
    p.add_argument("--perturb-translation", dest="init.perturb_translation", type=float)
    p.add_argument("--perturb-marker", dest="init.perturb_marker", type=float)

    p = sub.add_parser("evaluate", help="compare a results file against ground truth")
    p.add_argument("results")
    p.add_argument("truth", help="truth state file, or a dataset carrying ground truth")
    p.add_argument("--dataset", help="dataset for the reprojection RMS")
    p.add_argument("--out", help="directory for metrics.csv and metrics.json")

    p = sub.add_parser("lp-selftest", help="check the LP solver against vertex enumeration")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--seed", type=_seed_arg, default=0)
    p.add_argument("--method", choices=["simplex", "highs"], default="simplex")
    return parser


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    flags = {k: getattr(args, k) for k in ("cameras", "frames", "noise", "dropout", "wand_length",
                                           "m_cal", "seed", "out")}
    cfg = _resolve(_SIMULATE_DEFAULTS, _load_config(args.config, SIMULATE_CONFIG_SCHEMA), flags)
    spec = SceneSpec(n_cameras=cfg["cameras"], n_frames=cfg["frames"], wand_length=cfg["wand_length"],
                     m_cal=cfg["m_cal"], noise=cfg["noise"], dropout=cfg["dropout"], seed=cfg["seed"])
    truth, obs = generate_scene(spec)
    out = _outdir(cfg["out"])
    write_dataset(out / "dataset.json", obs, truth.state, truth.low_start_markers)
    dump_json(state_doc(truth.state, truth.intrinsics, wand_length=spec.wand_length), out / "truth.json")
    density = float(obs.mask.mean())
    print(f"N={obs.n_cameras} M={obs.n_markers} frames={obs.n_frames} mask density={density:.3f}")
    print(f"wrote {out / 'dataset.json'} and {out / 'truth.json'}")
    return EXIT_OK


def _refine_config(cfg) -> RefineConfig:
    return RefineConfig(
        max_iter=cfg["max_iters"], tol=cfg["tol"], lm=LmConfig(**cfg["lm"]),
        lp=LpConfig(method=cfg["lp_method"]),
        subproblem=SubproblemConfig(bound=cfg["bound"], m_cal=cfg["m_cal"],
                                    collapse_form=cfg["collapse_form"]),
        scheme=cfg["scheme"], trust_radius=cfg["trust_radius"],
        scale_method=cfg["scale_method"], n_jobs=cfg["n_jobs"],
    )


def _report_doc(report) -> dict:
    # timings stay in the CSV so that reruns produce identical results files
    doc = report.to_dict()
    for rec in doc["iterations"]:
        rec.pop("ms_angles")
        rec.pop("ms_lp")
    return doc


def cmd_calibrate(args) -> int:
    flags = {k: getattr(args, k) for k in ("max_iters", "tol", "m_cal", "bound", "seed", "out", "scheme",
                                           "lp_method", "n_jobs")}
    for k in ("perturb_deg", "perturb_translation", "perturb_marker"):
        flags[f"init.{k}"] = getattr(args, f"init.{k}")
    cfg = _resolve(_CALIBRATE_DEFAULTS, _load_config(args.config, CALIBRATE_CONFIG_SCHEMA), flags)
    obs, truth, _ = read_dataset(args.dataset)
    if args.init:
        init, _ = read_state(args.init)
        if init.n_cameras != obs.n_cameras or init.n_markers != obs.n_markers:
            raise InvalidArgumentError(
                f"initial state has {init.n_cameras} cameras / {init.n_markers} markers, "
                f"dataset has {obs.n_cameras} / {obs.n_markers}")
    elif args.from_truth:
        if truth is None:
            raise InvalidArgumentError("--from-truth given but the dataset has no ground_truth block")
        p = cfg["init"]
        init = perturb_state(truth, np.deg2rad(p["perturb_deg"]), p["perturb_translation"],
                             p["perturb_marker"], seed=cfg["seed"], bound=cfg["bound"])
    else:
        raise InvalidArgumentError(
            "no initial state: pass --init FILE or --from-truth. Computing an initial "
            "calibration from scratch is outside this tool; it only refines a given start")
    state, report = refine(init, obs, _refine_config(cfg))
    _check_invariants(state, obs, cfg)
    rms = reprojection_rms(state, obs)
    metrics = {"reprojection_rms_px": rms, "E": eval_E(state, obs.normalized(), obs.mask),
               "LAE": eval_LAE(state, obs.normalized(), obs.mask),
               "wand_length_std_m": wand_length_stats(state.markers).std}
    out = _outdir(cfg["out"])
    dump_json(state_doc(state, obs.intrinsics, kind="results", wand_length=obs.wand_length,
                        report=_report_doc(report), metrics=metrics,
                        config={k: v for k, v in cfg.items() if k != "out"}),
              out / "results.json")
    write_csv(out / "iterations.csv", report.csv_rows())
    print(f"iterations={len(report.iterations) - 1} stop={report.reason} "
          f"E={metrics['E']:.6e} reprojection RMS={rms:.6e} px")
    print(f"wrote {out / 'results.json'} and {out / 'iterations.csv'}")
    return EXIT_OK


class InvariantBreach(RuntimeError):
    pass


def _check_invariants(state, obs, cfg):
    if not np.all(np.isfinite(state.angles)) or not np.all(np.isfinite(state.markers)):
        raise InvariantBreach("refined state contains non-finite values")
    mean = wand_length_stats(state.markers).mean
    if abs(mean - obs.wand_length) > 1e-9 * obs.wand_length:
        raise InvariantBreach(f"mean wand length {mean!r} differs from {obs.wand_length!r}")


def _read_truth(path):
    doc = load_json(path)
    if isinstance(doc, dict) and doc.get("kind") == "dataset":
        obs, truth, _ = dataset_from_dict(doc)
        if truth is None:
            raise SchemaError("dataset has no ground_truth block", ["ground_truth"])
        return truth
    state, _ = read_state(path)
    return state


def cmd_evaluate(args) -> int:
    estimate, _ = read_state(args.results)
    truth = _read_truth(args.truth)
    obs = read_dataset(args.dataset)[0] if args.dataset else None
    m = evaluate(estimate, truth, obs)
    print(m.format_table())
    if args.out:
        out = _outdir(args.out)
        write_csv(out / "metrics.csv", m.table_rows())
        dump_json({"summary": m.summary(), "center_errors_m": m.center_errors,
                   "angle_errors_deg": m.angle_errors_deg}, out / "metrics.json")
    return EXIT_OK


def cmd_lp_selftest(args) -> int:
    if args.count < 1:
        raise InvalidArgumentError("--count must be at least 1")
    r = selftest(args.count, args.seed, args.method)
    print(f"{r.n_cases - r.n_failed}/{r.n_cases} LPs agree with vertex enumeration "
          f"(max objective gap {r.max_objective_gap:.2e}, max violation {r.max_violation:.2e})")
    for i, msg in r.failures:
        print(f"  case {i}: {msg}")
    return EXIT_OK if r.n_failed == 0 else EXIT_INVARIANT


_COMMANDS = {"simulate": cmd_simulate, "calibrate": cmd_calibrate, "evaluate": cmd_evaluate,
             "lp-selftest": cmd_lp_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (SchemaError, InvalidArgumentError, InsufficientObservationsError,
            DegenerateGeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LpFailure, NumericError, BehindCameraError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvariantBreach, AssertionError) as exc:
        print(f"internal invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
