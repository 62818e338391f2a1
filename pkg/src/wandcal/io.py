"""JSON documents exchanged by the command line tools.

Three kinds share ``format_version`` 1: ``dataset`` (intrinsics, feature
points, wand pairing, optional ground truth), ``state`` (poses and markers,
used for truth and initial-state files) and ``results`` (refined state plus
the refinement report). Floats are written with :func:`repr`, which round-trips
every double exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import SchemaError
from .geometry import CameraIntrinsics
from .residuals import ObservationSet
from .state import SceneState

FORMAT_VERSION = 1

_vec3 = {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}

STATE_SCHEMA = {
    "type": "object",
    "properties": {
        "angles": {"type": "array", "items": _vec3},
        "t_prime": {"type": "array", "items": _vec3},
        "markers": {"type": "array", "items": _vec3},
    },
    "required": ["angles", "t_prime", "markers"],
    "additionalProperties": False,
}

INTRINSICS_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {
            "f": {"type": "number", "exclusiveMinimum": 0},
            "alpha": {"type": "number"},
            "beta": {"type": "number"},
            "gamma": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["f", "alpha", "beta", "gamma"],
        "additionalProperties": False,
    },
}

DATASET_SCHEMA = {
    "type": "object",
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "kind": {"const": "dataset"},
        "n_cameras": {"type": "integer", "minimum": 2},
        "n_markers": {"type": "integer", "minimum": 2},
        "wand_length": {"type": "number", "exclusiveMinimum": 0},
        "intrinsics": INTRINSICS_SCHEMA,
        "observations": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "marker_index": {"type": "integer", "minimum": 0},
                    "camera_index": {"type": "integer", "minimum": 0},
                    "u": {"type": "number"},
                    "v": {"type": "number"},
                },
                "required": ["marker_index", "camera_index", "u", "v"],
                "additionalProperties": False,
            },
        },
        "wand_pairs": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                      "minItems": 2, "maxItems": 2},
        },
        "low_start_markers": {"type": "integer", "minimum": 0},
        "ground_truth": STATE_SCHEMA,
    },
    "required": ["format_version", "kind", "n_cameras", "n_markers", "wand_length",
                 "intrinsics", "observations", "wand_pairs"],
    "additionalProperties": False,
}

STATE_DOC_SCHEMA = {
    "type": "object",
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "kind": {"enum": ["state", "results"]},
        "state": STATE_SCHEMA,
        "intrinsics": INTRINSICS_SCHEMA,
        "wand_length": {"type": "number", "exclusiveMinimum": 0},
        "report": {"type": "object"},
        "metrics": {"type": "object"},
        "config": {"type": "object"},
    },
    "required": ["format_version", "kind", "state"],
    "additionalProperties": False,
}


def validate(doc, schema):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        raise SchemaError(exc.message, exc.absolute_path) from None


def _clean(obj):
    """Replace non-finite floats by ``None`` and numpy scalars/arrays by Python types."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dump_json(doc, path):
    Path(path).write_text(json.dumps(_clean(doc), indent=1) + "\n")


def load_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON in {path} (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None


def state_to_dict(state: SceneState) -> dict:
    return {"angles": state.angles.tolist(), "t_prime": state.t_prime.tolist(),
            "markers": state.markers.tolist()}


def state_from_dict(d) -> SceneState:
    return SceneState(np.array(d["angles"], dtype=float).reshape(-1, 3),
                      np.array(d["t_prime"], dtype=float).reshape(-1, 3),
                      np.array(d["markers"], dtype=float).reshape(-1, 3))


def intrinsics_to_list(intr) -> list[dict]:
    return [{"f": k.f, "alpha": k.alpha, "beta": k.beta, "gamma": k.gamma} for k in intr]


def intrinsics_from_list(items) -> list[CameraIntrinsics]:
    return [CameraIntrinsics(**k) for k in items]


def dataset_to_dict(obs: ObservationSet, truth: SceneState | None = None,
                    low_start_markers: int | None = None) -> dict:
    ms, ns = np.nonzero(obs.mask)
    doc = {
        "format_version": FORMAT_VERSION,
        "kind": "dataset",
        "n_cameras": obs.n_cameras,
        "n_markers": obs.n_markers,
        "wand_length": float(obs.wand_length),
        "intrinsics": intrinsics_to_list(obs.intrinsics),
        "observations": [
            {"marker_index": int(m), "camera_index": int(n),
             "u": float(obs.fps[m, n, 0]), "v": float(obs.fps[m, n, 1])}
            for m, n in zip(ms, ns)
        ],
        "wand_pairs": [[2 * k, 2 * k + 1] for k in range(obs.n_frames)],
    }
    if low_start_markers is not None:
        doc["low_start_markers"] = int(low_start_markers)
    if truth is not None:
        doc["ground_truth"] = state_to_dict(truth)
    return doc


def dataset_from_dict(doc):
    """Validate a dataset document. Returns ``(ObservationSet, truth_or_None, low_start_markers)``."""
    validate(doc, DATASET_SCHEMA)
    n_cam, n_mark = doc["n_cameras"], doc["n_markers"]
    if len(doc["intrinsics"]) != n_cam:
        raise SchemaError(f"expected {n_cam} entries, got {len(doc['intrinsics'])}", ["intrinsics"])
    if n_mark % 2:
        raise SchemaError("marker count must be even", ["n_markers"])
    expected = [[2 * k, 2 * k + 1] for k in range(n_mark // 2)]
    if doc["wand_pairs"] != expected:
        raise SchemaError("wand pairs must be consecutive marker rows [2k, 2k+1]", ["wand_pairs"])
    fps = np.full((n_mark, n_cam, 2), np.nan)
    for i, o in enumerate(doc["observations"]):
        m, n = o["marker_index"], o["camera_index"]
        if m >= n_mark:
            raise SchemaError(f"marker index {m} out of range", ["observations", i, "marker_index"])
        if n >= n_cam:
            raise SchemaError(f"camera index {n} out of range", ["observations", i, "camera_index"])
        if np.isfinite(fps[m, n, 0]):
            raise SchemaError(f"duplicate observation ({m}, {n})", ["observations", i])
        fps[m, n] = o["u"], o["v"]
    obs = ObservationSet(fps, intrinsics_from_list(doc["intrinsics"]), float(doc["wand_length"]))
    truth = None
    if "ground_truth" in doc:
        truth = state_from_dict(doc["ground_truth"])
        if truth.n_cameras != n_cam or truth.n_markers != n_mark:
            raise SchemaError("ground truth size does not match the dataset", ["ground_truth"])
    return obs, truth, doc.get("low_start_markers")


def read_dataset(path):
    return dataset_from_dict(load_json(path))


def write_dataset(path, obs, truth=None, low_start_markers=None):
    dump_json(dataset_to_dict(obs, truth, low_start_markers), path)


def state_doc(state: SceneState, intrinsics=None, kind="state", **extra) -> dict:
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "state": state_to_dict(state)}
    if intrinsics is not None:
        doc["intrinsics"] = intrinsics_to_list(intrinsics)
    doc.update({k: v for k, v in extra.items() if v is not None})
    return doc


def read_state(path):
    """Read a ``state`` or ``results`` document. Returns ``(SceneState, doc)``."""
    doc = load_json(path)
    validate(doc, STATE_DOC_SCHEMA)
    st = doc["state"]
    if not (len(st["angles"]) == len(st["t_prime"])):
        raise SchemaError("angles and t_prime lengths differ", ["state"])
    return state_from_dict(st), doc


def write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in rows:
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
