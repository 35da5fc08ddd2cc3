"""File formats: ASCII PLY clouds, detection JSON, parameter JSON, metric CSV.

PLY files are plain ASCII with an optional per-vertex ``attn`` property.
Floats are written with ``repr`` (shortest round-trip decimal), so write →
read reproduces values exactly.  Detection files are strictly validated
JSON; schema violations are reported with a JSON pointer to the offending
element.  All readers reject non-finite values.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from jsonschema import Draft202012Validator

from .core import (
    AttentionField,
    Box3D,
    DetectionSet,
    PointCloud,
    ShapeError,
)
from .metrics import EvalConfig
from .nncore import AttentionParams, MlpParams
from .qdagg import DecoderLayerParams, DecoderParams, HeadParams, SeeQueryState


class ParseError(ValueError):
    """Malformed input file."""


class PlyParseError(ParseError):
    """PLY parsing failure, carrying the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class DetectionSchemaError(ParseError):
    """Detection JSON violated the schema, carrying a JSON pointer."""

    def __init__(self, message: str, pointer: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer


# --------------------------------------------------------------------------
# PLY point clouds
# --------------------------------------------------------------------------

def write_ply(
    path, cloud: PointCloud, attention: Optional[AttentionField] = None
) -> None:
    """Write an ASCII PLY vertex cloud, optionally with an ``attn`` column."""
    if attention is not None:
        attention.paired_with(cloud)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
    ]
    if attention is not None:
        lines.append("property double attn")
    lines.append("end_header")
    for i, p in enumerate(cloud.points):
        # repr of builtin float = shortest decimal that round-trips exactly
        row = f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}"
        if attention is not None:
            row += f" {float(attention.weights[i])!r}"
        lines.append(row)
    Path(path).write_text("\n".join(lines) + "\n")


def read_ply(path) -> tuple[PointCloud, Optional[AttentionField]]:
    """Parse an ASCII PLY vertex cloud written by :func:`write_ply`.

    Accepts ``float`` or ``double`` properties; ``x``, ``y``, ``z`` are
    required and ``attn`` is optional.  Raises :class:`PlyParseError` with
    the offending line number on malformed input.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise PlyParseError("missing 'ply' magic", 1)

    vertex_count = None
    properties: list[str] = []
    header_end = None
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if tokens[1:] != ["ascii", "1.0"]:
                raise PlyParseError(f"unsupported format {' '.join(tokens[1:])}", lineno)
        elif tokens[0] == "element":
            if tokens[1] != "vertex" or len(tokens) != 3:
                raise PlyParseError(f"unsupported element {' '.join(tokens[1:])}", lineno)
            try:
                vertex_count = int(tokens[2])
            except ValueError:
                raise PlyParseError(f"bad vertex count {tokens[2]!r}", lineno) from None
        elif tokens[0] == "property":
            if len(tokens) != 3 or tokens[1] not in ("float", "double"):
                raise PlyParseError(f"unsupported property {' '.join(tokens[1:])}", lineno)
            properties.append(tokens[2])
        elif tokens[0] == "end_header":
            header_end = lineno
            break
        else:
            raise PlyParseError(f"unexpected header token {tokens[0]!r}", lineno)
    if header_end is None:
        raise PlyParseError("header never terminated with end_header", len(lines))
    if vertex_count is None:
        raise PlyParseError("header declares no vertex element", header_end)
    if properties[:3] != ["x", "y", "z"]:
        raise PlyParseError(f"need x, y, z properties, got {properties}", header_end)
    has_attn = properties[3:] == ["attn"]
    if not has_attn and len(properties) > 3:
        raise PlyParseError(f"unsupported extra properties {properties[3:]}", header_end)

    rows = []
    data_lines = [
        (lineno, line)
        for lineno, line in enumerate(lines[header_end:], start=header_end + 1)
        if line.strip()
    ]
    if len(data_lines) != vertex_count:
        raise PlyParseError(
            f"header declares {vertex_count} vertices but found {len(data_lines)} rows",
            data_lines[vertex_count][0] if len(data_lines) > vertex_count
            else header_end + len(data_lines),
        )
    for lineno, line in data_lines:
        fields = line.split()
        if len(fields) != len(properties):
            raise PlyParseError(
                f"expected {len(properties)} values, got {len(fields)}", lineno
            )
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise PlyParseError(f"non-numeric value in {line!r}", lineno) from None
        if not all(np.isfinite(values)):
            raise PlyParseError("non-finite vertex value", lineno)
        rows.append(values)

    data = np.array(rows).reshape(vertex_count, len(properties))
    cloud = PointCloud(data[:, :3])
    attn = AttentionField(data[:, 3]) if has_attn else None
    return cloud, attn


# --------------------------------------------------------------------------
# Detection JSON
# --------------------------------------------------------------------------

_PI = float(np.pi)

_DETECTION_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["label", "score", "center", "size", "yaw"],
        "properties": {
            "label": {"type": "integer", "minimum": 0},
            "score": {"type": "number", "minimum": 0, "maximum": 1},
            "center": {
                "type": "array", "minItems": 3, "maxItems": 3,
                "items": {"type": "number"},
            },
            "size": {
                "type": "array", "minItems": 3, "maxItems": 3,
                "items": {"type": "number", "exclusiveMinimum": 0},
            },
            "yaw": {"type": "number", "minimum": -_PI, "exclusiveMaximum": _PI},
        },
    },
}

_detection_validator = Draft202012Validator(_DETECTION_SCHEMA)


def _reject_constant(value):
    raise ValueError(f"non-finite JSON value {value!r}")


def read_detections(path) -> DetectionSet:
    """Load a detection list from strictly validated JSON."""
    try:
        payload = json.loads(Path(path).read_text(), parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc}") from exc

    error = next(iter(_detection_validator.iter_errors(payload)), None)
    if error is not None:
        pointer = "/" + "/".join(str(p) for p in error.absolute_path)
        raise DetectionSchemaError(error.message, pointer)

    boxes = tuple(
        Box3D(center=d["center"], size=d["size"], yaw=d["yaw"]) for d in payload
    )
    return DetectionSet(
        boxes=boxes,
        labels=tuple(d["label"] for d in payload),
        scores=tuple(d["score"] for d in payload),
    )


def write_detections(path, detections: DetectionSet) -> None:
    payload = [
        {
            "label": detections.labels[i],
            "score": detections.scores[i],
            "center": detections.boxes[i].center.tolist(),
            "size": detections.boxes[i].size.tolist(),
            "yaw": detections.boxes[i].yaw,
        }
        for i in range(len(detections))
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


# --------------------------------------------------------------------------
# Model parameter JSON
# --------------------------------------------------------------------------

def _attention_to_json(p: AttentionParams) -> dict:
    return {
        "wq": p.wq.tolist(), "wk": p.wk.tolist(),
        "wv": p.wv.tolist(), "wo": p.wo.tolist(),
    }


def _attention_from_json(d: dict) -> AttentionParams:
    return AttentionParams(d["wq"], d["wk"], d["wv"], d["wo"])


def _mlp_to_json(p: MlpParams) -> dict:
    return {"w1": p.w1.tolist(), "b1": p.b1.tolist(), "w2": p.w2.tolist(), "b2": p.b2.tolist()}


def write_model_params(
    path, state: SeeQueryState, decoder: DecoderParams, head: HeadParams
) -> None:
    """Serialize a full parameter set for reproducible fixtures."""
    payload = {
        "see_query": {"q": state.q_see.tolist(), "mlp": _mlp_to_json(state.mlp)},
        "decoder": [
            {
                "self_attn": _attention_to_json(layer.self_attn),
                "cross_attn": _attention_to_json(layer.cross_attn),
            }
            for layer in decoder.layers
        ],
        "head": {"w_class": head.w_class.tolist(), "w_box": head.w_box.tolist()},
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def read_model_params(path) -> tuple[SeeQueryState, DecoderParams, HeadParams]:
    try:
        payload = json.loads(Path(path).read_text(), parse_constant=_reject_constant)
        see = payload["see_query"]
        state = SeeQueryState(
            q_see=see["q"],
            mlp=MlpParams(
                see["mlp"]["w1"], see["mlp"]["b1"], see["mlp"]["w2"], see["mlp"]["b2"]
            ),
        )
        decoder = DecoderParams(
            tuple(
                DecoderLayerParams(
                    _attention_from_json(layer["self_attn"]),
                    _attention_from_json(layer["cross_attn"]),
                )
                for layer in payload["decoder"]
            )
        )
        head = HeadParams(payload["head"]["w_class"], payload["head"]["w_box"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid parameter file {path}: {exc}") from exc
    return state, decoder, head


# --------------------------------------------------------------------------
# Metrics CSV and scene bundles
# --------------------------------------------------------------------------

def write_metrics_csv(path, per_class: dict[int, float], mean: float, cfg: EvalConfig) -> None:
    """Per-class AP rows in configured class order, with a final mean row."""
    order = sorted(per_class, key=lambda label: (label >= len(cfg.classes), label))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "ap"])
        for label in order:
            writer.writerow([cfg.class_name(label), repr(per_class[label])])
        writer.writerow(["mean", repr(mean)])


@dataclass(frozen=True)
class FileBundle:
    """A scene's files parsed together, with cross-file sizes reconciled."""

    cloud: PointCloud
    attention: Optional[AttentionField]
    gt: Optional[DetectionSet]
    predictions: Optional[DetectionSet]


def load_bundle(
    cloud_path, gt_path=None, predictions_path=None
) -> FileBundle:
    """Load a scene's PLY (+attn) and detection files, checking consistency."""
    cloud, attn = read_ply(cloud_path)
    if attn is not None and len(attn) != len(cloud):
        raise ShapeError("attention column length does not match vertex count")
    gt = read_detections(gt_path) if gt_path is not None else None
    preds = read_detections(predictions_path) if predictions_path is not None else None
    return FileBundle(cloud=cloud, attention=attn, gt=gt, predictions=preds)
