"""File formats: detection streams (JSONL), trained models (binary), and
evaluation reports (JSON).

Streams are JSON Lines so they can be appended causally; models are binary
with a checksum so round trips are bit-exact. All readers reject malformed
input with the offending line number.
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Dict, List, Optional

import numpy as np

from .core import (ATOMIC_ACTIONS, COLLECTIVE_ACTIVITIES, GROUP_ACTIVITIES,
                   BBox, Detection, GroundTruth, LabelSpaces, canonical_order)
from .engine import Model
from .features import ActionModel
from .potentials import WeightVector, total_dim

MODEL_MAGIC = b"CFW1"
HIST_TOL = 1e-6


class FormatError(ValueError):
    """Malformed file content; `line` is 1-based when it applies."""

    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


def _require(cond: bool, message: str, line: int):
    if not cond:
        raise FormatError(message, line)


def parse_record(obj: dict, line: int) -> dict:
    """Validate one detection record; returns it with the histogram
    renormalized to an exact unit sum."""
    _require(isinstance(obj, dict), "record must be an object", line)
    for key in ("frame", "bbox", "pose", "hist"):
        _require(key in obj, f"missing field {key!r}", line)
    _require(isinstance(obj["frame"], int), "frame must be an integer", line)
    bbox = obj["bbox"]
    _require(isinstance(bbox, list) and len(bbox) == 4,
             "bbox must be [x, y, w, h]", line)
    _require(all(isinstance(v, (int, float)) for v in bbox),
             "bbox entries must be numbers", line)
    _require(bbox[2] > 0 and bbox[3] > 0, "bbox must have positive size", line)
    _require(isinstance(obj["pose"], int) and 0 <= obj["pose"] <= 7,
             "pose must be an integer in 0..7", line)
    conf = obj.get("pose_conf", 1.0)
    _require(isinstance(conf, (int, float)) and 0.0 <= conf <= 1.0,
             "pose_conf must be in [0, 1]", line)
    hist = obj["hist"]
    _require(isinstance(hist, list) and len(hist) > 0, "hist must be a nonempty list", line)
    arr = np.asarray(hist, dtype=float)
    _require(bool(np.all(np.isfinite(arr))) and bool(np.all(arr >= 0)),
             "hist entries must be finite and nonnegative", line)
    _require(abs(float(arr.sum()) - 1.0) <= HIST_TOL,
             f"hist must sum to 1 (off by {abs(float(arr.sum()) - 1.0):.2e})", line)
    obj = dict(obj)
    obj["hist"] = (arr / arr.sum()).tolist()
    gt = obj.get("gt")
    if gt is not None:
        _require(isinstance(gt, dict), "gt must be an object", line)
        _require(isinstance(gt.get("track"), int), "gt.track must be an integer", line)
        _require(isinstance(gt.get("group"), int), "gt.group must be an integer", line)
        for key, names in (("action", ATOMIC_ACTIONS), ("group_act", GROUP_ACTIVITIES),
                           ("collective", COLLECTIVE_ACTIVITIES)):
            if gt.get(key) is not None:
                _require(gt[key] in names, f"unknown gt.{key} {gt[key]!r}", line)
    return obj


def read_records(path) -> List[dict]:
    """All records of a JSONL stream, validated, frames non-decreasing."""
    records = []
    last_frame = None
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON ({exc.msg})", line_no) from exc
            rec = parse_record(obj, line_no)
            if last_frame is not None and rec["frame"] < last_frame:
                raise FormatError(
                    f"frame {rec['frame']} after frame {last_frame}; "
                    "frames must be non-decreasing", line_no)
            last_frame = rec["frame"]
            records.append(rec)
    return records


def record_to_detection(rec: dict) -> Detection:
    gt = rec.get("gt")
    truth = None
    if gt is not None:
        truth = GroundTruth(track=gt["track"], group=gt["group"],
                            action=gt.get("action"), group_act=gt.get("group_act"),
                            collective=gt.get("collective"))
    return Detection(frame=rec["frame"],
                     bbox=BBox(*rec["bbox"]),
                     pose=rec["pose"],
                     appearance=np.asarray(rec["hist"], dtype=float),
                     pose_conf=float(rec.get("pose_conf", 1.0)),
                     gt=truth)


def read_detections(path) -> Dict[int, List[Detection]]:
    """Detections grouped by frame, canonically ordered within each frame."""
    by_frame: Dict[int, List[Detection]] = {}
    for rec in read_records(path):
        by_frame.setdefault(rec["frame"], []).append(record_to_detection(rec))
    return {k: canonical_order(v) for k, v in by_frame.items()}


def detection_to_record(det: Detection) -> dict:
    rec = {
        "frame": det.frame,
        "bbox": [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
        "pose": int(det.pose),
        "pose_conf": float(det.pose_conf),
        "hist": [float(v) for v in det.appearance],
    }
    if det.gt is not None:
        gt = {"track": det.gt.track, "group": det.gt.group}
        if det.gt.action is not None:
            gt["action"] = det.gt.action
        if det.gt.group_act is not None:
            gt["group_act"] = det.gt.group_act
        if det.gt.collective is not None:
            gt["collective"] = det.gt.collective
        rec["gt"] = gt
    return rec


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")


def write_detections(path, frames: Dict[int, List[Detection]]) -> None:
    records = []
    for k in sorted(frames):
        for det in canonical_order(frames[k]):
            records.append(detection_to_record(det))
    write_jsonl(path, records)


def write_model(path, model: Model) -> None:
    """Binary model file, v1: magic, label-space sizes, feature dims, the
    flat weights as little-endian float64, the action classifier, then a
    CRC32 of everything before it."""
    spaces = model.weights.spaces
    if not model.action.trained:
        raise ValueError("refusing to write a model with an untrained action classifier")
    action_block = np.append(model.action.weights, model.action.bias)
    payload = MODEL_MAGIC
    payload += struct.pack("<6I", spaces.n_collective, spaces.n_group,
                           spaces.n_atomic, spaces.n_poses, model.hist_len,
                           model.weights.flat.shape[0])
    payload += model.weights.flat.astype("<f8").tobytes()
    payload += struct.pack("<I", action_block.shape[0])
    payload += action_block.astype("<f8").tobytes()
    payload += struct.pack("<I", zlib.crc32(payload))
    with open(path, "wb") as fh:
        fh.write(payload)


def read_model(path, expect_hist_len: Optional[int] = None) -> Model:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 + 24 + 4 or blob[:4] != MODEL_MAGIC:
        raise FormatError("not a crowdflow model file (bad magic/version)")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    if zlib.crc32(blob[:-4]) != stored_crc:
        raise FormatError("model file corrupt (checksum mismatch)")
    n_y, n_g, n_h, n_p, hist_len, n_w = struct.unpack("<6I", blob[4:28])
    spaces = LabelSpaces()
    if (n_y, n_g, n_h, n_p) != (spaces.n_collective, spaces.n_group,
                                spaces.n_atomic, spaces.n_poses):
        raise FormatError(
            f"label-space sizes {(n_y, n_g, n_h, n_p)} do not match this build")
    if n_w != total_dim(spaces):
        raise FormatError(
            f"dimension mismatch: model has {n_w} weights, expected {total_dim(spaces)}")
    if expect_hist_len is not None and hist_len != expect_hist_len:
        raise FormatError(
            f"dimension mismatch: model trained with histogram length {hist_len}, "
            f"stream has {expect_hist_len}")
    off = 28
    need = n_w * 8
    if len(blob) < off + need + 4:
        raise FormatError("model file truncated")
    flat = np.frombuffer(blob[off:off + need], dtype="<f8").astype(np.float64)
    off += need
    (n_a,) = struct.unpack("<I", blob[off:off + 4])
    off += 4
    if len(blob) < off + n_a * 8 + 4:
        raise FormatError("model file truncated")
    action_block = np.frombuffer(blob[off:off + n_a * 8], dtype="<f8").astype(np.float64)
    action = ActionModel(weights=action_block[:-1], bias=float(action_block[-1]))
    return Model(weights=WeightVector(flat, spaces), action=action,
                 hist_len=hist_len)


def write_report(path, metrics: dict) -> None:
    """Deterministically ordered JSON report."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_report(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_overlay(path, states, spaces: Optional[LabelSpaces] = None) -> None:
    """Per-detection overlay records (bbox, track, group, labels) for
    external plotting of qualitative results."""
    spaces = spaces or LabelSpaces()
    records = []
    for st in states:
        group_of_det = {}
        for l, members in enumerate(st.group_members):
            for i in members:
                group_of_det[i] = l
        for i, det in enumerate(st.detections):
            l = group_of_det.get(i, -1)
            rec = {
                "frame": st.frame,
                "bbox": [det.bbox.x, det.bbox.y, det.bbox.w, det.bbox.h],
                "track": st.tracks[i].id,
                "group": st.groups[l].id if l >= 0 else -1,
                "collective": spaces.collective[st.labels.collective],
            }
            if l >= 0 and st.labels.group_acts:
                rec["group_act"] = spaces.group[st.labels.group_acts[l]]
            if st.labels.actions:
                rec["action"] = spaces.atomic[st.labels.actions[i]]
            records.append(rec)
    write_jsonl(path, records)
