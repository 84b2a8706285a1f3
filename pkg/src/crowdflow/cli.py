"""Command-line driver for the full pipeline.

Subcommands: synth (scenario -> detection stream), track (association and
grouping only), train (structured SVM + action classifier), infer (full
recognition), eval (metrics report). Exit codes: 0 success, 2 missing
model file, 3 malformed input, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import fields as dataclass_fields

import numpy as np

from . import engine, io, learn, metrics, synth
from .core import BBox, Config, LabelSpaces
from .learn import ConvergenceError

EXIT_OK = 0
EXIT_MISSING_MODEL = 2
EXIT_FORMAT = 3


def _load_config(args) -> Config:
    """Flags beat the config file, which beats the defaults."""
    values = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclass_fields(Config)}
        unknown = set(raw) - known
        if unknown:
            raise io.FormatError(f"unknown config keys: {sorted(unknown)}")
        values.update(raw)
    if getattr(args, "lam", None) is not None:
        values["lam"] = args.lam
    if getattr(args, "svm_d", None) is not None:
        values["svm_d"] = args.svm_d
    if getattr(args, "svm_eps", None) is not None:
        values["svm_eps"] = args.svm_eps
    return Config().replace(**values)


def _records_by_frame(records):
    by_frame = {}
    for rec in records:
        by_frame.setdefault(rec["frame"], []).append(rec)
    for k in by_frame:
        by_frame[k].sort(key=lambda r: (r["bbox"][0], r["bbox"][1], r["bbox"][2],
                                        r["bbox"][3], r["pose"]))
    return by_frame


def _write_predictions(path, states, spaces: LabelSpaces, with_labels: bool):
    """Input records plus a `pred` object, canonical order within frames."""
    records = []
    for st in states:
        group_of_det = {}
        for l, members in enumerate(st.group_members):
            for i in members:
                group_of_det[i] = l
        for i, det in enumerate(st.detections):
            rec = io.detection_to_record(det)
            l = group_of_det.get(i, -1)
            pred = {"track": st.tracks[i].id,
                    "group": st.groups[l].id if l >= 0 else -1}
            if with_labels:
                pred["action"] = spaces.atomic[st.labels.actions[i]]
                if l >= 0:
                    pred["group_act"] = spaces.group[st.labels.group_acts[l]]
                pred["collective"] = spaces.collective[st.labels.collective]
            rec["pred"] = pred
            records.append(rec)
    io.write_jsonl(path, records)


def _throughput(n_frames: int, elapsed: float):
    fps = n_frames / elapsed if elapsed > 0 else float("inf")
    print(f"processed {n_frames} frames in {elapsed:.3f}s ({fps:.1f} frames/sec)",
          file=sys.stderr)


def cmd_synth(args) -> int:
    with open(args.scenario, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if args.seed is not None:
        data["seed"] = args.seed
    scenario = synth.Scenario.from_dict(data)
    result = synth.generate(scenario)
    io.write_detections(args.out, {k: dets for k, dets in enumerate(result.frames)})
    return EXIT_OK


def _load_model(path):
    try:
        return io.read_model(path)
    except FileNotFoundError:
        print(f"error: model file not found: {path}", file=sys.stderr)
        sys.exit(EXIT_MISSING_MODEL)


def cmd_track(args) -> int:
    cfg = _load_config(args)
    frames = io.read_detections(args.infile)
    start = time.perf_counter()
    states = engine.run_stream(frames, model=None, cfg=cfg, mode=args.mode)
    _throughput(len(states), time.perf_counter() - start)
    _write_predictions(args.out, states, LabelSpaces(), with_labels=False)
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    all_samples = []
    action_feats, action_labels = [], []
    hist_len = None
    for path in args.infile:
        frames = io.read_detections(path)
        if not frames:
            continue
        first = next(iter(frames.values()))
        if first:
            hist_len = first[0].appearance.shape[0]
        feats, labels = engine.collect_action_dataset(frames, cfg)
        action_feats.extend(feats)
        action_labels.extend(labels)
    if not action_feats:
        raise io.FormatError("no annotated frames found in the training input")
    action_model = engine.ActionModel().fit(np.array(action_feats),
                                            np.array(action_labels, dtype=bool))
    for path in args.infile:
        frames = io.read_detections(path)
        all_samples.extend(engine.build_training_samples(frames, action_model, cfg))
    if not all_samples:
        raise io.FormatError("no annotated frames found in the training input")
    start = time.perf_counter()
    try:
        result = learn.train(all_samples, d=cfg.svm_d, eps=cfg.svm_eps,
                             max_rounds=cfg.svm_max_rounds)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - start
    print(f"trained on {len(all_samples)} frames in {elapsed:.1f}s "
          f"({result.rounds} cutting-plane rounds, slack {result.xi:.4g})",
          file=sys.stderr)
    model = engine.Model(weights=result.weights, action=action_model,
                         hist_len=hist_len or cfg.hist_len)
    io.write_model(args.out_model, model)
    return EXIT_OK


def cmd_infer(args) -> int:
    cfg = _load_config(args)
    frames = io.read_detections(args.infile)
    model = _load_model(args.model)
    start = time.perf_counter()
    states = engine.run_stream(frames, model=model, cfg=cfg)
    _throughput(len(states), time.perf_counter() - start)
    _write_predictions(args.out, states, model.spaces, with_labels=True)
    if args.overlay:
        io.write_overlay(args.overlay, states, model.spaces)
    return EXIT_OK


def _frame_labels(records, spaces: LabelSpaces, source: str):
    """metrics.FrameLabels per frame from record dicts ("gt" or "pred")."""
    out = {}
    by_frame = _records_by_frame(records)
    for frame, recs in by_frame.items():
        tagged = [r.get(source) for r in recs]
        if any(t is None for t in tagged):
            continue
        if any(t.get("collective") is None or t.get("action") is None for t in tagged):
            continue
        collective = spaces.collective.index(tagged[0]["collective"])
        actions = tuple(spaces.atomic.index(t["action"]) for t in tagged)
        groups = {}
        for i, t in enumerate(tagged):
            groups.setdefault(t["group"], []).append(i)
        group_list = []
        for gid in sorted(groups):
            members = groups[gid]
            act = tagged[members[0]].get("group_act")
            if act is None:
                continue
            group_list.append((tuple(members), spaces.group.index(act)))
        out[frame] = metrics.FrameLabels(collective, tuple(group_list), actions)
    return out


def cmd_eval(args) -> int:
    spaces = LabelSpaces()
    pred_records = io.read_records(args.pred)
    gt_records = io.read_records(args.gt)
    pred_frames = _records_by_frame(pred_records)
    gt_frames = _records_by_frame(gt_records)

    def id_boxes(frames, source):
        out = {}
        for frame, recs in frames.items():
            rows = []
            for r in recs:
                tag = r.get(source)
                if tag is not None:
                    rows.append((tag["track"], BBox(*r["bbox"])))
            out[frame] = rows
        return out

    gt_tracks = id_boxes(gt_frames, "gt")
    switches = metrics.id_switches(id_boxes(pred_frames, "pred"), gt_tracks)
    total_tracks = len({tid for rows in gt_tracks.values() for tid, _ in rows})

    pred_parts, gt_parts = [], []
    for frame in sorted(gt_frames):
        if frame not in pred_frames:
            continue
        gt_recs, pred_recs = gt_frames[frame], pred_frames[frame]
        if len(gt_recs) != len(pred_recs):
            raise io.FormatError(
                f"frame {frame}: prediction and ground truth have different "
                "detection counts; evaluate the stream the predictions came from")
        gt_parts.append([r["gt"]["group"] for r in gt_recs])
        pred_parts.append([r["pred"]["group"] for r in pred_recs])

    report = {
        "tracking": {
            "id_switches": switches,
            "total_gt_tracks": total_tracks,
            "switch_rate": switches / total_tracks if total_tracks else 0.0,
        },
        "grouping": metrics.grouping_metrics(pred_parts, gt_parts),
    }
    pred_labels = _frame_labels(pred_records, spaces, "pred")
    gt_labels = _frame_labels(gt_records, spaces, "gt")
    if pred_labels and gt_labels:
        report["activities"] = metrics.activity_metrics(pred_labels, gt_labels, spaces)
    io.write_report(args.report, report)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdflow",
        description="Causal crowd video analysis: tracking, group detection, "
                    "and multi-level activity recognition.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic detection stream",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="output detections (JSONL)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="run track association and grouping only",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--in", dest="infile", required=True, help="detections (JSONL)")
    p.add_argument("--out", required=True, help="output with pred track/group (JSONL)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="grouping weight in the joint objective (default 1.0)")
    p.add_argument("--mode", choices=("full", "track_only", "group_only"),
                   default="full", help="ablation mode")
    p.add_argument("--config", default=None, help="config JSON file")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("train", help="train the activity model",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--in", dest="infile", action="append", required=True,
                   help="annotated detections (JSONL); repeatable")
    p.add_argument("--out-model", required=True, help="output model file")
    p.add_argument("--D", dest="svm_d", type=float, default=None,
                   help="SVM regularization trade-off (default 100)")
    p.add_argument("--eps", dest="svm_eps", type=float, default=None,
                   help="cutting-plane tolerance (default 1e-3)")
    p.add_argument("--config", default=None, help="config JSON file")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="full pipeline: track, group, recognize",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--in", dest="infile", required=True, help="detections (JSONL)")
    p.add_argument("--model", required=True, help="trained model file")
    p.add_argument("--out", required=True, help="labeled output (JSONL)")
    p.add_argument("--overlay", default=None, help="optional overlay dump (JSONL)")
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="grouping weight in the joint objective (default 1.0)")
    p.add_argument("--config", default=None, help="config JSON file")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truth",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--pred", required=True, help="predicted stream (JSONL)")
    p.add_argument("--gt", required=True, help="ground-truth stream (JSONL)")
    p.add_argument("--report", required=True, help="output report (JSON)")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except io.FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
