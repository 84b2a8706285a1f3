"""The causal per-frame pipeline.

Each frame is processed in two passes: (1) joint track association and
group detection by the exact assignment solver inside the group-growing
loop, (2) multi-level activity recognition by coordinate-ascent inference
warm-started from the previous frame. Output at frame k is a pure function
of frames <= k.

Ablation modes exist for evaluation: "track_only" skips grouping,
"group_only" skips track association (zero velocities, groups carried by
geometry only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import assoc, compat, features
from .core import (Config, Detection, FrameState, GroupState, LabelSpaces,
                   LabelState, Track, canonical_order, mode_pose)
from .features import ActionModel, action_features, estimate_velocity
from .infer import infer
from .learn import TrainSample
from .potentials import Observations, WeightVector


@dataclass(frozen=True, eq=False)
class Model:
    """Everything needed to run recognition: the structured weights plus the
    atomic-action classifier, and the histogram length they were trained
    with."""

    weights: WeightVector
    action: ActionModel
    hist_len: int

    @property
    def spaces(self) -> LabelSpaces:
        return self.weights.spaces


def _new_track(tid: int, det: Detection) -> Track:
    return Track(id=tid, history=((det.frame, det.bbox),),
                 appearance_ref=det.appearance, velocity=np.zeros(2),
                 last_pose=det.pose)


def _extend_track(track: Track, det: Detection, window: int) -> Track:
    hist = track.history + ((det.frame, det.bbox),)
    stub = Track(id=track.id, history=hist, appearance_ref=det.appearance,
                 velocity=np.zeros(2), last_pose=det.pose)
    return Track(id=track.id, history=hist, appearance_ref=det.appearance,
                 velocity=estimate_velocity(stub, window), last_pose=det.pose)


def _group_states(dets, tracks, group_of, candidates) -> tuple:
    """Materialize final groups from the assignment; empty candidates drop."""
    groups = []
    col_map = {}
    for l, cand in enumerate(candidates):
        members = [i for i in range(len(dets)) if group_of[i] == l]
        if not members:
            continue
        col_map[l] = len(groups)
        locs = np.array([dets[i].bbox.foot for i in members])
        poses = np.array([dets[i].pose for i in members])
        heights = np.array([dets[i].bbox.h for i in members], dtype=float)
        vel = np.mean([np.asarray(tracks[i].velocity, dtype=float) for i in members], axis=0)
        groups.append(GroupState(
            id=cand.id, members=frozenset(tracks[i].id for i in members),
            centroid=locs.mean(axis=0), velocity=vel, mode_pose=mode_pose(poses),
            member_locs=locs, member_poses=poses, member_heights=heights))
    return tuple(groups), col_map


def _observations(dets, tracks, group_members, model: Model, cfg: Config) -> Observations:
    spaces = model.spaces
    person = np.zeros((len(dets), spaces.person_dim))
    for i, det in enumerate(dets):
        act, conf = model.action.predict(action_features(tracks[i], cfg.velocity_window))
        person[i] = features.person_feature(det.pose, det.pose_conf, act, conf, spaces)
    group_feats = np.zeros((len(group_members), spaces.group_dim))
    for l, members in enumerate(group_members):
        locs = np.array([dets[i].bbox.foot for i in members])
        poses = [dets[i].pose for i in members]
        heights = np.array([dets[i].bbox.h for i in members], dtype=float)
        group_feats[l] = features.group_feature(person[members], locs, poses, heights)
    return Observations(scene=features.scene_feature(person),
                        group_feats=group_feats, person_feats=person,
                        groups=tuple(tuple(m) for m in group_members))


def advance_frame(prev: FrameState, dets: Sequence[Detection],
                  model: Optional[Model] = None,
                  cfg: Optional[Config] = None,
                  mode: str = "full") -> FrameState:
    """Process one frame: associate, group, recognize.

    `dets` must all carry frame index prev.frame + 1. Tracks unmatched this
    frame are terminated immediately (a returning person gets a new id).
    An empty detection list yields an empty frame that only carries the
    scene label forward.
    """
    cfg = cfg or Config()
    k = prev.frame + 1
    dets = canonical_order(dets)
    for d in dets:
        if d.frame != k:
            raise ValueError(f"detection at frame {d.frame}, expected {k}")
    if model is not None and dets and dets[0].appearance.shape[0] != model.hist_len:
        raise ValueError(
            f"model was trained with histogram length {model.hist_len}, "
            f"stream has {dets[0].appearance.shape[0]}")
    n = len(dets)
    if n == 0:
        return FrameState(
            frame=k, detections=(), tracks=(), groups=(),
            labels=LabelState.empty(prev.labels.collective),
            track_assign=np.zeros((0, len(prev.tracks)), dtype=np.int8),
            group_assign=np.zeros((0, 0), dtype=np.int8),
            next_track_id=prev.next_track_id, next_group_id=prev.next_group_id)

    prev_tracks = () if mode == "group_only" else prev.tracks

    if mode == "track_only":
        m = compat.build_track_scores(dets, prev_tracks, cfg)
        track_of = assoc.solve_fixed(assoc.AssocProblem(
            m, np.zeros((n, 0)), cfg.lam)).track_of
        group_of = np.full(n, -1, dtype=np.int64)
        candidates = ()
        next_group_id = prev.next_group_id
    else:
        # first frame: no carried groups, so the growing loop starts from a
        # single seeded group and builds the partition one group at a time
        prev_cands = [compat.GroupCandidate.from_group(g) for g in prev.groups
                      if len(g.members) >= 2]
        if mode == "group_only":
            prev_cands = [compat.GroupCandidate(
                c.id, c.member_locs, c.member_poses, c.member_heights,
                np.zeros(2)) for c in prev_cands]
        next_group_id = prev.next_group_id
        grown = assoc.grow_groups(dets, prev_tracks, prev_cands, cfg,
                                  next_group_id=next_group_id)
        track_of, group_of = grown.track_of, grown.group_of
        candidates = grown.candidates
        next_group_id = grown.next_group_id

    next_track_id = prev.next_track_id
    tracks: List[Track] = []
    for i, det in enumerate(dets):
        j = int(track_of[i]) if i < len(track_of) else -1
        if j >= 0:
            tracks.append(_extend_track(prev_tracks[j], det, cfg.velocity_window))
        else:
            tracks.append(_new_track(next_track_id, det))
            next_track_id += 1

    groups, col_map = _group_states(dets, tracks, group_of, candidates)
    group_assign = np.zeros((n, len(groups)), dtype=np.int8)
    for i in range(n):
        l = int(group_of[i])
        if l >= 0 and l in col_map:
            group_assign[i, col_map[l]] = 1
    track_assign = np.zeros((n, len(prev_tracks)), dtype=np.int8)
    for i in range(n):
        j = int(track_of[i]) if i < len(track_of) else -1
        if j >= 0:
            track_assign[i, j] = 1

    if model is not None and len(groups) > 0:
        members = [list(np.flatnonzero(group_assign[:, l]))
                   for l in range(len(groups))]
        obs = _observations(dets, tracks, members, model, cfg)
        prev_group_label = {g.id: prev.labels.group_acts[idx]
                            for idx, g in enumerate(prev.groups)}
        g_warm = tuple(prev_group_label.get(g.id, 0) for g in groups)
        h_warm = []
        for i in range(n):
            j = int(track_of[i]) if i < len(track_of) else -1
            if j >= 0 and j < len(prev.labels.actions):
                h_warm.append(prev.labels.actions[j])
            else:
                h_warm.append(0)
        warm = LabelState(prev.labels.collective, g_warm, tuple(h_warm))
        labels = infer(model.weights, obs, warm_start=warm,
                       eps=cfg.infer_eps, max_iter=cfg.infer_max_iter)
    else:
        labels = LabelState(prev.labels.collective,
                            (0,) * len(groups), (0,) * n)

    return FrameState(frame=k, detections=tuple(dets), tracks=tuple(tracks),
                      groups=groups, labels=labels,
                      track_assign=track_assign, group_assign=group_assign,
                      next_track_id=next_track_id, next_group_id=next_group_id)


def run_stream(frames: Dict[int, List[Detection]],
               model: Optional[Model] = None,
               cfg: Optional[Config] = None,
               mode: str = "full") -> List[FrameState]:
    """Run the engine over a frame-indexed detection stream.

    Missing frame indices inside the span are treated as empty frames.
    """
    cfg = cfg or Config()
    if not frames:
        return []
    lo, hi = min(frames), max(frames)
    state = FrameState.initial(before_frame=lo)
    out = []
    for k in range(lo, hi + 1):
        state = advance_frame(state, frames.get(k, []), model, cfg, mode)
        out.append(state)
    return out


def _gt_or_raise(det: Detection):
    if det.gt is None:
        raise ValueError("training requires ground-truth annotations on every detection")
    return det.gt


def collect_action_dataset(frames: Dict[int, List[Detection]], cfg: Optional[Config] = None):
    """Slope features and walking/standing labels from annotated tracks."""
    cfg = cfg or Config()
    histories: Dict[int, list] = {}
    feats, labels = [], []
    for k in sorted(frames):
        for det in frames[k]:
            gt = _gt_or_raise(det)
            hist = histories.setdefault(gt.track, [])
            hist.append((det.frame, det.bbox))
            if gt.action is None:
                continue
            stub = Track(id=gt.track, history=tuple(hist[-cfg.velocity_window:]),
                         appearance_ref=det.appearance, velocity=np.zeros(2),
                         last_pose=det.pose)
            feats.append(action_features(stub, cfg.velocity_window))
            labels.append(1 if gt.action == "walking" else 0)
    return np.array(feats), np.array(labels, dtype=int)


def train_action_model(frames: Dict[int, List[Detection]],
                       cfg: Optional[Config] = None) -> ActionModel:
    feats, labels = collect_action_dataset(frames, cfg)
    if len(feats) == 0:
        raise ValueError("no annotated detections to train the action model on")
    return ActionModel().fit(feats, labels.astype(bool))


def build_training_samples(frames: Dict[int, List[Detection]],
                           action_model: ActionModel,
                           cfg: Optional[Config] = None,
                           spaces: Optional[LabelSpaces] = None) -> List[TrainSample]:
    """One supervised sample per annotated frame, using the ground-truth
    grouping and tracking (the recognition stage is trained given the
    structure, as at inference time the structure pass runs first)."""
    cfg = cfg or Config()
    spaces = spaces or LabelSpaces()
    histories: Dict[int, list] = {}
    samples = []
    for k in sorted(frames):
        dets = canonical_order(frames[k])
        if not dets:
            continue
        person = np.zeros((len(dets), spaces.person_dim))
        actions_gt = []
        group_ids = []
        for i, det in enumerate(dets):
            gt = _gt_or_raise(det)
            hist = histories.setdefault(gt.track, [])
            hist.append((det.frame, det.bbox))
            stub = Track(id=gt.track, history=tuple(hist[-cfg.velocity_window:]),
                         appearance_ref=det.appearance, velocity=np.zeros(2),
                         last_pose=det.pose)
            act, conf = action_model.predict(action_features(stub, cfg.velocity_window))
            person[i] = features.person_feature(det.pose, det.pose_conf, act, conf, spaces)
            actions_gt.append(spaces.atomic.index(gt.action))
            group_ids.append(gt.group)
        uniq = sorted(set(group_ids))
        members = [tuple(i for i, g in enumerate(group_ids) if g == u) for u in uniq]
        group_feats = np.zeros((len(uniq), spaces.group_dim))
        group_labels = []
        for l, mem in enumerate(members):
            locs = np.array([dets[i].bbox.foot for i in mem])
            poses = [dets[i].pose for i in mem]
            heights = np.array([dets[i].bbox.h for i in mem], dtype=float)
            group_feats[l] = features.group_feature(person[list(mem)], locs, poses, heights)
            group_labels.append(spaces.group.index(dets[mem[0]].gt.group_act))
        obs = Observations(scene=features.scene_feature(person),
                           group_feats=group_feats, person_feats=person,
                           groups=tuple(members))
        y = spaces.collective.index(dets[0].gt.collective)
        samples.append(TrainSample(obs, LabelState(y, tuple(group_labels),
                                                   tuple(actions_gt))))
    return samples
