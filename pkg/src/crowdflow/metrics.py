"""Evaluation metrics: identity switches, clustering quality, and activity
accuracies with confusion matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .core import BBox

IOU_MATCH = 0.5
GROUP_MATCH_JACCARD = 0.5


def _greedy_iou_pairs(gt: Sequence[Tuple[int, BBox]],
                      pred: Sequence[Tuple[int, BBox]]) -> List[Tuple[int, int]]:
    """Greedy one-to-one bbox matching, highest IoU first, threshold 0.5."""
    cands = []
    for a, (gid, gbox) in enumerate(gt):
        for b, (pid, pbox) in enumerate(pred):
            iou = gbox.iou(pbox)
            if iou >= IOU_MATCH:
                cands.append((iou, a, b))
    cands.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_a, used_b, pairs = set(), set(), []
    for _, a, b in cands:
        if a in used_a or b in used_b:
            continue
        used_a.add(a)
        used_b.add(b)
        pairs.append((gt[a][0], pred[b][0]))
    return pairs


def id_switches(pred_frames: Dict[int, list], gt_frames: Dict[int, list]) -> int:
    """Count frames where a ground-truth person's matched predicted track id
    differs from the id it was matched to last time.

    Both inputs map frame -> [(id, BBox), ...].
    """
    last_id: Dict[int, int] = {}
    switches = 0
    for frame in sorted(gt_frames):
        pred = pred_frames.get(frame, [])
        for gid, pid in _greedy_iou_pairs(gt_frames[frame], pred):
            if gid in last_id and last_id[gid] != pid:
                switches += 1
            last_id[gid] = pid
    return switches


def _as_labels(partition: Sequence[int]) -> np.ndarray:
    return np.asarray(partition, dtype=np.int64)


def purity(pred: Sequence[int], gt: Sequence[int]) -> float:
    """Fraction of elements in the majority ground-truth class of their
    predicted cluster. Not symmetric."""
    pred, gt = _as_labels(pred), _as_labels(gt)
    if pred.shape != gt.shape or pred.size == 0:
        raise ValueError("partitions must be nonempty and equally sized")
    total = 0
    for c in np.unique(pred):
        members = gt[pred == c]
        total += np.bincount(members).max()
    return total / pred.size


def rand_index(pred: Sequence[int], gt: Sequence[int]) -> float:
    """(agreeing-same + agreeing-different pairs) / all pairs."""
    pred, gt = _as_labels(pred), _as_labels(gt)
    if pred.shape != gt.shape:
        raise ValueError("partitions must be equally sized")
    n = pred.size
    if n < 2:
        raise ValueError("rand index needs at least 2 elements")
    same_pred = pred[:, None] == pred[None, :]
    same_gt = gt[:, None] == gt[None, :]
    iu = np.triu_indices(n, k=1)
    agree = (same_pred[iu] == same_gt[iu]).sum()
    return agree / iu[0].size


def _entropy(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def nmi(pred: Sequence[int], gt: Sequence[int]) -> float:
    """2 I(pred; gt) / (H(pred) + H(gt)), with 0 log 0 = 0.

    Two identical trivial partitions (both single-cluster) score 1.
    """
    pred, gt = _as_labels(pred), _as_labels(gt)
    if pred.shape != gt.shape or pred.size == 0:
        raise ValueError("partitions must be nonempty and equally sized")
    n = pred.size
    pu, pi = np.unique(pred, return_inverse=True)
    gu, gi = np.unique(gt, return_inverse=True)
    cont = np.zeros((pu.size, gu.size))
    for a, b in zip(pi, gi):
        cont[a, b] += 1
    hp = _entropy(cont.sum(axis=1))
    hg = _entropy(cont.sum(axis=0))
    if hp + hg == 0.0:
        return 1.0
    mi = 0.0
    for a in range(pu.size):
        for b in range(gu.size):
            nij = cont[a, b]
            if nij > 0:
                mi += (nij / n) * math.log(n * nij / (cont[a].sum() * cont[:, b].sum()))
    return 2.0 * mi / (hp + hg)


@dataclass(frozen=True)
class AccuracyReport:
    overall: float
    mean_class: float
    confusion: np.ndarray  # rows = ground truth, cols = prediction
    labels: tuple

    def as_dict(self) -> dict:
        return {
            "overall": self.overall,
            "mean_class": self.mean_class,
            "confusion": self.confusion.astype(int).tolist(),
            "labels": list(self.labels),
        }


def accuracy_report(pairs: Sequence[Tuple[int, int]], labels: Sequence[str]) -> AccuracyReport:
    """Overall and mean-class accuracy from (gt, pred) index pairs.

    Mean-class accuracy is the unweighted mean of the row-normalized
    confusion diagonal over classes that actually occur.
    """
    k = len(labels)
    conf = np.zeros((k, k))
    for g, p in pairs:
        conf[g, p] += 1
    total = conf.sum()
    overall = float(np.trace(conf) / total) if total else 0.0
    support = conf.sum(axis=1)
    present = support > 0
    recalls = np.zeros(k)
    recalls[present] = np.diag(conf)[present] / support[present]
    mean_class = float(recalls[present].mean()) if present.any() else 0.0
    return AccuracyReport(overall, mean_class, conf, tuple(labels))


def match_groups(pred_groups: Sequence[Sequence[int]],
                 gt_groups: Sequence[Sequence[int]]) -> List[Tuple[int, int]]:
    """Pair predicted groups with ground-truth groups by member-set Jaccard
    overlap strictly above 0.5; greedy, best overlap first."""
    cands = []
    for a, pg in enumerate(pred_groups):
        ps = set(pg)
        for b, gg in enumerate(gt_groups):
            gs = set(gg)
            union = len(ps | gs)
            jac = len(ps & gs) / union if union else 0.0
            if jac > GROUP_MATCH_JACCARD:
                cands.append((jac, a, b))
    cands.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_a, used_b, pairs = set(), set(), []
    for _, a, b in cands:
        if a in used_a or b in used_b:
            continue
        used_a.add(a)
        used_b.add(b)
        pairs.append((a, b))
    return pairs


@dataclass(frozen=True, eq=False)
class FrameLabels:
    """Per-frame labels in index form, for activity scoring.

    `groups` holds member detection indices with a group-activity label per
    group; `actions` is per detection.
    """

    collective: int
    groups: tuple            # ((member indices, group label), ...)
    actions: tuple


def activity_metrics(pred: Dict[int, FrameLabels], gt: Dict[int, FrameLabels],
                     spaces) -> dict:
    """Accuracies and confusion matrices at the three levels.

    Collective over frames, atomic over person-frames, group activity only
    over predicted groups that match a ground-truth group (> 0.5 member
    Jaccard).
    """
    coll_pairs, grp_pairs, atom_pairs = [], [], []
    for frame in sorted(gt):
        if frame not in pred:
            continue
        p, g = pred[frame], gt[frame]
        coll_pairs.append((g.collective, p.collective))
        atom_pairs.extend(zip(g.actions, p.actions))
        matches = match_groups([m for m, _ in p.groups], [m for m, _ in g.groups])
        for a, b in matches:
            grp_pairs.append((g.groups[b][1], p.groups[a][1]))
    return {
        "collective": accuracy_report(coll_pairs, spaces.collective).as_dict(),
        "group": accuracy_report(grp_pairs, spaces.group).as_dict(),
        "atomic": accuracy_report(atom_pairs, spaces.atomic).as_dict(),
    }


def grouping_metrics(pred_partitions: Sequence[Sequence[int]],
                     gt_partitions: Sequence[Sequence[int]]) -> dict:
    """Frame-averaged purity / Rand index / NMI over parallel per-frame
    partitions (cluster id per detection)."""
    ps, rs, ns = [], [], []
    for p, g in zip(pred_partitions, gt_partitions):
        if len(p) == 0:
            continue
        ps.append(purity(p, g))
        ns.append(nmi(p, g))
        if len(p) >= 2:
            rs.append(rand_index(p, g))
    return {
        "purity": float(np.mean(ps)) if ps else 0.0,
        "rand_index": float(np.mean(rs)) if rs else 0.0,
        "nmi": float(np.mean(ns)) if ns else 0.0,
        "frames": len(ps),
    }
