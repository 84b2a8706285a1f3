"""Observation vectors, velocity and action-slope estimation, and the
atomic-action classifier.

Per-person features are the outer product of a confidence-weighted pose
one-hot and a confidence-weighted action one-hot; group features are the
member mean plus a formation-alignment score; the scene feature is the mean
over everyone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import LabelSpaces, Track, mode_pose, pose_direction


class NotTrainedError(RuntimeError):
    """Raised when a classifier is used before training."""


def _slope(times: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of values over times; 0 for fewer than 2 points."""
    if times.size < 2:
        return 0.0
    t = times - times.mean()
    denom = float(np.dot(t, t))
    if denom == 0.0:
        return 0.0
    return float(np.dot(t, values - values.mean()) / denom)


def estimate_velocity(track: Track, window: int = 20) -> np.ndarray:
    """Foot-point velocity in pixels/frame: per-axis least-squares slopes
    over the last `window` history entries."""
    hist = track.history[-window:]
    times = np.array([f for f, _ in hist], dtype=float)
    feet = np.array([b.foot for _, b in hist])
    return np.array([_slope(times, feet[:, 0]), _slope(times, feet[:, 1])])


def action_features(track: Track, window: int = 20) -> np.ndarray:
    """Slopes of the top-left and bottom-right corners over time.

    (tl_x, tl_y, br_x, br_y) slopes; tracking both corners captures scale
    change from motion along the viewing direction, not just translation.
    """
    hist = track.history[-window:]
    times = np.array([f for f, _ in hist], dtype=float)
    tl = np.array([b.top_left for _, b in hist])
    br = np.array([b.bottom_right for _, b in hist])
    return np.array([
        _slope(times, tl[:, 0]),
        _slope(times, tl[:, 1]),
        _slope(times, br[:, 0]),
        _slope(times, br[:, 1]),
    ])


@dataclass
class ActionModel:
    """Linear max-margin classifier for standing-vs-walking slope features.

    Trained by deterministic full-batch subgradient descent on the
    L2-regularized hinge loss. Confidence is the logistic of the
    unsigned margin, so it lives in [0.5, 1).
    """

    weights: Optional[np.ndarray] = None
    bias: float = 0.0

    @property
    def trained(self) -> bool:
        return self.weights is not None

    def fit(self, feats: np.ndarray, walking: np.ndarray,
            reg: float = 1e-3, iters: int = 2000, lr: float = 0.5) -> "ActionModel":
        x = np.asarray(feats, dtype=float)
        y = np.where(np.asarray(walking, dtype=bool), 1.0, -1.0)
        w = np.zeros(x.shape[1])
        b = 0.0
        for t in range(1, iters + 1):
            margins = y * (x @ w + b)
            viol = margins < 1.0
            step = lr / (1.0 + reg * t)
            gw = reg * w - (y[viol, None] * x[viol]).sum(axis=0) / len(y)
            gb = -y[viol].sum() / len(y)
            w -= step * gw
            b -= step * gb
        self.weights = w
        self.bias = float(b)
        return self

    def predict(self, slopes: np.ndarray):
        """(action index, confidence). Zero margin counts as standing."""
        if not self.trained:
            raise NotTrainedError("action model has not been trained")
        margin = float(np.dot(self.weights, np.asarray(slopes, dtype=float)) + self.bias)
        action = 1 if margin > 0 else 0
        conf = 1.0 / (1.0 + np.exp(-abs(margin)))
        return action, float(conf)


def classify_action(slopes: np.ndarray, model: ActionModel):
    return model.predict(slopes)


def pose_position_score(pose_vec: np.ndarray, loc_i: np.ndarray,
                        loc_j: np.ndarray) -> float:
    """|p . (d_i - d_j)|: alignment of the pair's offset with the pose.

    High for people standing one behind another along their shared gaze
    (queue), near zero when they stand side by side (waiting).
    """
    p = np.asarray(pose_vec, dtype=float)
    return float(abs(np.dot(p, np.asarray(loc_i, dtype=float) - np.asarray(loc_j, dtype=float))))


def histogram(labels: Sequence[int], n_classes: int) -> np.ndarray:
    """Normalized label histogram (sums to 1). Empty input is an error."""
    if len(labels) == 0:
        raise ValueError("cannot build a histogram from an empty label list")
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=n_classes).astype(float)
    return counts / counts.sum()


def person_feature(pose: int, pose_conf: float, action: int, action_conf: float,
                   spaces: Optional[LabelSpaces] = None) -> np.ndarray:
    """Flattened outer product of the pose and action one-hots, each scaled
    by its confidence. Layout is pose-major."""
    spaces = spaces or LabelSpaces()
    pose_vec = np.zeros(spaces.n_poses)
    pose_vec[pose] = pose_conf
    act_vec = np.zeros(spaces.n_atomic)
    act_vec[action] = action_conf
    return np.outer(pose_vec, act_vec).ravel()


def group_feature(member_feats: np.ndarray, member_locs: np.ndarray,
                  member_poses: Sequence[int], member_heights: np.ndarray) -> np.ndarray:
    """Member mean feature plus the mean pairwise pose-position score.

    The pair score uses the pose vector of the member poses' mode and is
    divided by the mean member height so different camera scales stay
    comparable. Singleton groups get 0.
    """
    feats = np.asarray(member_feats, dtype=float)
    mean_feat = feats.mean(axis=0)
    locs = np.asarray(member_locs, dtype=float)
    k = locs.shape[0]
    if k < 2:
        return np.concatenate([mean_feat, [0.0]])
    p = pose_direction(mode_pose(member_poses))
    total = 0.0
    pairs = 0
    for i in range(k):
        for j in range(i + 1, k):
            total += pose_position_score(p, locs[i], locs[j])
            pairs += 1
    scale = float(np.asarray(member_heights, dtype=float).mean())
    return np.concatenate([mean_feat, [total / pairs / scale]])


def scene_feature(all_feats: np.ndarray) -> np.ndarray:
    """Mean of every person's feature vector."""
    return np.asarray(all_feats, dtype=float).mean(axis=0)
