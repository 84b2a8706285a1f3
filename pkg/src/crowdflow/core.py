"""Domain types shared by every stage of the engine.

All types are immutable value objects: a frame's state is a pure function of
the previous state plus the new detections, and states can safely be shared
between threads or processed on independent streams concurrently.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

COLLECTIVE_ACTIVITIES = ("crossing", "waiting", "queuing", "walking", "talking")
GROUP_ACTIVITIES = ("walking", "waiting", "queuing", "talking")
ATOMIC_ACTIONS = ("standing", "walking")
POSE_NAMES = (
    "right", "right-front", "front", "left-front",
    "left", "left-back", "back", "right-back",
)
N_POSES = 8


def pose_direction(pose: int) -> np.ndarray:
    """Unit vector for one of the 8 quantized pose classes (45 degree wheel)."""
    angle = pose * (math.pi / 4.0)
    return np.array([math.cos(angle), math.sin(angle)])


def quantize_heading(angle_rad: float) -> int:
    """Nearest pose class for a continuous heading angle (radians)."""
    return int(round(angle_rad / (math.pi / 4.0))) % N_POSES


@dataclass(frozen=True)
class LabelSpaces:
    """The three activity label spaces plus the pose wheel size."""

    collective: tuple = COLLECTIVE_ACTIVITIES
    group: tuple = GROUP_ACTIVITIES
    atomic: tuple = ATOMIC_ACTIONS
    n_poses: int = N_POSES

    @property
    def n_collective(self) -> int:
        return len(self.collective)

    @property
    def n_group(self) -> int:
        return len(self.group)

    @property
    def n_atomic(self) -> int:
        return len(self.atomic)

    @property
    def person_dim(self) -> int:
        """Length of the per-person observation (pose x action outer product)."""
        return self.n_poses * self.n_atomic

    @property
    def group_dim(self) -> int:
        """Per-group observation: mean person feature plus the formation score."""
        return self.person_dim + 1

    @property
    def scene_dim(self) -> int:
        return self.person_dim


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus width/height, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"bbox must have positive size, got w={self.w} h={self.h}")

    @property
    def foot(self) -> np.ndarray:
        """Bottom-center point; the person's ground-plane location."""
        return np.array([self.x + self.w / 2.0, self.y + self.h])

    @property
    def top_left(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def bottom_right(self) -> np.ndarray:
        return np.array([self.x + self.w, self.y + self.h])

    def iou(self, other: "BBox") -> float:
        x1 = max(self.x, other.x)
        y1 = max(self.y, other.y)
        x2 = min(self.x + self.w, other.x + other.w)
        y2 = min(self.y + self.h, other.y + other.h)
        iw, ih = max(0.0, x2 - x1), max(0.0, y2 - y1)
        inter = iw * ih
        union = self.w * self.h + other.w * other.h - inter
        return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class GroundTruth:
    """Optional annotations carried by a detection for training/evaluation."""

    track: int
    group: int
    action: Optional[str] = None
    group_act: Optional[str] = None
    collective: Optional[str] = None


@dataclass(frozen=True, eq=False)
class Detection:
    """One person observation in one frame."""

    frame: int
    bbox: BBox
    pose: int
    appearance: np.ndarray
    pose_conf: float = 1.0
    gt: Optional[GroundTruth] = None

    def __post_init__(self):
        if not 0 <= self.pose < N_POSES:
            raise ValueError(f"pose must be in 0..{N_POSES - 1}, got {self.pose}")
        app = np.asarray(self.appearance, dtype=np.float64)
        if app.ndim != 1:
            raise ValueError("appearance must be a 1-d histogram")
        if np.any(app < 0) or abs(float(app.sum()) - 1.0) > 1e-9:
            raise ValueError("appearance must be a unit-sum nonnegative histogram")
        app.setflags(write=False)
        object.__setattr__(self, "appearance", app)


def canonical_order(dets: Sequence[Detection]) -> list:
    """Deterministic detection ordering; makes every downstream tie-break
    independent of the input permutation."""
    return sorted(dets, key=lambda d: (d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h, d.pose))


@dataclass(frozen=True, eq=False)
class Track:
    """A causal sequence of associated detections with a velocity estimate."""

    id: int
    history: tuple  # ((frame, BBox), ...) with strictly increasing frames
    appearance_ref: np.ndarray  # histogram of the most recent detection
    velocity: np.ndarray  # pixels/frame, least-squares slope of the foot point
    last_pose: int

    @property
    def last_frame(self) -> int:
        return self.history[-1][0]

    @property
    def last_bbox(self) -> BBox:
        return self.history[-1][1]


@dataclass(frozen=True, eq=False)
class GroupState:
    """A detected group: member track ids plus derived geometry.

    Centroid and velocity are the exact means over the members; the member
    arrays are retained because the next frame's compatibility scores need
    the members' individual locations and poses (field-of-view geometry).
    """

    id: int
    members: frozenset
    centroid: np.ndarray
    velocity: np.ndarray
    mode_pose: int
    member_locs: np.ndarray  # (k, 2) foot points
    member_poses: np.ndarray  # (k,) int
    member_heights: np.ndarray  # (k,) float


def mode_pose(poses: Sequence[int]) -> int:
    """Statistical mode; ties broken toward the lowest pose class."""
    counts = np.bincount(np.asarray(poses, dtype=int), minlength=N_POSES)
    return int(np.argmax(counts))


@dataclass(frozen=True)
class LabelState:
    """Activity labels at one frame: scene level, per group, per person."""

    collective: int
    group_acts: tuple
    actions: tuple

    @classmethod
    def empty(cls, collective: int = 0) -> "LabelState":
        return cls(collective, (), ())


@dataclass(frozen=True, eq=False)
class FrameState:
    """Complete engine state after processing one frame.

    ``tracks[i]`` is the track that detection ``detections[i]`` belongs to
    (every detection either extended an existing track or founded a new one,
    and unmatched tracks are terminated immediately), so detections, tracks,
    ``labels.actions`` and the rows of the assignment matrices all share one
    index. ``track_assign`` is indexed against the previous frame's tracks.
    """

    frame: int
    detections: tuple
    tracks: tuple
    groups: tuple
    labels: LabelState
    track_assign: np.ndarray  # (N, T_prev) binary
    group_assign: np.ndarray  # (N, N_groups) binary, one 1 per row
    next_track_id: int = 0
    next_group_id: int = 0

    @classmethod
    def initial(cls, before_frame: int = 0) -> "FrameState":
        """State representing "no history"; feed it the first frame."""
        return cls(
            frame=before_frame - 1,
            detections=(),
            tracks=(),
            groups=(),
            labels=LabelState.empty(),
            track_assign=np.zeros((0, 0), dtype=np.int8),
            group_assign=np.zeros((0, 0), dtype=np.int8),
        )

    @property
    def group_members(self) -> list:
        """Member detection indices per group, from the assignment matrix."""
        return [list(np.flatnonzero(self.group_assign[:, l])) for l in range(self.group_assign.shape[1])]


def _threads_from_env() -> int:
    raw = os.environ.get("CROWDFLOW_THREADS", "").strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Config:
    """Engine parameters. Defaults follow the reference setup; everything is
    overridable from the CLI or a config file."""

    hist_len: int = 24                 # appearance histogram length B
    image_size: tuple = (720, 480)     # (width, height) in pixels
    lam: float = 1.0                   # weight of the grouping term in the joint objective
    velocity_window: int = 20          # frames used for slope fitting
    alpha_track: tuple = (1 / 3, 1 / 3, 1 / 3)
    # (motion, location, field-of-view). Location carries the majority so
    # that a distant detection scores negative even when its motion and
    # gaze happen to agree with the group; with equal weights the two
    # saturating +1 terms would outvote any distance.
    alpha_group: tuple = (0.2, 0.6, 0.2)
    infer_eps: float = 0.01
    infer_max_iter: int = 50
    svm_d: float = 100.0               # regularization trade-off of the structured SVM
    svm_eps: float = 1e-3              # cutting-plane violation tolerance
    svm_max_rounds: int = 500
    threads: int = field(default_factory=_threads_from_env)

    def replace(self, **kw) -> "Config":
        from dataclasses import replace as _replace
        return _replace(self, **kw)
