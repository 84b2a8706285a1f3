"""Compatibility scores for the joint assignment problem.

Two score matrices are produced per frame: detection-vs-track (appearance,
location, motion) and detection-vs-group (motion, location, field-of-view
overlap). All entries live in [-1, 1]. Person locations are bbox
bottom-centers: interaction geometry happens on the ground plane.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .core import Config, Detection, GroupState, Track, pose_direction

AREA_TOL = 1e-9
# row count past which track-score construction is split across threads
_PARALLEL_MIN_ROWS = 64


@dataclass(frozen=True)
class KernelParams:
    """Weights and normalizers of the three-term exponential kernel."""

    alpha: tuple = (1 / 3, 1 / 3, 1 / 3)
    beta: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
            raise ValueError("alpha entries must be nonnegative and sum to 1")
        if np.any(b <= 0):
            raise ValueError("beta entries must be positive")


def score_kernel(dist2, params: KernelParams) -> float:
    """Bounded similarity from squared distances: sum_n alpha_n * (2 e^{-beta_n d2_n} - 1)."""
    d2 = np.asarray(dist2, dtype=float)
    if np.any(d2 < 0):
        raise ValueError("squared distances must be nonnegative")
    a = np.asarray(params.alpha, dtype=float)
    b = np.asarray(params.beta, dtype=float)
    return float(np.sum(a * (2.0 * np.exp(-b * d2) - 1.0)))


@dataclass(frozen=True, eq=False)
class GroupCandidate:
    """A group hypothesis scored against the current detections.

    Either a carried-over group from the previous frame or a singleton
    seeded during the growing loop. Geometry is frozen while the loop runs;
    real `GroupState`s are rebuilt from the final assignment.
    """

    id: int
    member_locs: np.ndarray
    member_poses: np.ndarray
    member_heights: np.ndarray
    velocity: np.ndarray

    @property
    def centroid(self) -> np.ndarray:
        return self.member_locs.mean(axis=0)

    @property
    def mean_height(self) -> float:
        return float(self.member_heights.mean())

    @classmethod
    def from_group(cls, grp: GroupState) -> "GroupCandidate":
        return cls(grp.id, grp.member_locs, grp.member_poses,
                   grp.member_heights, np.asarray(grp.velocity, dtype=float))

    @classmethod
    def from_detection(cls, gid: int, det: Detection, velocity) -> "GroupCandidate":
        return cls(gid,
                   det.bbox.foot[None, :],
                   np.array([det.pose]),
                   np.array([det.bbox.h]),
                   np.asarray(velocity, dtype=float))


def _det_arrays(dets: Sequence[Detection]):
    hists = np.stack([d.appearance for d in dets]) if dets else np.zeros((0, 0))
    locs = np.array([d.bbox.foot for d in dets]).reshape(len(dets), 2)
    heights = np.array([d.bbox.h for d in dets], dtype=float)
    return hists, locs, heights


def build_track_scores(dets: Sequence[Detection], tracks: Sequence[Track],
                       cfg: Optional[Config] = None) -> np.ndarray:
    """N x T matrix of detection/track compatibilities in [-1, 1]."""
    cfg = cfg or Config()
    n, t = len(dets), len(tracks)
    if n == 0 or t == 0:
        return np.zeros((n, t))
    det_hists, det_locs, det_heights = _det_arrays(dets)
    trk_hists = np.stack([tr.appearance_ref for tr in tracks])
    trk_locs = np.array([tr.last_bbox.foot for tr in tracks])
    trk_vels = np.array([np.asarray(tr.velocity, dtype=float) for tr in tracks])
    alpha = np.asarray(cfg.alpha_track, dtype=float)

    if cfg.threads > 1 and n >= _PARALLEL_MIN_ROWS:
        chunks = np.array_split(np.arange(n), cfg.threads)
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(
                lambda idx: _kernels.build_track_scores(
                    det_hists[idx], det_locs[idx], det_heights[idx],
                    trk_hists, trk_locs, trk_vels, alpha),
                [c for c in chunks if len(c)]))
        return np.vstack(parts)
    return _kernels.build_track_scores(det_hists, det_locs, det_heights,
                                       trk_hists, trk_locs, trk_vels, alpha)


def halfplane_fov(loc, direction, image_size) -> np.ndarray:
    """Field of view: the half of the image on the `direction` side of `loc`.

    The boundary line passes through `loc` with inward normal `direction`;
    the result is that half-plane clipped to the image rectangle, a convex
    polygon in the image's vertex orientation.
    """
    w, h = image_size
    rect = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    return _kernels.clip_halfplane(rect, np.asarray(direction, dtype=float),
                                   np.asarray(loc, dtype=float))


def fov(loc, pose: int, image_size) -> np.ndarray:
    """Field-of-view polygon for a quantized pose class."""
    return halfplane_fov(loc, pose_direction(pose), image_size)


def group_fov(member_locs, member_poses, image_size) -> np.ndarray:
    """Interaction zone of a group: intersection of the members' FoVs."""
    w, h = image_size
    poly = np.array([[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]])
    for loc, pose in zip(np.asarray(member_locs, dtype=float), member_poses):
        poly = _kernels.clip_halfplane(poly, pose_direction(int(pose)), loc)
        if poly.shape[0] < 3:
            return poly
    return poly


def pose_compat(det: Detection, member_locs, member_poses, image_size,
                group_poly: Optional[np.ndarray] = None) -> float:
    """Fraction of the group's interaction zone visible to the detection.

    area(group FoV intersected with detection FoV) / area(group FoV);
    defined as 0 when the group FoV is degenerate (non-facing members leave
    no interaction zone).
    """
    poly = group_poly if group_poly is not None else group_fov(member_locs, member_poses, image_size)
    denom = _kernels.polygon_area(poly)
    if denom <= AREA_TOL:
        return 0.0
    inter = _kernels.clip_halfplane(poly, pose_direction(det.pose), det.bbox.foot)
    ratio = _kernels.polygon_area(inter) / denom
    return min(max(ratio, 0.0), 1.0)


def build_group_scores(dets: Sequence[Detection],
                       candidates: Sequence[GroupCandidate],
                       det_velocities: np.ndarray,
                       cfg: Optional[Config] = None) -> np.ndarray:
    """N x G matrix of detection/group compatibilities in [-1, 1].

    `det_velocities` holds the velocity of each detection's associated
    track (zero for unassigned detections), as required by the motion term.
    """
    cfg = cfg or Config()
    n, g = len(dets), len(candidates)
    if n == 0 or g == 0:
        return np.zeros((n, g))
    _, det_locs, _ = _det_arrays(dets)
    cents = np.array([c.centroid for c in candidates])
    vels = np.array([c.velocity for c in candidates])
    # location normalizer 1/height^2 so the kernel argument is the
    # dimensionless (distance / body height)^2; a 1/height normalizer
    # saturates to -1 at group scale and loses all distance signal
    spatial_norm = np.array([1.0 / c.mean_height ** 2 for c in candidates])
    alpha = np.asarray(cfg.alpha_group, dtype=float)
    scores = _kernels.build_group_kernel_scores(
        det_locs, np.asarray(det_velocities, dtype=float),
        cents, vels, spatial_norm, alpha,
    )
    a_pose = float(alpha[2])
    fovs = [group_fov(c.member_locs, c.member_poses, cfg.image_size) for c in candidates]
    for l, c in enumerate(candidates):
        for i, det in enumerate(dets):
            s = pose_compat(det, c.member_locs, c.member_poses, cfg.image_size,
                            group_poly=fovs[l])
            scores[i, l] += a_pose * (2.0 * s - 1.0)
    return scores
