"""Exact per-frame solver for the joint track/group assignment program.

The frame objective maximizes  sum_ij Psi_ij * M_ij  +  lambda * sum_il
Omega_il * C_il  subject to: at most one track per detection, at most one
detection per track, at most one group per detection. With both score
matrices fixed, the program splits exactly into a maximum-weight bipartite
matching (track part) and independent per-row choices (group part); both
relaxations are integral, so the decomposition is the global optimum of
the binary program. The growing loop wraps the solver and seeds singleton
groups until every detection is grouped.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels, compat
from .core import Config, Detection, Track
from .compat import GroupCandidate


@dataclass(frozen=True, eq=False)
class AssocProblem:
    """One fixed instance of the joint assignment program."""

    track_scores: np.ndarray  # (N, T) in [-1, 1]
    group_scores: np.ndarray  # (N, G) in [-1, 1]
    lam: float = 1.0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")


@dataclass(frozen=True, eq=False)
class AssocSolution:
    """Optimal assignment: per-detection track and group choices.

    `track_of[i]` / `group_of[i]` are column indices, -1 for unassigned.
    """

    track_of: np.ndarray
    group_of: np.ndarray
    objective: float

    def psi_matrix(self, n_tracks: int) -> np.ndarray:
        """Binary detection-by-track assignment matrix."""
        m = np.zeros((self.track_of.shape[0], n_tracks), dtype=np.int8)
        for i, j in enumerate(self.track_of):
            if j >= 0:
                m[i, j] = 1
        return m

    def omega_matrix(self, n_groups: int) -> np.ndarray:
        m = np.zeros((self.group_of.shape[0], n_groups), dtype=np.int8)
        for i, l in enumerate(self.group_of):
            if l >= 0:
                m[i, l] = 1
        return m


def solve_fixed(prob: AssocProblem) -> AssocSolution:
    """Globally optimal assignment for fixed score matrices.

    Track part: maximum-weight matching over strictly positive entries
    (an unmatched pair beats any non-positive edge). Group part: each row
    independently takes its best group iff that score is positive; ties go
    to the lowest group index.
    """
    m, c = prob.track_scores, prob.group_scores
    track_of = _kernels.solve_matching(m)
    n = c.shape[0]
    group_of = np.full(n, -1, dtype=np.int64)
    if c.shape[1]:
        best = np.argmax(c, axis=1)
        vals = c[np.arange(n), best]
        group_of = np.where(vals > 0.0, best, -1)
    obj = 0.0
    for i, j in enumerate(track_of):
        if j >= 0:
            obj += m[i, j]
    for i, l in enumerate(group_of):
        if l >= 0:
            obj += prob.lam * c[i, l]
    return AssocSolution(track_of, np.asarray(group_of, dtype=np.int64), float(obj))


@dataclass(frozen=True, eq=False)
class GroupingResult:
    """Output of the group-growing loop."""

    track_of: np.ndarray
    group_of: np.ndarray          # candidate index per detection (all >= 0)
    candidates: tuple             # final candidate list (may include empty ones)
    det_velocities: np.ndarray    # (N, 2) velocities used for the motion term
    iterations: int
    next_group_id: int
    trace: tuple                  # per-iteration AssocSolution, for verification


def grow_groups(dets: Sequence[Detection], tracks: Sequence[Track],
                prev_candidates: Sequence[GroupCandidate],
                cfg: Optional[Config] = None,
                next_group_id: int = 0,
                keep_trace: bool = False) -> GroupingResult:
    """Iterative joint solve that grows the group set until every detection
    is assigned.

    Starts from the previous frame's groups (singletons already removed by
    the caller; on the very first frame the caller passes one candidate
    holding every detection). Whenever the optimum leaves detections
    ungrouped, the lowest-canonical-order one founds a new singleton group
    and the program is re-solved; each round assigns at least the founder,
    so the loop runs at most N times.
    """
    cfg = cfg or Config()
    n = len(dets)
    if n == 0:
        return GroupingResult(np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                              tuple(prev_candidates), np.zeros((0, 2)), 0,
                              next_group_id, ())

    m = compat.build_track_scores(dets, tracks, cfg)
    track_of = _kernels.solve_matching(m)
    det_vels = np.zeros((n, 2))
    for i, j in enumerate(track_of):
        if j >= 0:
            det_vels[i] = np.asarray(tracks[j].velocity, dtype=float)

    candidates = list(prev_candidates)
    c = compat.build_group_scores(dets, candidates, det_vels, cfg)
    sol = solve_fixed(AssocProblem(m, c, cfg.lam))
    trace = [sol] if keep_trace else []
    iterations = 0  # seed-and-resolve passes; the initial solve is free
    while True:
        unassigned = np.flatnonzero(sol.group_of < 0)
        if unassigned.size == 0:
            break
        if iterations >= n:  # cannot happen; guards against geometry bugs
            raise RuntimeError("group growing failed to terminate")
        iterations += 1
        founder = int(unassigned[0])
        cand = GroupCandidate.from_detection(next_group_id, dets[founder],
                                             det_vels[founder])
        next_group_id += 1
        candidates.append(cand)
        # existing columns depend only on the (fixed) matching and candidate
        # geometry, so only the new column needs computing
        new_col = compat.build_group_scores(dets, [cand], det_vels, cfg)
        c = np.hstack([c, new_col]) if c.size else new_col
        sol = solve_fixed(AssocProblem(m, c, cfg.lam))
        if keep_trace:
            trace.append(sol)

    return GroupingResult(sol.track_of, sol.group_of, tuple(candidates),
                          det_vels, iterations, next_group_id, tuple(trace))
