"""Exactness of the joint assignment solver and the group-growing loop."""

import itertools

import numpy as np
import pytest

from crowdflow import assoc, compat
from crowdflow.assoc import AssocProblem, GroupingResult, grow_groups, solve_fixed
from crowdflow.compat import GroupCandidate
from crowdflow.core import Config

from conftest import make_detection, make_track, unit_hist


def best_matching_by_enumeration(m):
    """Exhaustive max over all injective partial matchings (micro-DFS)."""
    n, t = m.shape
    rows = [list(map(float, m[i])) for i in range(n)]
    best = [0.0]

    def rec(i, used, acc):
        if i == n:
            if acc > best[0]:
                best[0] = acc
            return
        rec(i + 1, used, acc)
        row = rows[i]
        for j in range(t):
            bit = 1 << j
            if not used & bit:
                rec(i + 1, used | bit, acc + row[j])

    rec(0, 0, 0.0)
    return best[0]


def best_grouping_by_enumeration(c, lam):
    """Exhaustive max over all per-row group choices (including "none")."""
    n, g = c.shape
    if n == 0 or g == 0:
        return 0.0
    ext = np.hstack([np.zeros((n, 1)), lam * c])  # column 0 = unassigned
    best = -np.inf
    for combo in itertools.product(range(g + 1), repeat=n):
        val = sum(ext[i, ch] for i, ch in enumerate(combo))
        if val > best:
            best = val
    return best


def brute_force_objective(m, c, lam):
    """Optimal objective over all feasible (track, group) assignments.

    The two decision blocks share no variables or constraints and the
    objective is their sum, so the joint optimum is the sum of the two
    exhaustively enumerated optima.
    """
    return best_matching_by_enumeration(m) + best_grouping_by_enumeration(c, lam)


def joint_brute_force(m, c, lam):
    """Fully joint enumeration (no separability shortcut); tiny sizes only."""
    n, t = m.shape
    g = c.shape[1]
    best = -np.inf
    track_opts = [(-1,) + tuple(range(t))] * n
    for tracks in itertools.product(*track_opts):
        used = [j for j in tracks if j >= 0]
        if len(used) != len(set(used)):
            continue
        base = sum(m[i, j] for i, j in enumerate(tracks) if j >= 0)
        for groups in itertools.product(range(g + 1), repeat=n):
            val = base + sum(lam * c[i, ch - 1] for i, ch in enumerate(groups) if ch > 0)
            if val > best:
                best = val
    return best


class TestSolveFixed:
    def test_single_positive_pair(self):
        for lam in (0.5, 1.0, 2.0):
            sol = solve_fixed(AssocProblem(np.array([[1.0]]), np.array([[1.0]]), lam))
            assert sol.track_of.tolist() == [0]
            assert sol.group_of.tolist() == [0]
            assert sol.objective == pytest.approx(1.0 + lam)
            assert sol.psi_matrix(1).tolist() == [[1]]
            assert sol.omega_matrix(1).tolist() == [[1]]

    def test_negative_edge_stays_unmatched(self):
        sol = solve_fixed(AssocProblem(np.array([[-0.2]]), np.zeros((1, 0))))
        assert sol.track_of.tolist() == [-1]
        assert sol.objective == 0.0

    def test_negative_group_row_stays_ungrouped(self):
        sol = solve_fixed(AssocProblem(np.zeros((1, 0)), np.array([[-0.1, -0.9]])))
        assert sol.group_of.tolist() == [-1]

    def test_group_ties_break_to_lowest_index(self):
        sol = solve_fixed(AssocProblem(np.zeros((1, 0)), np.array([[0.5, 0.5]])))
        assert sol.group_of.tolist() == [0]

    def test_empty_dimensions(self):
        sol = solve_fixed(AssocProblem(np.zeros((0, 0)), np.zeros((0, 0))))
        assert sol.objective == 0.0

    def test_constraints_hold_on_random_instances(self, rng):
        for _ in range(200):
            n, t, g = (int(rng.integers(1, 7)), int(rng.integers(0, 8)),
                       int(rng.integers(0, 5)))
            prob = AssocProblem(rng.uniform(-1, 1, (n, t)),
                                rng.uniform(-1, 1, (n, g)), 1.0)
            sol = solve_fixed(prob)
            psi, omega = sol.psi_matrix(t), sol.omega_matrix(g)
            assert psi.sum(axis=1).max(initial=0) <= 1
            assert psi.sum(axis=0).max(initial=0) <= 1
            assert omega.sum(axis=1).max(initial=0) <= 1

    def test_matches_joint_enumeration_on_tiny_instances(self, rng):
        for _ in range(40):
            n, t, g = (int(rng.integers(1, 4)), int(rng.integers(0, 4)),
                       int(rng.integers(0, 3)))
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            m = rng.uniform(-1, 1, (n, t))
            c = rng.uniform(-1, 1, (n, g))
            sol = solve_fixed(AssocProblem(m, c, lam))
            assert sol.objective == pytest.approx(joint_brute_force(m, c, lam),
                                                  abs=1e-10)

    def test_matches_factored_enumeration(self, rng):
        for _ in range(150):
            n, t, g = (int(rng.integers(1, 7)), int(rng.integers(0, 8)),
                       int(rng.integers(0, 5)))
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            m = rng.uniform(-1, 1, (n, t))
            c = rng.uniform(-1, 1, (n, g))
            sol = solve_fixed(AssocProblem(m, c, lam))
            assert sol.objective == pytest.approx(brute_force_objective(m, c, lam),
                                                  abs=1e-10)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            AssocProblem(np.zeros((1, 1)), np.zeros((1, 1)), lam=0.0)


def outward_scene(n, cfg):
    """n people far apart, each looking away from all the others."""
    dets = []
    cx, cy = cfg.image_size[0] / 2, cfg.image_size[1] / 2
    for i in range(n):
        ang = 2 * np.pi * i / n
        fx = cx + 300 * np.cos(ang)
        fy = cy + 180 * np.sin(ang)
        pose = int(round(ang / (np.pi / 4))) % 8
        dets.append(make_detection(frame=0, x=fx - 16, y=fy - 80, pose=pose))
    return dets


class TestGrowGroups:
    def test_empty_input(self, cfg):
        res = grow_groups([], [], [], cfg)
        assert res.iterations == 0
        assert res.group_of.shape == (0,)

    def test_first_frame_grows_one_group_at_a_time(self, cfg):
        dets = [make_detection(frame=0, x=100 + 40 * i, y=160, pose=2)
                for i in range(3)]
        res = grow_groups(dets, [], [], cfg, keep_trace=True)
        # the first solve sees no groups; the next sees exactly one
        assert res.trace[0].group_of.tolist() == [-1, -1, -1]
        assert res.trace[1].group_of.shape == (3,)
        assert set(res.trace[1].group_of.tolist()) <= {-1, 0}
        assert np.all(res.group_of >= 0)

    def test_mutually_incompatible_detections_take_n_iterations(self, cfg):
        n = 5
        dets = outward_scene(n, cfg)
        res = grow_groups(dets, [], [], cfg, keep_trace=True)
        assert res.iterations == n
        assert sorted(res.group_of.tolist()) == list(range(n))  # all singletons

    def test_iteration_bound_and_universal_grouping(self, rng, cfg):
        for _ in range(30):
            n = int(rng.integers(1, 9))
            dets = [make_detection(frame=0, x=float(rng.uniform(30, 650)),
                                   y=float(rng.uniform(120, 440)),
                                   pose=int(rng.integers(0, 8)), rng=rng)
                    for _ in range(n)]
            res = grow_groups(dets, [], [], cfg, keep_trace=True)
            assert res.iterations <= n
            assert np.all(res.group_of >= 0)

    def test_constraints_hold_at_every_intermediate_solution(self, rng, cfg):
        dets = [make_detection(frame=0, x=float(rng.uniform(30, 650)),
                               y=float(rng.uniform(120, 440)),
                               pose=int(rng.integers(0, 8)), rng=rng)
                for _ in range(6)]
        res = grow_groups(dets, [], [], cfg, keep_trace=True)
        for k, sol in enumerate(res.trace):
            psi = sol.psi_matrix(0)
            omega = sol.omega_matrix(len(res.candidates))
            assert psi.shape == (6, 0)
            assert omega.sum(axis=1).max(initial=0) <= 1

    def test_grouped_set_grows_monotonically(self, rng, cfg):
        for _ in range(20):
            n = int(rng.integers(2, 8))
            dets = [make_detection(frame=0, x=float(rng.uniform(30, 650)),
                                   y=float(rng.uniform(120, 440)),
                                   pose=int(rng.integers(0, 8)), rng=rng)
                    for _ in range(n)]
            res = grow_groups(dets, [], [], cfg, keep_trace=True)
            assigned = [set(np.flatnonzero(sol.group_of >= 0).tolist())
                        for sol in res.trace]
            for a, b in zip(assigned, assigned[1:]):
                assert a <= b

    def test_two_comoving_clusters_recovered(self, cfg):
        # cluster A walks right, cluster B walks left, 400px apart
        tracks, dets = [], []
        for i in range(3):
            foot = (100.0, 140.0 + 50 * i)
            tracks.append(make_track(tid=i, frames_feet=((0, foot),),
                                     velocity=(3.0, 0.0), pose=0))
            dets.append(make_detection(frame=1, x=foot[0] + 3 - 16, y=foot[1] - 80,
                                       pose=0))
        for i in range(3):
            foot = (600.0, 140.0 + 50 * i)
            tracks.append(make_track(tid=3 + i, frames_feet=((0, foot),),
                                     velocity=(-3.0, 0.0), pose=4))
            dets.append(make_detection(frame=1, x=foot[0] - 3 - 16, y=foot[1] - 80,
                                       pose=4))
        res = grow_groups(dets, tracks, [], cfg)
        labels = res.group_of
        order = np.argsort([d.bbox.x for d in dets])
        left = {labels[i] for i in order[:3]}
        right = {labels[i] for i in order[3:]}
        assert len(left) == 1 and len(right) == 1 and left != right

        # the construction is certified by direct score evaluation: positive
        # within each cluster's candidate, negative across
        det_vels = res.det_velocities
        cand_a = GroupCandidate(0, np.array([dets[i].bbox.foot for i in order[:3]]),
                                np.array([0, 0, 0]), np.array([80.0] * 3),
                                np.array([3.0, 0.0]))
        cand_b = GroupCandidate(1, np.array([dets[i].bbox.foot for i in order[3:]]),
                                np.array([4, 4, 4]), np.array([80.0] * 3),
                                np.array([-3.0, 0.0]))
        c = compat.build_group_scores(dets, [cand_a, cand_b], det_vels, cfg)
        for i in order[:3]:
            assert c[i, 0] > 0 > c[i, 1]
        for i in order[3:]:
            assert c[i, 1] > 0 > c[i, 0]
