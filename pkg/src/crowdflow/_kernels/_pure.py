"""Pure NumPy implementations of the hot kernels.

This is the fallback lane; `crowdflow._kernels._core` is the compiled twin
with the same signatures and semantics. Keep the two in lockstep: the
matching solver in particular must make identical tie decisions in both
lanes, so it mirrors the compiled control flow statement for statement.
"""

from __future__ import annotations

import numpy as np


def build_track_scores(det_hists, det_locs, det_heights,
                       trk_hists, trk_locs, trk_vels, alpha):
    """Detection-vs-track compatibility matrix in [-1, 1].

    Three bounded exponential-kernel terms (appearance, location, motion),
    each mapped to [-1, 1] via 2*exp(-beta*d2)-1 and mixed by `alpha`.
    The location normalizer is 1/height of the detection; the motion term
    compares the track velocity against the implied one-frame displacement.
    """
    det_hists = np.asarray(det_hists, dtype=np.float64)
    det_locs = np.asarray(det_locs, dtype=np.float64)
    det_heights = np.asarray(det_heights, dtype=np.float64)
    trk_hists = np.asarray(trk_hists, dtype=np.float64)
    trk_locs = np.asarray(trk_locs, dtype=np.float64)
    trk_vels = np.asarray(trk_vels, dtype=np.float64)
    n, t = det_hists.shape[0], trk_hists.shape[0]
    if n == 0 or t == 0:
        return np.zeros((n, t), dtype=np.float64)
    d_app = ((det_hists[:, None, :] - trk_hists[None, :, :]) ** 2).sum(-1)
    disp = det_locs[:, None, :] - trk_locs[None, :, :]
    d_loc = (disp ** 2).sum(-1)
    d_vel = ((disp - trk_vels[None, :, :]) ** 2).sum(-1)
    a0, a1, a2 = float(alpha[0]), float(alpha[1]), float(alpha[2])
    inv_h = 1.0 / det_heights[:, None]
    return (a0 * (2.0 * np.exp(-d_app) - 1.0)
            + a1 * (2.0 * np.exp(-d_loc * inv_h) - 1.0)
            + a2 * (2.0 * np.exp(-d_vel) - 1.0))


def build_group_kernel_scores(det_locs, det_vels, grp_cents, grp_vels,
                              grp_inv_heights, alpha):
    """Motion and location terms of the detection-vs-group scores.

    Returns the two weighted kernel terms only; the caller adds the
    field-of-view term with its own alpha weight. The location normalizer
    is 1/(mean member height), supplied per group.
    """
    det_locs = np.asarray(det_locs, dtype=np.float64)
    det_vels = np.asarray(det_vels, dtype=np.float64)
    grp_cents = np.asarray(grp_cents, dtype=np.float64)
    grp_vels = np.asarray(grp_vels, dtype=np.float64)
    grp_inv_heights = np.asarray(grp_inv_heights, dtype=np.float64)
    n, g = det_locs.shape[0], grp_cents.shape[0]
    if n == 0 or g == 0:
        return np.zeros((n, g), dtype=np.float64)
    d_vel = ((det_vels[:, None, :] - grp_vels[None, :, :]) ** 2).sum(-1)
    d_loc = ((det_locs[:, None, :] - grp_cents[None, :, :]) ** 2).sum(-1)
    a_mot, a_spa = float(alpha[0]), float(alpha[1])
    return (a_mot * (2.0 * np.exp(-d_vel) - 1.0)
            + a_spa * (2.0 * np.exp(-d_loc * grp_inv_heights[None, :]) - 1.0))


def clip_halfplane(poly, normal, point):
    """Clip a convex polygon to the half-plane {p : normal . (p - point) >= 0}.

    Sutherland-Hodgman against a single boundary; vertex order is preserved.
    """
    poly = np.asarray(poly, dtype=np.float64)
    k = poly.shape[0]
    if k == 0:
        return poly.reshape(0, 2)
    nx, ny = float(normal[0]), float(normal[1])
    off = nx * float(point[0]) + ny * float(point[1])
    out = np.empty((2 * k, 2), dtype=np.float64)
    m = 0
    for a in range(k):
        b = a + 1 if a + 1 < k else 0
        ax, ay = poly[a, 0], poly[a, 1]
        bx, by = poly[b, 0], poly[b, 1]
        da = nx * ax + ny * ay - off
        db = nx * bx + ny * by - off
        if da >= 0.0:
            out[m, 0] = ax
            out[m, 1] = ay
            m += 1
        if (da >= 0.0) != (db >= 0.0):
            t = da / (da - db)
            out[m, 0] = ax + t * (bx - ax)
            out[m, 1] = ay + t * (by - ay)
            m += 1
    return out[:m].copy()


def polygon_area(poly):
    """Shoelace area (absolute value); degenerate polygons give 0."""
    poly = np.asarray(poly, dtype=np.float64)
    k = poly.shape[0]
    if k < 3:
        return 0.0
    acc = 0.0
    for a in range(k):
        b = a + 1 if a + 1 < k else 0
        acc += poly[a, 0] * poly[b, 1] - poly[b, 0] * poly[a, 1]
    return abs(acc) * 0.5


def _lsap_min(cost):
    """Minimum-cost rectangular assignment (rows <= columns, all rows used).

    Shortest-augmenting-path algorithm with dual potentials. Column removal
    uses swap-with-last and ties prefer unassigned columns; the compiled
    lane replicates this exactly so both lanes pick the same optimum.
    """
    n, m = cost.shape
    u = np.zeros(n)
    v = np.zeros(m)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(m, -1, dtype=np.int64)
    path = np.full(m, -1, dtype=np.int64)
    for cur_row in range(n):
        shortest = np.full(m, np.inf)
        sr = np.zeros(n, dtype=bool)
        sc = np.zeros(m, dtype=bool)
        remaining = list(range(m))
        num_remaining = m
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            sr[i] = True
            index = -1
            lowest = np.inf
            ui = u[i]
            for pos in range(num_remaining):
                j = remaining[pos]
                r = min_val + cost[i, j] - ui - v[j]
                if r < shortest[j]:
                    path[j] = i
                    shortest[j] = r
                if shortest[j] < lowest or (shortest[j] == lowest and row4col[j] == -1):
                    lowest = shortest[j]
                    index = pos
            min_val = lowest
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            sc[j] = True
            num_remaining -= 1
            remaining[index] = remaining[num_remaining]
        u[cur_row] += min_val
        for r in range(n):
            if sr[r] and r != cur_row:
                u[r] += min_val - shortest[col4row[r]]
        for c in range(m):
            if sc[c]:
                v[c] -= min_val - shortest[c]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break
    return col4row


def solve_matching(weights):
    """Maximum-weight bipartite matching over strictly positive entries.

    Returns per-row column indices (-1 = unmatched). Leaving a pair
    unmatched always beats taking a non-positive edge; this is enforced by
    padding with one zero-valued dummy column per row and masking edges
    with weight <= 0 below the dummy value.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n, t = weights.shape
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    padded = np.full((n, t + n), -1.0)
    if t:
        padded[:, :t] = np.where(weights > 0.0, weights, -1.0)
    padded[np.arange(n), t + np.arange(n)] = 0.0
    col4row = _lsap_min(-padded)
    return np.where(col4row < t, col4row, -1).astype(np.int64)
