# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of the pure NumPy kernel lane.

Semantics must match `_pure` exactly; the matching solver mirrors its
control flow statement for statement so both lanes resolve ties the same
way.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()

DEF INF = 1e308


def build_track_scores(det_hists, det_locs, det_heights,
                       trk_hists, trk_locs, trk_vels, alpha):
    cdef double[:, ::1] dh = np.ascontiguousarray(det_hists, dtype=np.float64)
    cdef double[:, ::1] dl = np.ascontiguousarray(det_locs, dtype=np.float64)
    cdef double[::1] dz = np.ascontiguousarray(det_heights, dtype=np.float64)
    cdef double[:, ::1] th = np.ascontiguousarray(trk_hists, dtype=np.float64)
    cdef double[:, ::1] tl = np.ascontiguousarray(trk_locs, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(trk_vels, dtype=np.float64)
    cdef Py_ssize_t n = dh.shape[0], t = th.shape[0], b = dh.shape[1]
    out_arr = np.zeros((n, t), dtype=np.float64)
    if n == 0 or t == 0:
        return out_arr
    cdef double[:, ::1] out = out_arr
    cdef double a0 = alpha[0], a1 = alpha[1], a2 = alpha[2]
    cdef Py_ssize_t i, j, k
    cdef double d_app, d_loc, d_vel, dx, dy, diff, inv_h
    with nogil:
        for i in range(n):
            inv_h = 1.0 / dz[i]
            for j in range(t):
                d_app = 0.0
                for k in range(b):
                    diff = dh[i, k] - th[j, k]
                    d_app += diff * diff
                dx = dl[i, 0] - tl[j, 0]
                dy = dl[i, 1] - tl[j, 1]
                d_loc = dx * dx + dy * dy
                dx -= tv[j, 0]
                dy -= tv[j, 1]
                d_vel = dx * dx + dy * dy
                out[i, j] = (a0 * (2.0 * exp(-d_app) - 1.0)
                             + a1 * (2.0 * exp(-d_loc * inv_h) - 1.0)
                             + a2 * (2.0 * exp(-d_vel) - 1.0))
    return out_arr


def build_group_kernel_scores(det_locs, det_vels, grp_cents, grp_vels,
                              grp_inv_heights, alpha):
    cdef double[:, ::1] dl = np.ascontiguousarray(det_locs, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(det_vels, dtype=np.float64)
    cdef double[:, ::1] gc = np.ascontiguousarray(grp_cents, dtype=np.float64)
    cdef double[:, ::1] gv = np.ascontiguousarray(grp_vels, dtype=np.float64)
    cdef double[::1] gih = np.ascontiguousarray(grp_inv_heights, dtype=np.float64)
    cdef Py_ssize_t n = dl.shape[0], g = gc.shape[0]
    out_arr = np.zeros((n, g), dtype=np.float64)
    if n == 0 or g == 0:
        return out_arr
    cdef double[:, ::1] out = out_arr
    cdef double a_mot = alpha[0], a_spa = alpha[1]
    cdef Py_ssize_t i, l
    cdef double dx, dy, d_vel, d_loc
    with nogil:
        for i in range(n):
            for l in range(g):
                dx = dv[i, 0] - gv[l, 0]
                dy = dv[i, 1] - gv[l, 1]
                d_vel = dx * dx + dy * dy
                dx = dl[i, 0] - gc[l, 0]
                dy = dl[i, 1] - gc[l, 1]
                d_loc = dx * dx + dy * dy
                out[i, l] = (a_mot * (2.0 * exp(-d_vel) - 1.0)
                             + a_spa * (2.0 * exp(-d_loc * gih[l]) - 1.0))
    return out_arr


def clip_halfplane(poly, normal, point):
    cdef double[:, ::1] p = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t k = p.shape[0]
    if k == 0:
        return np.zeros((0, 2), dtype=np.float64)
    cdef double nx = normal[0], ny = normal[1]
    cdef double off = nx * point[0] + ny * point[1]
    out_arr = np.empty((2 * k, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t a, b, m = 0
    cdef double ax, ay, bx, by, da, db, t
    for a in range(k):
        b = a + 1 if a + 1 < k else 0
        ax = p[a, 0]; ay = p[a, 1]
        bx = p[b, 0]; by = p[b, 1]
        da = nx * ax + ny * ay - off
        db = nx * bx + ny * by - off
        if da >= 0.0:
            out[m, 0] = ax; out[m, 1] = ay
            m += 1
        if (da >= 0.0) != (db >= 0.0):
            t = da / (da - db)
            out[m, 0] = ax + t * (bx - ax)
            out[m, 1] = ay + t * (by - ay)
            m += 1
    return out_arr[:m].copy()


def polygon_area(poly):
    cdef double[:, ::1] p = np.ascontiguousarray(poly, dtype=np.float64)
    cdef Py_ssize_t k = p.shape[0]
    if k < 3:
        return 0.0
    cdef double acc = 0.0
    cdef Py_ssize_t a, b
    for a in range(k):
        b = a + 1 if a + 1 < k else 0
        acc += p[a, 0] * p[b, 1] - p[b, 0] * p[a, 1]
    return fabs(acc) * 0.5


cdef void _lsap_min(double[:, ::1] cost, long long[::1] col4row,
                    double[::1] u, double[::1] v, double[::1] shortest,
                    unsigned char[::1] sr, unsigned char[::1] sc,
                    long long[::1] remaining, long long[::1] row4col,
                    long long[::1] path) noexcept nogil:
    """Shortest-augmenting-path rectangular assignment, minimizing.

    Same dual-potential algorithm and the same tie rules as the pure lane:
    swap-with-last column removal, ties prefer unassigned columns.
    """
    cdef Py_ssize_t n = cost.shape[0], m = cost.shape[1]
    cdef Py_ssize_t cur_row, i, j, r, c, pos, index, num_remaining
    cdef double min_val, lowest, red, ui
    cdef Py_ssize_t sink

    for cur_row in range(n):
        for c in range(m):
            shortest[c] = INF
            sc[c] = 0
            remaining[c] = c
        for r in range(n):
            sr[r] = 0
        num_remaining = m
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            sr[i] = 1
            index = -1
            lowest = INF
            ui = u[i]
            for pos in range(num_remaining):
                j = remaining[pos]
                red = min_val + cost[i, j] - ui - v[j]
                if red < shortest[j]:
                    path[j] = i
                    shortest[j] = red
                if shortest[j] < lowest or (shortest[j] == lowest and row4col[j] == -1):
                    lowest = shortest[j]
                    index = pos
            min_val = lowest
            j = remaining[index]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
            sc[j] = 1
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
            r = col4row[i]
            col4row[i] = j
            j = r
            if i == cur_row:
                break


def solve_matching(weights):
    w = np.asarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0], t = w.shape[1]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cdef Py_ssize_t m = t + n
    padded = np.full((n, m), -1.0)
    if t:
        padded[:, :t] = np.where(w > 0.0, w, -1.0)
    padded[np.arange(n), t + np.arange(n)] = 0.0
    cost = np.ascontiguousarray(-padded)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    u_arr = np.zeros(n)
    v_arr = np.zeros(m)
    shortest_arr = np.empty(m)
    sr_arr = np.zeros(n, dtype=np.uint8)
    sc_arr = np.zeros(m, dtype=np.uint8)
    remaining_arr = np.empty(m, dtype=np.int64)
    row4col_arr = np.full(m, -1, dtype=np.int64)
    path_arr = np.full(m, -1, dtype=np.int64)
    cdef double[:, ::1] cost_view = cost
    cdef long long[::1] col4row = col4row_arr
    cdef double[::1] u = u_arr, v = v_arr, shortest = shortest_arr
    cdef unsigned char[::1] sr = sr_arr, sc = sc_arr
    cdef long long[::1] remaining = remaining_arr, row4col = row4col_arr
    cdef long long[::1] path = path_arr
    with nogil:
        _lsap_min(cost_view, col4row, u, v, shortest, sr, sc,
                  remaining, row4col, path)
    return np.where(col4row_arr < t, col4row_arr, -1).astype(np.int64)
