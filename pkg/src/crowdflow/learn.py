"""Max-margin training of the activity weights (1-slack cutting plane).

Each round finds the most violated labeling per sample by loss-augmented
inference, averages the resulting feature differences and losses into a
single aggregated constraint, and re-solves the working-set QP by dual
coordinate ascent. Terminates when the newest constraint is violated by at
most `eps` beyond the current slack.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import LabelSpaces, LabelState
from .infer import infer_detail
from .potentials import Observations, WeightVector, feature_map, total_dim


class ConvergenceError(RuntimeError):
    """Cutting plane hit the round cap; carries the last weights."""

    def __init__(self, message: str, weights: WeightVector, rounds: int):
        super().__init__(message)
        self.weights = weights
        self.rounds = rounds


@dataclass(frozen=True, eq=False)
class TrainSample:
    """One supervised frame: observations (with their grouping) plus the
    ground-truth labels."""

    obs: Observations
    labels: LabelState


def loss(zbar: LabelState, z: LabelState) -> float:
    """Normalized Hamming distance over the concatenated label vector."""
    if len(zbar.group_acts) != len(z.group_acts) or len(zbar.actions) != len(z.actions):
        raise ValueError("label states have different shapes")
    total = 1 + len(z.group_acts) + len(z.actions)
    diff = int(zbar.collective != z.collective)
    diff += sum(a != b for a, b in zip(zbar.group_acts, z.group_acts))
    diff += sum(a != b for a, b in zip(zbar.actions, z.actions))
    return diff / total


def most_violated(w: WeightVector, sample: TrainSample,
                  eps: float = 0.01, max_iter: int = 50) -> LabelState:
    """argmax over labelings of score + loss, by loss-augmented inference."""
    return infer_detail(w, sample.obs, warm_start=None,
                        loss_against=sample.labels,
                        eps=eps, max_iter=max_iter).labels


def solve_qp(constraints: Sequence, d: float,
             tol: float = 1e-6, max_sweeps: int = 100000):
    """Working-set QP:  min 1/2 ||w||^2 + d*xi  s.t.  w.u_r + xi >= ell_r.

    Solved in the dual (w = sum_r a_r u_r with a >= 0, sum a <= d) by
    coordinate ascent on the multipliers. Returns (w_flat, xi, kkt) where
    kkt is the worst KKT residual at exit.
    """
    if not constraints:
        raise ValueError("working set is empty")
    u = np.stack([np.asarray(c[0], dtype=float) for c in constraints])
    ell = np.array([float(c[1]) for c in constraints])
    r_count = u.shape[0]
    norms = (u * u).sum(axis=1)
    a = np.zeros(r_count)
    w = np.zeros(u.shape[1])

    def kkt_residual():
        slacks = ell - u @ w
        xi = max(0.0, float(slacks.max()))
        viol = float(np.max(slacks - xi, initial=0.0))  # primal feasibility
        comp = float(np.max(a * (xi - slacks), initial=0.0))  # a_r * slack_r
        comp_xi = (d - a.sum()) * xi
        return xi, max(viol, comp, comp_xi)

    for _ in range(max_sweeps):
        for r in range(r_count):
            room = d - (a.sum() - a[r])
            if norms[r] <= 0.0:
                new = room if ell[r] > 0 else 0.0
            else:
                grad = ell[r] - float(u[r] @ w)
                new = a[r] + grad / norms[r]
                new = min(max(new, 0.0), room)
            delta = new - a[r]
            if delta != 0.0:
                w += delta * u[r]
                a[r] = new
        xi, resid = kkt_residual()
        if resid <= tol:
            return w, xi, resid
    xi, resid = kkt_residual()
    return w, xi, resid


@dataclass(frozen=True, eq=False)
class TrainResult:
    weights: WeightVector
    xi: float
    rounds: int
    objectives: tuple   # QP optimum after each round (non-decreasing)
    violations: tuple   # violation of the newly found constraint per round
    converged: bool


def train(samples: Sequence[TrainSample], d: float = 100.0, eps: float = 1e-3,
          max_rounds: int = 500, spaces: Optional[LabelSpaces] = None,
          qp_tol: float = 1e-6) -> TrainResult:
    """Cutting-plane loop over aggregated 1-slack constraints."""
    if not samples:
        raise ValueError("need at least one training sample")
    spaces = spaces or LabelSpaces()
    dim = total_dim(spaces)
    gt_feats = [feature_map(s.labels, s.obs, spaces) for s in samples]
    w = WeightVector.zeros(spaces)
    xi = 0.0
    working = []
    objectives = []
    violations = []

    for rounds in range(1, max_rounds + 1):
        u_sum = np.zeros(dim)
        loss_sum = 0.0
        for s, gt_phi in zip(samples, gt_feats):
            zbar = most_violated(w, s)
            u_sum += gt_phi - feature_map(zbar, s.obs, spaces)
            loss_sum += loss(zbar, s.labels)
        u_bar = u_sum / len(samples)
        ell_bar = loss_sum / len(samples)

        violation = ell_bar - float(w.flat @ u_bar) - xi
        violations.append(violation)
        if violation <= eps:
            return TrainResult(w, xi, rounds, tuple(objectives),
                               tuple(violations), True)

        working.append((u_bar, ell_bar))
        w_flat, xi, _ = solve_qp(working, d, tol=qp_tol)
        w = WeightVector(w_flat, spaces)
        objectives.append(0.5 * float(w_flat @ w_flat) + d * xi)

    raise ConvergenceError(
        f"cutting plane did not converge within {max_rounds} rounds", w, max_rounds)
