"""Linear activity potential: weight layout, joint feature map, and score.

The potential decomposes over the label hierarchy into five blocks:

    collective_obs    scene label   x scene feature
    collective_group  scene label   x histogram of group activities
    group_obs         group label   x group feature        (summed over groups)
    group_atomic      group label   x member-action histogram (summed over groups)
    atomic_obs        person action x person feature       (summed over persons)

Weights and feature maps share one flat layout so the score is a single
dot product and the feature map is exactly the gradient of the score with
respect to the weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import LabelSpaces, LabelState
from .features import histogram

BLOCK_NAMES = ("collective_obs", "collective_group", "group_obs",
               "group_atomic", "atomic_obs")


def block_shapes(spaces: LabelSpaces) -> dict:
    return {
        "collective_obs": (spaces.n_collective, spaces.scene_dim),
        "collective_group": (spaces.n_collective, spaces.n_group),
        "group_obs": (spaces.n_group, spaces.group_dim),
        "group_atomic": (spaces.n_group, spaces.n_atomic),
        "atomic_obs": (spaces.n_atomic, spaces.person_dim),
    }


def total_dim(spaces: LabelSpaces) -> int:
    return sum(r * c for r, c in block_shapes(spaces).values())


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Flat weight vector with named block views (row-major blocks, in
    BLOCK_NAMES order)."""

    flat: np.ndarray
    spaces: LabelSpaces

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.shape != (total_dim(self.spaces),):
            raise ValueError(
                f"weight vector must have length {total_dim(self.spaces)}, "
                f"got {flat.shape}")
        object.__setattr__(self, "flat", flat)

    @classmethod
    def zeros(cls, spaces: Optional[LabelSpaces] = None) -> "WeightVector":
        spaces = spaces or LabelSpaces()
        return cls(np.zeros(total_dim(spaces)), spaces)

    def block(self, name: str) -> np.ndarray:
        shapes = block_shapes(self.spaces)
        off = 0
        for nm in BLOCK_NAMES:
            r, c = shapes[nm]
            if nm == name:
                return self.flat[off:off + r * c].reshape(r, c)
            off += r * c
        raise KeyError(name)


@dataclass(frozen=True, eq=False)
class Observations:
    """Everything the potential sees at one frame: the three feature levels
    plus the person-to-group structure."""

    scene: np.ndarray         # (scene_dim,)
    group_feats: np.ndarray   # (N_groups, group_dim)
    person_feats: np.ndarray  # (N, person_dim)
    groups: tuple             # member person indices per group

    def __post_init__(self):
        person_group = np.full(self.person_feats.shape[0], -1, dtype=np.int64)
        for l, members in enumerate(self.groups):
            for i in members:
                person_group[i] = l
        if np.any(person_group < 0):
            raise ValueError("every person must belong to exactly one group")
        person_group.setflags(write=False)
        object.__setattr__(self, "person_group", person_group)

    @property
    def n_persons(self) -> int:
        return self.person_feats.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.groups)


def feature_map(labels: LabelState, obs: Observations,
                spaces: Optional[LabelSpaces] = None) -> np.ndarray:
    """Joint feature vector with the weight layout; zero outside the rows
    selected by the labels."""
    spaces = spaces or LabelSpaces()
    shapes = block_shapes(spaces)
    out = np.zeros(total_dim(spaces))
    off = 0

    r, c = shapes["collective_obs"]
    out[off + labels.collective * c: off + (labels.collective + 1) * c] = obs.scene
    off += r * c

    r, c = shapes["collective_group"]
    out[off + labels.collective * c: off + (labels.collective + 1) * c] = \
        histogram(labels.group_acts, spaces.n_group)
    off += r * c

    r, c = shapes["group_obs"]
    for l in range(obs.n_groups):
        g = labels.group_acts[l]
        out[off + g * c: off + (g + 1) * c] += obs.group_feats[l]
    off += r * c

    r, c = shapes["group_atomic"]
    for l, members in enumerate(obs.groups):
        g = labels.group_acts[l]
        member_actions = [labels.actions[i] for i in members]
        out[off + g * c: off + (g + 1) * c] += histogram(member_actions, spaces.n_atomic)
    off += r * c

    r, c = shapes["atomic_obs"]
    for i in range(obs.n_persons):
        h = labels.actions[i]
        out[off + h * c: off + (h + 1) * c] += obs.person_feats[i]
    return out


def score(w: WeightVector, labels: LabelState, obs: Observations) -> float:
    """w . phi(labels, obs); linear in w."""
    if obs.n_groups != len(labels.group_acts) or obs.n_persons != len(labels.actions):
        raise ValueError("label dimensions do not match the observations")
    return float(np.dot(w.flat, feature_map(labels, obs, w.spaces)))
