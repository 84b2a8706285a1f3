"""Causal crowd video analysis.

Given per-frame person detections (bbox, quantized pose, appearance
histogram), the engine jointly estimates track associations and group
memberships with an exact per-iteration assignment solver, then recognizes
atomic / group / collective activities with a hierarchical linear model
trained as a 1-slack structured SVM.
"""

from ._kernels import backend as kernel_backend
from .assoc import AssocProblem, AssocSolution, grow_groups, solve_fixed
from .core import (ATOMIC_ACTIONS, COLLECTIVE_ACTIVITIES, GROUP_ACTIVITIES,
                   BBox, Config, Detection, FrameState, GroundTruth,
                   GroupState, LabelSpaces, LabelState, Track)
from .engine import Model, advance_frame, run_stream
from .infer import infer, infer_detail
from .learn import TrainSample, train
from .potentials import Observations, WeightVector, feature_map, score
from .synth import Scenario, generate

__version__ = "0.1.0"

__all__ = [
    "ATOMIC_ACTIONS", "COLLECTIVE_ACTIVITIES", "GROUP_ACTIVITIES",
    "AssocProblem", "AssocSolution", "BBox", "Config", "Detection",
    "FrameState", "GroundTruth", "GroupState", "LabelSpaces", "LabelState",
    "Model", "Observations", "Scenario", "Track", "TrainSample",
    "WeightVector", "advance_frame", "feature_map", "generate",
    "grow_groups", "infer", "infer_detail", "kernel_backend", "run_stream",
    "score", "solve_fixed", "train",
]
