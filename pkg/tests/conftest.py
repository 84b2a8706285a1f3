import numpy as np
import pytest

from crowdflow.core import BBox, Config, Detection, Track


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def unit_hist(rng, n=24):
    v = rng.dirichlet(np.ones(n))
    return v / v.sum()


def make_detection(frame=0, x=100.0, y=100.0, w=32.0, h=80.0, pose=0,
                   hist=None, rng=None, hist_len=24, gt=None, pose_conf=1.0):
    if hist is None:
        if rng is not None:
            hist = unit_hist(rng, hist_len)
        else:
            hist = np.full(hist_len, 1.0 / hist_len)
    return Detection(frame=frame, bbox=BBox(x, y, w, h), pose=pose,
                     appearance=np.asarray(hist, dtype=float),
                     pose_conf=pose_conf, gt=gt)


def make_track(tid=0, frames_feet=((0, (116.0, 180.0)),), w=32.0, h=80.0,
               hist=None, velocity=(0.0, 0.0), pose=0, hist_len=24):
    history = tuple((f, BBox(fx - w / 2.0, fy - h, w, h))
                    for f, (fx, fy) in frames_feet)
    if hist is None:
        hist = np.full(hist_len, 1.0 / hist_len)
    return Track(id=tid, history=history,
                 appearance_ref=np.asarray(hist, dtype=float),
                 velocity=np.asarray(velocity, dtype=float), last_pose=pose)


@pytest.fixture
def cfg():
    return Config()
