"""The joint feature map and its score against independent evaluations."""

import numpy as np
import pytest

from crowdflow.core import LabelSpaces, LabelState
from crowdflow.features import histogram
from crowdflow.potentials import (Observations, WeightVector, block_shapes,
                                  feature_map, score, total_dim)

SPACES = LabelSpaces()


def random_observations(rng, n=None, n_groups=None):
    n = n or int(rng.integers(1, 7))
    n_groups = n_groups or int(rng.integers(1, min(n, 4) + 1))
    person = rng.uniform(0, 1, (n, SPACES.person_dim))
    groups = [[] for _ in range(n_groups)]
    for i in range(n):
        groups[i % n_groups].append(i)
    group_feats = rng.uniform(0, 1, (n_groups, SPACES.group_dim))
    return Observations(scene=rng.uniform(0, 1, SPACES.scene_dim),
                        group_feats=group_feats, person_feats=person,
                        groups=tuple(tuple(g) for g in groups))


def random_labels(rng, obs):
    return LabelState(int(rng.integers(0, SPACES.n_collective)),
                      tuple(int(v) for v in rng.integers(0, SPACES.n_group, obs.n_groups)),
                      tuple(int(v) for v in rng.integers(0, SPACES.n_atomic, obs.n_persons)))


def score_by_terms(w: WeightVector, labels: LabelState, obs: Observations) -> float:
    """Independent evaluation: the five potentials summed term by term,
    using the block views directly instead of the flat feature map."""
    w0 = w.block("collective_obs")
    w1 = w.block("collective_group")
    w2 = w.block("group_obs")
    w3 = w.block("group_atomic")
    w4 = w.block("atomic_obs")
    total = float(w0[labels.collective] @ obs.scene)
    total += float(w1[labels.collective] @ histogram(labels.group_acts, SPACES.n_group))
    for l in range(obs.n_groups):
        total += float(w2[labels.group_acts[l]] @ obs.group_feats[l])
        member_actions = [labels.actions[i] for i in obs.groups[l]]
        total += float(w3[labels.group_acts[l]] @ histogram(member_actions, SPACES.n_atomic))
    for i in range(obs.n_persons):
        total += float(w4[labels.actions[i]] @ obs.person_feats[i])
    return total


class TestLayout:
    def test_total_dimension(self):
        # 5*16 + 5*4 + 4*17 + 4*2 + 2*16 = 208
        assert total_dim(SPACES) == 208
        shapes = block_shapes(SPACES)
        assert shapes["collective_obs"] == (5, 16)
        assert shapes["collective_group"] == (5, 4)
        assert shapes["group_obs"] == (4, 17)
        assert shapes["group_atomic"] == (4, 2)
        assert shapes["atomic_obs"] == (2, 16)

    def test_weight_vector_validates_length(self):
        with pytest.raises(ValueError):
            WeightVector(np.zeros(207), SPACES)

    def test_block_views_tile_the_flat_vector(self, rng):
        w = WeightVector(rng.normal(size=208), SPACES)
        flat = np.concatenate([w.block(n).ravel() for n in
                               ("collective_obs", "collective_group", "group_obs",
                                "group_atomic", "atomic_obs")])
        np.testing.assert_array_equal(flat, w.flat)


class TestFeatureMap:
    def test_single_person_single_group_structure(self, rng):
        obs = random_observations(rng, n=1, n_groups=1)
        labels = LabelState(2, (1,), (0,))
        phi = feature_map(labels, obs, SPACES)
        w = WeightVector(phi, SPACES)
        # exactly one nonzero row per block
        for name in ("collective_obs", "collective_group", "group_obs",
                     "group_atomic", "atomic_obs"):
            rows = np.flatnonzero(np.abs(w.block(name)).sum(axis=1))
            assert len(rows) == 1

    def test_two_talking_groups_of_standing_people(self, rng):
        # six people standing, split in two groups both labeled talking,
        # scene label talking as well
        obs = random_observations(rng, n=6, n_groups=2)
        talking_y = SPACES.collective.index("talking")
        talking_g = SPACES.group.index("talking")
        standing = SPACES.atomic.index("standing")
        labels = LabelState(talking_y, (talking_g, talking_g), (standing,) * 6)
        phi = WeightVector(feature_map(labels, obs, SPACES), SPACES)
        np.testing.assert_allclose(phi.block("collective_group")[talking_y],
                                   [0, 0, 0, 1])
        # both groups accumulate a pure-standing histogram in the talking row
        np.testing.assert_allclose(phi.block("group_atomic")[talking_g],
                                   [2.0, 0.0])

    def test_score_equals_term_by_term_evaluation(self, rng):
        for _ in range(60):
            obs = random_observations(rng)
            labels = random_labels(rng, obs)
            w = WeightVector(rng.normal(size=208), SPACES)
            assert score(w, labels, obs) == pytest.approx(
                score_by_terms(w, labels, obs), abs=1e-12)

    def test_person_without_group_is_an_error(self, rng):
        with pytest.raises(ValueError):
            Observations(scene=np.zeros(16), group_feats=np.zeros((1, 17)),
                         person_feats=np.zeros((2, 16)), groups=((0,),))


class TestScore:
    def test_zero_weights_score_zero(self, rng):
        obs = random_observations(rng)
        labels = random_labels(rng, obs)
        assert score(WeightVector.zeros(SPACES), labels, obs) == 0.0

    def test_additivity_in_weights(self, rng):
        obs = random_observations(rng)
        labels = random_labels(rng, obs)
        a = WeightVector(rng.normal(size=208), SPACES)
        b = WeightVector(rng.normal(size=208), SPACES)
        both = WeightVector(a.flat + b.flat, SPACES)
        assert score(both, labels, obs) == pytest.approx(
            score(a, labels, obs) + score(b, labels, obs), abs=1e-9)

    def test_homogeneity_in_weights(self, rng):
        obs = random_observations(rng)
        labels = random_labels(rng, obs)
        w = WeightVector(rng.normal(size=208), SPACES)
        for alpha in (-2.0, 0.5, 3.0):
            scaled = WeightVector(alpha * w.flat, SPACES)
            assert score(scaled, labels, obs) == pytest.approx(
                alpha * score(w, labels, obs), rel=1e-12, abs=1e-12)

    def test_dimension_mismatch_is_an_error(self, rng):
        obs = random_observations(rng, n=3, n_groups=2)
        w = WeightVector.zeros(SPACES)
        with pytest.raises(ValueError):
            score(w, LabelState(0, (0,), (0, 0, 0)), obs)

    def test_feature_map_is_gradient_of_score(self, rng):
        # finite differences at 1e-6
        obs = random_observations(rng, n=3, n_groups=2)
        labels = random_labels(rng, obs)
        w = WeightVector(rng.normal(size=208), SPACES)
        phi = feature_map(labels, obs, SPACES)
        eps = 1e-6
        idx = rng.choice(208, size=40, replace=False)
        for i in idx:
            bumped = w.flat.copy()
            bumped[i] += eps
            fd = (score(WeightVector(bumped, SPACES), labels, obs)
                  - score(w, labels, obs)) / eps
            assert fd == pytest.approx(phi[i], abs=1e-6)


class TestBlockSparsity:
    def test_changing_scene_label_only_moves_top_blocks(self, rng):
        obs = random_observations(rng, n=4, n_groups=2)
        labels = random_labels(rng, obs)
        other = LabelState((labels.collective + 1) % SPACES.n_collective,
                           labels.group_acts, labels.actions)
        a = WeightVector(feature_map(labels, obs, SPACES), SPACES)
        b = WeightVector(feature_map(other, obs, SPACES), SPACES)
        for name in ("group_obs", "group_atomic", "atomic_obs"):
            np.testing.assert_array_equal(a.block(name), b.block(name))
        assert not np.array_equal(a.block("collective_obs"), b.block("collective_obs"))

    def test_changing_one_action_touches_only_its_group_row_and_action_block(self, rng):
        obs = random_observations(rng, n=4, n_groups=2)
        labels = random_labels(rng, obs)
        i = 1
        flipped = list(labels.actions)
        flipped[i] = 1 - flipped[i]
        other = LabelState(labels.collective, labels.group_acts, tuple(flipped))
        a = WeightVector(feature_map(labels, obs, SPACES), SPACES)
        b = WeightVector(feature_map(other, obs, SPACES), SPACES)
        np.testing.assert_array_equal(a.block("collective_obs"), b.block("collective_obs"))
        np.testing.assert_array_equal(a.block("collective_group"), b.block("collective_group"))
        np.testing.assert_array_equal(a.block("group_obs"), b.block("group_obs"))
        diff_rows = np.flatnonzero(
            np.abs(a.block("group_atomic") - b.block("group_atomic")).sum(axis=1))
        # only the row(s) selected by person i's group label changed
        group_of_i = next(l for l, mem in enumerate(obs.groups) if i in mem)
        allowed = {labels.group_acts[group_of_i]}
        assert set(diff_rows.tolist()) <= allowed
        assert not np.array_equal(a.block("atomic_obs"), b.block("atomic_obs"))
