import numpy as np
import pytest

from forestbench import (
    CLASSIFICATION,
    REGRESSION,
    ConfigurationError,
    Dataset,
    FeatureKind,
    ForestParams,
    ImportanceVector,
    OutOfBagError,
    Rng,
    Sampling,
    TreeParams,
    compute_importance,
    contribution,
    draw_sample,
    forest_mdi,
    gen_pure_noise,
    gen_strobl,
    grow_tree,
    impurity,
    mda,
    mdi_classic,
    mdi_covariance,
    mdi_oob,
    naive_oob,
    noise_mass,
    split_count,
    train_forest,
)
from conftest import random_tree_case


def _stump_dataset():
    features = np.array([[0.0, 9.0], [1.0, 9.0], [2.0, 9.0], [3.0, 9.0]])
    response = np.array([0.0, 0.0, 1.0, 1.0])
    return Dataset(features=features, response=response, task=REGRESSION,
                   feature_kinds=(FeatureKind.numeric(), FeatureKind.numeric()))


def _full_sample_tree(dataset, **kwargs):
    rng = Rng(kwargs.pop("seed", 0))
    sample = draw_sample(dataset.n, "subsample", rng.split(0), fraction=1.0)
    params = TreeParams(task=dataset.task, n_classes=dataset.n_classes, **kwargs)
    return grow_tree(dataset, sample, params, rng.split(1)), sample


class TestMdiClassic:
    def test_single_leaf_tree_scores_zero(self):
        ds = gen_pure_noise(30, 3, Rng(0))
        tree, sample = _full_sample_tree(ds, min_leaf=30)
        assert mdi_classic(tree, ds, sample).tolist() == [0.0, 0.0, 0.0]

    def test_stump_hand_value(self):
        ds = _stump_dataset()
        tree, sample = _full_sample_tree(ds, min_leaf=2)
        scores = mdi_classic(tree, ds, sample)
        assert scores[0] == pytest.approx(0.25, abs=1e-15)  # (4/4) * 0.25
        assert scores[1] == 0.0

    def test_purity_total_equals_sample_variance(self):
        # Grown to purity on noise: total importance == in-bag variance of y.
        ds = gen_pure_noise(60, 5, Rng(1))
        tree, sample = _full_sample_tree(ds, min_leaf=1)
        assert mdi_classic(tree, ds, sample).sum() == pytest.approx(
            impurity(ds.response, REGRESSION), rel=1e-10
        )

    def test_fingerprint_mismatch_rejected(self):
        ds = gen_pure_noise(30, 3, Rng(2))
        other = gen_pure_noise(30, 3, Rng(3))
        tree, sample = _full_sample_tree(ds, min_leaf=2)
        with pytest.raises(ConfigurationError, match="fingerprint"):
            mdi_classic(tree, other, sample)

    def test_nonnegative_per_tree(self):
        for seed in range(10):
            dataset, sample, _, tree = random_tree_case(seed)
            assert np.all(mdi_classic(tree, dataset, sample) >= 0.0)


class TestMdiCovariance:
    def test_inbag_equivalence_is_exact(self):
        """Central identity: the covariance form on in-bag rows reproduces
        classic MDI per feature, per tree, both tasks, both sampling modes."""
        for seed in range(50):
            dataset, sample, _, tree = random_tree_case(seed)
            classic = mdi_classic(tree, dataset, sample)
            rows = np.flatnonzero(sample.inbag > 0)
            cov = mdi_covariance(tree, dataset, rows, weights=sample.inbag[rows])
            assert np.all(np.abs(cov - classic) <= 1e-10 * (1.0 + np.abs(classic)))

    def test_never_split_feature_is_zero(self):
        ds = _stump_dataset()
        tree, _ = _full_sample_tree(ds, min_leaf=2)
        cov = mdi_covariance(tree, ds, np.arange(4))
        assert cov[1] == 0.0

    def test_zero_responses_give_zero_scores(self):
        # Every y_i term vanishes, so the sum is exactly zero for all k.
        base = _stump_dataset()
        zeroed = Dataset(features=base.features, response=np.zeros(4), task=REGRESSION,
                         feature_kinds=base.feature_kinds)
        tree, _ = _full_sample_tree(zeroed, min_leaf=2, allow_zero_gain_splits=True)
        assert np.all(mdi_covariance(tree, zeroed, np.arange(4)) == 0.0)

    def test_empty_rows_rejected(self):
        ds = _stump_dataset()
        tree, _ = _full_sample_tree(ds, min_leaf=2)
        with pytest.raises(ConfigurationError, match="at least one row"):
            mdi_covariance(tree, ds, np.array([], dtype=int))


class TestMdiOob:
    def test_single_tree_half_subsample_matches_direct_oracle(self):
        # Hand-evaluate the held-out mean of <f_k(x_i), y_i> via per-row
        # contribution walks; must equal the batched estimator exactly.
        ds = gen_pure_noise(60, 4, Rng(4))
        params = ForestParams(
            n_trees=1,
            tree=TreeParams(min_leaf=2, task=REGRESSION),
            sampling=Sampling("subsample", 0.5),
            seed=9,
        )
        forest = train_forest(ds, params)
        tree, sample = forest.trees[0]
        vector = mdi_oob(forest, ds)
        for k in range(ds.p):
            direct = np.mean([
                contribution(tree, ds.features[i], k) * ds.response[i]
                for i in sample.oob
            ])
            assert vector.scores[k] == pytest.approx(direct, rel=1e-10, abs=1e-12)

    def test_feature_absent_from_every_tree_scores_zero(self):
        ds = _stump_dataset()
        params = ForestParams(n_trees=5, tree=TreeParams(min_leaf=2, task=REGRESSION), seed=3)
        forest = train_forest(ds, params)
        assert mdi_oob(forest, ds).scores[1] == 0.0

    def test_all_oob_empty_raises(self):
        ds = gen_pure_noise(20, 3, Rng(5))
        params = ForestParams(n_trees=2, tree=TreeParams(task=REGRESSION),
                              sampling=Sampling("subsample", 1.0))
        forest = train_forest(ds, params)
        with pytest.raises(OutOfBagError):
            mdi_oob(forest, ds)

    def test_skipped_trees_counted(self):
        ds = gen_pure_noise(12, 3, Rng(6))
        params = ForestParams(n_trees=30, tree=TreeParams(task=REGRESSION), seed=8)
        forest = train_forest(ds, params)
        skipped = sum(1 for _, s in forest.trees if s.oob.size == 0)
        vector = mdi_oob(forest, ds)
        assert vector.metadata["skipped_trees"] == skipped


class TestNaiveOob:
    def test_stump_hand_routed(self):
        # One stump, OOB rows routed by hand through the single split.
        ds = gen_pure_noise(40, 2, Rng(7))
        params = ForestParams(
            n_trees=1, tree=TreeParams(min_leaf=5, max_depth=1, task=REGRESSION), seed=4
        )
        forest = train_forest(ds, params)
        tree, sample = forest.trees[0]
        assert len(tree.inner_ids()) == 1
        node = tree.root
        oob = sample.oob
        y = ds.response[oob]
        left = ds.features[oob, node.feature] <= node.threshold
        nl, nr = int(left.sum()), int((~left).sum())
        expected = np.zeros(2)
        if nl > 0 and nr > 0:
            decrease = (
                impurity(y, REGRESSION)
                - nl / oob.size * impurity(y[left], REGRESSION)
                - nr / oob.size * impurity(y[~left], REGRESSION)
            )
            expected[node.feature] = (oob.size / oob.size) * decrease
        assert naive_oob(forest, ds).scores == pytest.approx(expected, rel=1e-9, abs=1e-12)

    def test_constant_oob_responses_contribute_zero(self):
        features = np.linspace(0, 1, 30).reshape(-1, 1)
        response = np.where(features[:, 0] > 0.5, 1.0, 0.0)
        ds = Dataset(features=features, response=response, task=REGRESSION,
                     feature_kinds=(FeatureKind.numeric(),))
        params = ForestParams(n_trees=3, tree=TreeParams(min_leaf=1, task=REGRESSION), seed=2)
        forest = train_forest(ds, params)
        # Replace responses with a constant; rebuild on the same features.
        flat = Dataset(features=features, response=np.ones(30), task=REGRESSION,
                       feature_kinds=(FeatureKind.numeric(),))
        flat_forest = train_forest(flat, params)
        assert np.all(naive_oob(flat_forest, flat).scores == 0.0)

    def test_scores_are_nonnegative(self):
        # Without the covariance correction, every node adds mass >= 0.
        ds = gen_pure_noise(80, 4, Rng(8))
        params = ForestParams(n_trees=10, tree=TreeParams(min_leaf=1, task=REGRESSION), seed=5)
        forest = train_forest(ds, params)
        assert np.all(naive_oob(forest, ds).scores >= 0.0)


class TestMda:
    def test_never_split_feature_scores_exactly_zero(self):
        ds = _stump_dataset()
        params = ForestParams(n_trees=4, tree=TreeParams(min_leaf=2, task=REGRESSION), seed=6)
        forest = train_forest(ds, params)
        vector = mda(forest, ds, n_repeats=2, rng=Rng(3))
        assert vector.scores[1] == 0.0

    def test_strong_signal_feature_dominates(self):
        # One perfectly predictive binary feature among noise columns.
        rng = Rng(9)
        n = 150
        signal = rng.integers(0, 2, size=n).astype(float)
        noise = rng.random((n, 3))
        ds = Dataset(features=np.column_stack([signal, noise]),
                     response=signal.copy(), task=REGRESSION,
                     feature_kinds=tuple(FeatureKind.numeric() for _ in range(4)))
        params = ForestParams(n_trees=20, tree=TreeParams(min_leaf=1, task=REGRESSION), seed=7)
        forest = train_forest(ds, params)
        scores = mda(forest, ds, rng=Rng(5)).scores
        assert scores[0] > 0.0
        assert scores[0] > scores[1:].max()

    def test_requires_rng(self):
        ds = _stump_dataset()
        forest = train_forest(
            ds, ForestParams(n_trees=2, tree=TreeParams(min_leaf=2, task=REGRESSION))
        )
        with pytest.raises(ConfigurationError, match="Rng"):
            mda(forest, ds)


class TestSplitCount:
    def test_single_leaf_trees_score_zero(self):
        ds = gen_pure_noise(20, 3, Rng(10))
        params = ForestParams(n_trees=4, tree=TreeParams(min_leaf=20, task=REGRESSION))
        forest = train_forest(ds, params)
        assert split_count(forest).scores.tolist() == [0.0, 0.0, 0.0]

    def test_stump_forest_counts_one(self):
        ds = _stump_dataset()
        params = ForestParams(
            n_trees=6, tree=TreeParams(min_leaf=2, max_depth=1, task=REGRESSION),
            sampling=Sampling("subsample", 1.0), seed=1,
        )
        forest = train_forest(ds, params)
        scores = split_count(forest).scores
        assert scores[0] == 1.0 and scores[1] == 0.0

    def test_total_equals_inner_node_count(self):
        ds = gen_pure_noise(60, 4, Rng(11))
        params = ForestParams(n_trees=7, tree=TreeParams(min_leaf=3, task=REGRESSION), seed=2)
        forest = train_forest(ds, params)
        total_inner = sum(len(tree.inner_ids()) for tree, _ in forest.trees)
        assert split_count(forest).scores.sum() * forest.n_trees == pytest.approx(total_inner)


class TestNoiseMass:
    def test_all_relevant_gives_zero(self):
        assert noise_mass(np.array([1.0, 2.0, 3.0]), {0, 1, 2}) == 0.0

    def test_partition_identity(self):
        scores = np.array([0.4, 0.1, 0.3, 0.2])
        relevant = {1, 3}
        assert noise_mass(scores, relevant) + scores[[1, 3]].sum() == pytest.approx(
            scores.sum()
        )

    def test_per_tree_matrix_form(self):
        scores = np.array([[1.0, 2.0, 4.0], [0.5, 0.5, 0.5]])
        masses = noise_mass(scores, {2})
        assert masses.tolist() == [3.0, 1.0]

    def test_purity_noise_mass_equals_sample_variance(self):
        # Everything is noise; grown to purity the mass is the variance of y.
        ds = gen_pure_noise(50, 4, Rng(12))
        tree, sample = _full_sample_tree(ds, min_leaf=1)
        scores = mdi_classic(tree, ds, sample)
        assert noise_mass(scores, ds.relevant_set) == pytest.approx(
            impurity(ds.response, REGRESSION), rel=1e-10
        )

    def test_importance_vector_accepted(self):
        vector = ImportanceVector("mdi", np.array([1.0, 5.0]))
        assert noise_mass(vector, {1}) == 1.0


class TestClassRelabeling:
    def test_gini_scores_invariant_under_label_permutation(self):
        # Swapping class identities permutes one-hot coordinates only.
        ds = gen_strobl(120, Rng(13))
        swapped = Dataset(features=ds.features, response=1 - ds.response,
                          task=CLASSIFICATION, n_classes=2,
                          feature_kinds=ds.feature_kinds, relevant_set=ds.relevant_set)
        params = ForestParams(
            n_trees=10, tree=TreeParams(min_leaf=2, mtry=2, task=CLASSIFICATION, n_classes=2),
            seed=21,
        )
        for method in ("mdi", "mdi-oob", "naive-oob", "split-count"):
            a = compute_importance(method, train_forest(ds, params), ds, rng=Rng(0))
            b = compute_importance(method, train_forest(swapped, params), swapped, rng=Rng(0))
            assert np.allclose(a.scores, b.scores, atol=1e-12)


class TestArgmaxRobustness:
    def test_oob_correction_ranks_true_feature_first(self):
        # Mixed-cardinality setting, deep trees: the OOB-corrected estimator
        # puts the one informative feature on top almost always; classic MDI
        # rarely does.
        wins_oob = wins_mdi = 0
        replicates = 50
        for r in range(replicates):
            rng = Rng(500 + r)
            ds = gen_strobl(200, rng.split(0))
            params = ForestParams(
                n_trees=100,
                tree=TreeParams(min_leaf=1, mtry=2, task=CLASSIFICATION, n_classes=2),
                seed=rng.derive_seed(1),
            )
            forest = train_forest(ds, params)
            if int(np.argmax(mdi_oob(forest, ds).scores)) == 1:
                wins_oob += 1
            if int(np.argmax(forest_mdi(forest, ds).scores)) == 1:
                wins_mdi += 1
        assert wins_oob >= 0.9 * replicates
        assert wins_mdi < 0.5 * replicates


class TestDispatcher:
    def test_unknown_method_rejected(self):
        ds = _stump_dataset()
        forest = train_forest(
            ds, ForestParams(n_trees=1, tree=TreeParams(min_leaf=2, task=REGRESSION))
        )
        with pytest.raises(ConfigurationError, match="unknown importance method"):
            compute_importance("shapiro", forest, ds)

    def test_covariance_inbag_method_matches_mdi(self):
        ds = gen_pure_noise(70, 4, Rng(14))
        forest = train_forest(
            ds, ForestParams(n_trees=6, tree=TreeParams(min_leaf=2, task=REGRESSION), seed=3)
        )
        classic = compute_importance("mdi", forest, ds).scores
        cov = compute_importance("mdi-covariance-inbag", forest, ds).scores
        assert np.all(np.abs(cov - classic) <= 1e-10 * (1.0 + np.abs(classic)))
