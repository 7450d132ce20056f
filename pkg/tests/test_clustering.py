import numpy as np
import pytest

from supclust import Clustering, KMeansPartition, kmeans, select_target_clusters
from supclust.strategies import LabeledPool

from conftest import blob_cloud


def brute_force_nearest(X, centers):
    """Independent nearest-center assignment check."""
    out = np.empty(X.shape[0], dtype=np.int64)
    for i, x in enumerate(X):
        dists = [np.linalg.norm(x - c) for c in centers]
        out[i] = int(np.argmin(dists))
    return out


class TestKMeans:
    def test_well_separated_pairs(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        result = kmeans(X, 2, seed=0)
        assert result.assignment[0] == result.assignment[1]
        assert result.assignment[2] == result.assignment[3]
        assert result.assignment[0] != result.assignment[2]
        got = {tuple(np.round(c, 9)) for c in result.centers}
        assert got == {(0.0, 0.5), (10.0, 0.5)}

    def test_n_equals_k_singletons(self):
        X = np.array([[0.0], [1.0], [2.0]])
        result = kmeans(X, 3, seed=5)
        np.testing.assert_array_equal(np.sort(result.sizes), [1, 1, 1])
        for i in range(3):
            np.testing.assert_allclose(result.centers[result.assignment[i]], X[i])

    def test_nearest_center_oracle(self):
        X = blob_cloud(200, 8, seed=31)
        result = kmeans(X, 10, seed=2)
        for i, x in enumerate(X):
            assigned = np.linalg.norm(x - result.centers[result.assignment[i]])
            best = min(np.linalg.norm(x - c) for c in result.centers)
            assert assigned <= best + 1e-12

    def test_centers_are_member_means(self):
        X = blob_cloud(150, 5, seed=7)
        result = kmeans(X, 8, seed=1)
        for i in range(8):
            members = X[result.assignment == i]
            np.testing.assert_allclose(result.centers[i], members.mean(axis=0), atol=1e-9)

    def test_objective_non_increasing(self):
        X = blob_cloud(300, 6, seed=13)
        result = kmeans(X, 12, seed=4)
        hist = np.array(result.objective_history)
        assert (np.diff(hist) <= 1e-9).all()

    def test_fixed_point(self):
        X = blob_cloud(120, 4, seed=17)
        result = kmeans(X, 6, seed=3)
        np.testing.assert_array_equal(brute_force_nearest(X, result.centers), result.assignment)

    def test_deterministic_under_seed(self):
        X = blob_cloud(90, 3, seed=23)
        a = kmeans(X, 7, seed=99)
        b = kmeans(X, 7, seed=99)
        np.testing.assert_array_equal(a.assignment, b.assignment)
        np.testing.assert_array_equal(a.centers, b.centers)

    def test_row_permutation_keeps_cluster_contents(self):
        # checked on the deterministic cases: singleton partition and
        # well-separated pairs
        X = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
        perm = np.array([2, 0, 3, 1])
        base = kmeans(X, 2, seed=0)
        shuffled = kmeans(X[perm], 2, seed=0)

        def contents(X, result):
            groups = []
            for i in range(result.n_clusters):
                members = X[result.assignment == i]
                groups.append(frozenset(map(tuple, members)))
            return frozenset(groups)

        assert contents(X, base) == contents(X[perm], shuffled)

        single = kmeans(X[perm], 4, seed=0)
        assert contents(X[perm], single) == frozenset(frozenset([tuple(r)]) for r in X)

    def test_accepts_embedding_set(self, two_blobs):
        result = kmeans(two_blobs, 2, seed=0)
        assert result.n_samples == two_blobs.n

    def test_argument_errors(self):
        X = np.zeros((3, 2))
        with pytest.raises(ValueError):
            kmeans(X, 0, seed=0)
        with pytest.raises(ValueError):
            kmeans(X, 4, seed=0)
        with pytest.raises(ValueError):
            kmeans(X, 2, seed=0, tol=0.0)
        with pytest.raises(ValueError):
            kmeans(X, 2, seed=0, max_iters=0)


class TestClusteringType:
    def test_sizes_must_match_assignment(self):
        with pytest.raises(ValueError, match="sizes"):
            Clustering(assignment=[0, 0, 1], centers=[[0.0], [1.0]], sizes=[1, 2])

    def test_empty_cluster_rejected(self):
        with pytest.raises(ValueError):
            Clustering(assignment=[0, 0], centers=[[0.0], [1.0]], sizes=[2, 0])

    def test_members_ascending(self):
        c = Clustering(assignment=[1, 0, 1], centers=[[0.0], [1.0]], sizes=[1, 2])
        np.testing.assert_array_equal(c.members(1), [0, 2])


def synthetic_clustering(sizes):
    assignment = np.repeat(np.arange(len(sizes)), sizes)
    centers = np.arange(len(sizes), dtype=np.float64)[:, None]
    return Clustering(assignment=assignment, centers=centers, sizes=np.asarray(sizes))


def first_member(clustering, cluster_id):
    return int(np.flatnonzero(clustering.assignment == cluster_id)[0])


class TestSelectTargetClusters:
    def test_excludes_covered_cluster(self):
        clustering = synthetic_clustering([5, 9, 3])
        pool = [first_member(clustering, 1)]
        assert select_target_clusters(clustering, pool, 2) == [0, 2]

    def test_empty_pool_descending_size(self):
        clustering = synthetic_clustering([5, 9, 3])
        assert select_target_clusters(clustering, [], 3) == [1, 0, 2]

    def test_fallback_when_all_covered(self):
        clustering = synthetic_clustering([5, 9, 3])
        pool = [first_member(clustering, i) for i in range(3)]
        assert select_target_clusters(clustering, pool, 1) == [1]

    def test_clean_clusters_first_then_biggest_covered(self):
        clustering = synthetic_clustering([8, 2, 6, 4])
        pool = [first_member(clustering, 0), first_member(clustering, 2)]
        assert select_target_clusters(clustering, pool, 3) == [3, 1, 0]

    def test_ties_broken_by_ascending_id(self):
        clustering = synthetic_clustering([4, 4, 4])
        assert select_target_clusters(clustering, [], 3) == [0, 1, 2]

    def test_accepts_labeled_pool(self):
        clustering = synthetic_clustering([2, 2])
        result = select_target_clusters(clustering, LabeledPool([0]), 1)
        assert result == [1]

    def test_budget_errors(self):
        clustering = synthetic_clustering([2, 2])
        with pytest.raises(ValueError):
            select_target_clusters(clustering, [], 0)
        with pytest.raises(ValueError):
            select_target_clusters(clustering, [], 3)

    def test_no_duplicates_and_clean_when_possible(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n_clusters = int(rng.integers(2, 9))
            sizes = rng.integers(1, 12, size=n_clusters)
            clustering = synthetic_clustering(sizes)
            covered = [i for i in range(n_clusters) if rng.random() < 0.4]
            pool = [first_member(clustering, i) for i in covered]
            clean = [i for i in range(n_clusters) if i not in covered]
            for b in range(1, n_clusters + 1):
                chosen = select_target_clusters(clustering, pool, b)
                assert len(chosen) == len(set(chosen)) == b
                if len(clean) >= b:
                    assert set(chosen) <= set(clean)


class TestKMeansPartition:
    def test_estimator_attributes(self, two_blobs):
        est = KMeansPartition(n_clusters=2, seed=0).fit(two_blobs.embeddings)
        assert est.labels_.shape == (two_blobs.n,)
        assert est.cluster_centers_.shape == (2, 2)
        assert est.cluster_sizes_.sum() == two_blobs.n
        assert len(est.objective_history_) >= 1

    def test_predict_matches_labels(self, two_blobs):
        est = KMeansPartition(n_clusters=2, seed=0).fit(two_blobs.embeddings)
        np.testing.assert_array_equal(est.predict(two_blobs.embeddings), est.labels_)

    def test_get_params_round_trip(self):
        est = KMeansPartition(n_clusters=5, seed=3, max_iters=50, tol=1e-4)
        params = est.get_params()
        clone = KMeansPartition(**params)
        assert clone.get_params() == params
