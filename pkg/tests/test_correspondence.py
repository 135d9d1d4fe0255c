import math

import numpy as np
import pytest

from corrmatch import (
    CorrespondenceMatrix,
    NumericalError,
    PointCloud,
    correspondence_accuracy,
    ground_truth_correspondence,
    ground_truth_correspondence_outlier,
    hard_assign,
    outlier_embedding,
    sinkhorn_normalize,
    soft_correspondence,
    soft_correspondence_outlier,
)


def brute_force_nn(src, tgt):
    """Reference nearest-neighbor scan with explicit lowest-index tie break."""
    out = []
    for x in src:
        best, best_d = 0, np.linalg.norm(x - tgt[0])
        for j in range(1, len(tgt)):
            d = np.linalg.norm(x - tgt[j])
            if d < best_d:
                best, best_d = j, d
        out.append(best)
    return np.array(out)


class TestCorrespondenceMatrixType:
    def test_rejects_bad_column_sums(self):
        with pytest.raises(ValueError):
            CorrespondenceMatrix(np.array([[0.5, 1.0], [0.4, 0.0]]))

    def test_rejects_out_of_range_entries(self):
        with pytest.raises(ValueError):
            CorrespondenceMatrix(np.array([[1.5], [-0.5]]))

    def test_rejects_soft_marked_hard(self):
        with pytest.raises(ValueError):
            CorrespondenceMatrix(np.array([[0.5], [0.5]]), hard=True)

    def test_csv_dump(self, tmp_path):
        C = CorrespondenceMatrix(np.array([[1.0, 0.25], [0.0, 0.75]]))
        path = tmp_path / "corr.csv"
        C.save_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "j0,j1"
        assert len(lines) == 3
        assert [float(v) for v in lines[1].split(",")] == [1.0, 0.25]


class TestGroundTruthCorrespondence:
    def test_same_cloud_gives_identity_pattern(self):
        X = PointCloud(np.random.default_rng(0).normal(size=(12, 3)))
        C = ground_truth_correspondence(X, X)
        assert C.hard and not C.outlier_augmented
        assert np.array_equal(C.entries, np.eye(12))

    def test_reversed_cloud_gives_antidiagonal(self):
        X = PointCloud(np.random.default_rng(1).normal(size=(9, 3)))
        Y = PointCloud(X.points[::-1])
        C = ground_truth_correspondence(X, Y)
        assert np.array_equal(C.entries, np.eye(9)[::-1])

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        X = PointCloud(rng.normal(size=(30, 3)))
        Y = PointCloud(rng.normal(size=(25, 3)))
        C = ground_truth_correspondence(X, Y)
        assert np.array_equal(hard_assign(C), brute_force_nn(X.points, Y.points))

    def test_column_sums(self):
        rng = np.random.default_rng(3)
        C = ground_truth_correspondence(
            PointCloud(rng.normal(size=(20, 3))), PointCloud(rng.normal(size=(15, 3)))
        )
        assert np.abs(C.entries.sum(axis=0) - 1.0).max() < 1e-9


class TestGroundTruthOutlier:
    def test_infinite_threshold_matches_plain(self):
        rng = np.random.default_rng(4)
        X = PointCloud(rng.normal(size=(18, 3)))
        Y = PointCloud(rng.normal(size=(14, 3)))
        plain = ground_truth_correspondence(X, Y)
        augmented = ground_truth_correspondence_outlier(X, Y, 1e12)
        assert augmented.outlier_augmented
        assert np.array_equal(augmented.entries[:-1], plain.entries)
        assert np.all(augmented.entries[-1] == 0.0)

    def test_displaced_point_is_flagged(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(size=(16, 3))
        moved = pts.copy()
        moved[7] += np.array([10.0, 0.0, 0.0])
        C = ground_truth_correspondence_outlier(PointCloud(moved), PointCloud(pts), 0.1)
        flagged = hard_assign(C) == 16
        assert flagged[7] and flagged.sum() == 1

    def test_flagged_set_equals_corruption_set(self):
        # well-separated shape: corrupted positions rejection-sampled to sit
        # beyond the threshold from every target, so the flag set is exact
        rng = np.random.default_rng(6)
        pts = np.random.default_rng(7).normal(size=(100, 3)) * 2.0
        corrupted_idx = rng.choice(100, size=10, replace=False)
        moved = pts.copy()
        for i in corrupted_idx:
            while True:
                candidate = rng.uniform(-0.5, 0.5, size=3)
                if np.linalg.norm(pts - candidate, axis=1).min() > 0.1:
                    moved[i] = candidate
                    break
        C = ground_truth_correspondence_outlier(PointCloud(moved), PointCloud(pts), 0.1)
        assert np.array_equal(np.sort(np.where(hard_assign(C) == 100)[0]), np.sort(corrupted_idx))

    def test_rejects_nonpositive_threshold(self):
        X = PointCloud(np.zeros((3, 3)) + np.arange(3)[:, None])
        with pytest.raises(ValueError):
            ground_truth_correspondence_outlier(X, X, 0.0)


class TestSoftCorrespondence:
    def test_identical_features_give_uniform_columns(self):
        F = np.ones((4, 6))
        C = soft_correspondence(F, np.ones((4, 5)))
        assert np.abs(C.entries - 1.0 / 5.0).max() < 1e-12

    def test_scaled_identity_features(self):
        # hand softmax: diagonal = e^s / (e^s + 1) for 2x2 identity logits scaled by s
        for s in (0.5, 2.0, 5.0):
            C = soft_correspondence(s * np.eye(2), np.eye(2))
            expected = math.exp(s) / (math.exp(s) + 1.0)
            assert np.abs(np.diag(C.entries) - expected).max() < 1e-12

    def test_columns_sum_to_one(self):
        rng = np.random.default_rng(8)
        C = soft_correspondence(rng.normal(size=(16, 40)), rng.normal(size=(16, 32)))
        assert np.abs(C.entries.sum(axis=0) - 1.0).max() < 1e-12

    def test_shift_invariance(self):
        # softmax(c + k) = softmax(c)
        from corrmatch.correspondence import column_softmax

        rng = np.random.default_rng(9)
        logits = rng.normal(size=(12, 10))
        base = column_softmax(logits)
        for shift in (37.5, -4.0, 1e3):
            assert np.abs(column_softmax(logits + shift) - base).max() < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            soft_correspondence(np.ones((4, 3)), np.ones((5, 3)))

    def test_extreme_logits_are_stable(self):
        F_X = np.array([[1e4, -1e4]])
        F_Y = np.array([[1.0, -1.0]])
        C = soft_correspondence(F_X, F_Y)
        assert np.all(np.isfinite(C.entries))


class TestOutlierEmbedding:
    def test_identity_features_give_constant_vector(self):
        f = outlier_embedding(np.eye(5), b=-1.0)
        assert np.abs(f + 1.0).max() < 1e-12

    def test_orthonormal_columns_zero_residual(self):
        # oracle: explicit normal-equations solve for the minimum-norm solution
        rng = np.random.default_rng(10)
        Q, _ = np.linalg.qr(rng.normal(size=(8, 5)))
        F_Y = Q[:, :5]
        f = outlier_embedding(F_Y, b=-1.0)
        residual = F_Y.T @ f + 1.0
        assert np.linalg.norm(residual) < 1e-10
        f_normal = F_Y @ np.linalg.solve(F_Y.T @ F_Y, -np.ones(5))
        assert np.abs(f - f_normal).max() < 1e-10

    def test_beats_random_candidates(self):
        # Monte-Carlo optimality: no random vector does better on an overdetermined system
        rng = np.random.default_rng(11)
        F_Y = rng.normal(size=(4, 12))
        f = outlier_embedding(F_Y, b=-1.0)
        best = np.linalg.norm(F_Y.T @ f + 1.0)
        for _ in range(1000):
            candidate = rng.normal(size=4) * rng.uniform(0.1, 3.0)
            assert best <= np.linalg.norm(F_Y.T @ candidate + 1.0) + 1e-12

    def test_stationarity(self):
        rng = np.random.default_rng(12)
        for shape in ((4, 12), (8, 8), (12, 5)):
            F_Y = rng.normal(size=shape)
            f = outlier_embedding(F_Y, b=-1.0)
            grad = F_Y @ (F_Y.T @ f + 1.0)
            assert np.linalg.norm(grad) < 1e-8

    def test_zero_features_warn_and_return_zero(self):
        with pytest.warns(UserWarning):
            f = outlier_embedding(np.zeros((4, 6)), b=-1.0)
        assert np.array_equal(f, np.zeros(4))


class TestSoftCorrespondenceOutlier:
    def test_saturated_outlier_row_is_zero(self):
        # constant extra feature row lets the outlier logit hit -1e6 everywhere
        rng = np.random.default_rng(13)
        F_X = np.vstack([rng.normal(size=(3, 7)), np.ones(7)])
        F_Y = np.vstack([rng.normal(size=(3, 5)), np.zeros(5)])
        f_o = np.array([0.0, 0.0, 0.0, -1e6])
        C = soft_correspondence_outlier(F_X, F_Y, f_o)
        assert C.outlier_augmented
        assert np.all(C.entries[-1] == 0.0)

    def test_single_target_symmetric(self):
        F_X = np.array([[1.0], [2.0]])
        F_Y = np.array([[0.3], [-0.7]])
        C = soft_correspondence_outlier(F_X, F_Y, F_Y[:, 0])
        assert np.abs(C.entries - 0.5).max() < 1e-12

    def test_limit_reduces_to_plain_soft(self):
        # with the outlier logit at -1e3, dropping its row and renormalizing
        # must reproduce the non-augmented softmax
        rng = np.random.default_rng(14)
        F_X = np.vstack([rng.normal(size=(4, 9)), np.ones(9)])
        F_Y = np.vstack([rng.normal(size=(4, 6)), np.zeros(6)])
        f_o = np.array([0.0, 0.0, 0.0, 0.0, -1e3])
        augmented = soft_correspondence_outlier(F_X, F_Y, f_o)
        trimmed = augmented.entries[:-1]
        trimmed = trimmed / trimmed.sum(axis=0, keepdims=True)
        plain = soft_correspondence(F_X, F_Y)
        assert np.abs(trimmed - plain.entries).max() < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            soft_correspondence_outlier(np.ones((4, 3)), np.ones((4, 2)), np.ones(5))


class TestSinkhorn:
    def test_doubly_stochastic_fixed_point(self):
        M = np.array([[0.6, 0.4], [0.4, 0.6]])
        W = sinkhorn_normalize(M, iters=5).entries
        assert np.abs(W - M).max() < 1e-9

    def test_identity_unchanged(self):
        W = sinkhorn_normalize(np.eye(2), iters=5).entries
        assert np.abs(W - np.eye(2)).max() < 1e-8

    def test_row_sums_converge(self):
        # oracle: direct sum check after 50 iterations on a positive 5x5 matrix
        rng = np.random.default_rng(15)
        M = rng.uniform(0.1, 2.0, size=(5, 5))
        W = sinkhorn_normalize(M, iters=50).entries
        assert np.abs(W.sum(axis=1) - 1.0).max() < 1e-6
        assert np.abs(W.sum(axis=0) - 1.0).max() < 1e-12  # ends on column normalization

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            sinkhorn_normalize(np.array([[-0.1, 1.0], [1.0, 0.1]]))
        with pytest.raises(ValueError):
            sinkhorn_normalize(np.eye(2), iters=0)
        with pytest.raises(NumericalError):
            sinkhorn_normalize(np.zeros((3, 3)))


class TestHardAssign:
    def test_hard_matrix_returns_defining_indices(self):
        idx = np.array([2, 0, 1, 1])
        entries = np.zeros((3, 4))
        entries[idx, np.arange(4)] = 1.0
        C = CorrespondenceMatrix(entries, hard=True)
        assert np.array_equal(hard_assign(C), idx)

    def test_uniform_column_ties_to_zero(self):
        C = CorrespondenceMatrix(np.full((4, 3), 0.25))
        assert np.array_equal(hard_assign(C), np.zeros(3, dtype=int))

    def test_matches_linear_scan(self):
        rng = np.random.default_rng(16)
        raw = rng.uniform(0.0, 1.0, size=(7, 11))
        C = CorrespondenceMatrix(raw / raw.sum(axis=0, keepdims=True))
        expected = [max(range(7), key=lambda j: C.entries[j, i]) for i in range(11)]
        assert np.array_equal(hard_assign(C), expected)


class TestCorrespondenceAccuracy:
    def test_perfect(self):
        C = ground_truth_correspondence(
            PointCloud(np.random.default_rng(17).normal(size=(10, 3))),
            PointCloud(np.random.default_rng(18).normal(size=(10, 3))),
        )
        assert correspondence_accuracy(C, C) == 100.0

    def test_all_wrong(self):
        a = CorrespondenceMatrix(np.eye(4), hard=True)
        b = CorrespondenceMatrix(np.eye(4)[::-1], hard=True)
        assert correspondence_accuracy(a, b) == 0.0

    def test_half_right_512(self):
        n = 512
        eye = np.eye(n)
        shuffled = eye.copy()
        shuffled[:, : n // 2] = np.roll(eye[:, : n // 2], 1, axis=0)
        a = CorrespondenceMatrix(eye, hard=True)
        b = CorrespondenceMatrix(shuffled, hard=True)
        assert correspondence_accuracy(a, b) == 50.0

    def test_shape_mismatch(self):
        a = CorrespondenceMatrix(np.eye(4), hard=True)
        b = CorrespondenceMatrix(np.eye(3), hard=True)
        with pytest.raises(ValueError):
            correspondence_accuracy(a, b)
