import math

import numpy as np
import pytest

from bisp.errors import ConfigurationError, DataError
from bisp.scoring import (
    RocResult,
    ScoreSeries,
    ScoringConfig,
    anomaly_scores,
    block_mean_pool,
    compute_auc,
    frame_error_map,
    fuse_errors,
    gaussian_smooth,
    multiscale_psnr,
    normalize_scores,
    pad_edges,
    read_score_dump,
    write_roc_table,
    write_score_dump,
)
from oracles import (
    brute_force_multiscale_psnr,
    direct_gaussian_smooth,
    pairwise_auc,
)
from properties import (
    check_fusion_convexity,
    check_pooling_matches_bruteforce,
    check_psnr_monotonicity,
)


def _series(video_id, scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    return ScoreSeries(
        video_id=video_id,
        frame_indices=np.arange(n),
        fused_errors=np.zeros(n),
        psnr=np.linspace(20, 40, n),
        scores=scores,
        labels=None if labels is None else np.asarray(labels),
    )


@pytest.mark.equations
class TestErrorMaps:
    def test_identical_frames_give_zero_map(self):
        x = np.random.default_rng(0).uniform(-1, 1, (3, 8, 8))
        np.testing.assert_array_equal(frame_error_map(x, x), np.zeros((8, 8)))

    def test_single_pixel_difference(self):
        truth = np.zeros((3, 8, 8))
        pred = truth.copy()
        pred[:, 2, 5] += 0.3
        err = frame_error_map(pred, truth)
        assert err[2, 5] == pytest.approx(0.09, rel=1e-12)
        err[2, 5] = 0.0
        np.testing.assert_array_equal(err, np.zeros((8, 8)))

    def test_non_negative(self):
        rng = np.random.default_rng(1)
        err = frame_error_map(rng.uniform(-1, 1, (3, 8, 8)),
                              rng.uniform(-1, 1, (3, 8, 8)))
        assert err.min() >= 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            frame_error_map(np.zeros((3, 8, 8)), np.zeros((3, 4, 4)))


@pytest.mark.equations
class TestFusion:
    def test_halved_weights(self):
        cfg = ScoringConfig(w_f=0.5, w_b=0.5)
        fused = fuse_errors(np.full((4, 4), 0.02), np.full((4, 4), 0.04), cfg)
        np.testing.assert_allclose(fused, 0.03, rtol=1e-12)

    def test_degenerate_weight_passes_through_exactly(self):
        cfg = ScoringConfig(w_f=1.0, w_b=0.0)
        e_f = np.random.default_rng(2).uniform(0, 1, (6, 6))
        np.testing.assert_array_equal(fuse_errors(e_f, e_f * 3, cfg), e_f)

    def test_bad_weight_sum_rejected(self):
        with pytest.raises(ConfigurationError):
            ScoringConfig(w_f=0.6, w_b=0.6)

    def test_out_of_range_weight_rejected(self):
        with pytest.raises(ConfigurationError):
            ScoringConfig(w_f=-0.2, w_b=1.2)


@pytest.mark.equations
class TestMultiscalePsnr:
    def test_uniform_map_value(self):
        cfg = ScoringConfig()
        value = multiscale_psnr(np.full((16, 16), 0.01), cfg)
        assert value == pytest.approx(10 * math.log10(1 / (0.03 + 1e-8)), rel=1e-12)
        assert value == pytest.approx(15.229, abs=1e-3)

    def test_zero_map_hits_epsilon_guard(self):
        assert multiscale_psnr(np.zeros((16, 16)), ScoringConfig()) == 80.0

    def test_map_smaller_than_kernel_rejected(self):
        with pytest.raises(ValueError):
            multiscale_psnr(np.zeros((8, 8)), ScoringConfig())

    def test_concentrated_error_scores_lower_than_spread(self):
        cfg = ScoringConfig(pool_sizes=(2, 4, 8), num_scales=3)
        total = 16.0
        concentrated = np.zeros((32, 32))
        concentrated[:4, :4] = total / 16
        spread = np.full((32, 32), total / 1024)
        p_conc = multiscale_psnr(concentrated, cfg)
        p_spread = multiscale_psnr(spread, cfg)
        assert p_conc < p_spread
        assert p_conc == pytest.approx(
            brute_force_multiscale_psnr(concentrated, cfg.pool_sizes, cfg.epsilon),
            abs=1e-9,
        )
        assert p_spread == pytest.approx(
            brute_force_multiscale_psnr(spread, cfg.pool_sizes, cfg.epsilon),
            abs=1e-9,
        )

    def test_random_maps_match_bruteforce_oracle(self):
        rng = np.random.default_rng(3)
        cfg = ScoringConfig(pool_sizes=(4, 8, 16), num_scales=3)
        for _ in range(5):
            err = rng.uniform(0, 0.3, (32, 32))
            assert multiscale_psnr(err, cfg) == pytest.approx(
                brute_force_multiscale_psnr(err, cfg.pool_sizes, cfg.epsilon),
                abs=1e-9,
            )


@pytest.mark.equations
class TestNormalization:
    def test_three_point_example(self):
        np.testing.assert_allclose(normalize_scores([20, 30, 40]), [0, 0.5, 1])

    def test_monotone_preserved(self):
        values = np.array([12.0, 15.0, 15.5, 18.0, 40.0])
        out = normalize_scores(values)
        assert np.all(np.diff(out) > 0)

    def test_constant_series_degenerates_to_half(self):
        np.testing.assert_array_equal(normalize_scores([25, 25, 25]), [0.5] * 3)

    def test_empty_series_rejected(self):
        with pytest.raises(ValueError):
            normalize_scores([])


@pytest.mark.equations
class TestSmoothingAndScores:
    def test_constant_input_stays_constant(self):
        out = gaussian_smooth(np.full(40, 0.7), sigma=3.0)
        np.testing.assert_allclose(out, 0.7, atol=1e-12)

    def test_impulse_reproduces_sampled_kernel(self):
        n, sigma = 41, 3.0
        impulse = np.zeros(n)
        impulse[20] = 1.0
        out = gaussian_smooth(impulse, sigma)
        radius = math.ceil(4 * sigma)
        xs = np.arange(-radius, radius + 1)
        kernel = np.exp(-(xs ** 2) / (2 * sigma ** 2))
        kernel /= kernel.sum()
        np.testing.assert_allclose(out[20 - radius:20 + radius + 1], kernel,
                                   atol=1e-12)
        np.testing.assert_allclose(out, direct_gaussian_smooth(impulse, sigma),
                                   atol=1e-6)

    def test_matches_direct_convolution_oracle(self):
        rng = np.random.default_rng(4)
        for n, sigma in [(5, 3.0), (9, 1.0), (50, 3.0), (13, 2.5)]:
            values = rng.uniform(0, 1, n)
            np.testing.assert_allclose(
                gaussian_smooth(values, sigma),
                direct_gaussian_smooth(values, sigma),
                atol=1e-6,
            )

    def test_high_psnr_means_low_score(self):
        normalized = np.concatenate([np.full(10, 1.0), np.full(10, 0.0)])
        scores = anomaly_scores(normalized, ScoringConfig(), 0, 0)
        assert scores[0] < 0.2
        assert scores[-1] > 0.8

    def test_edge_frames_copy_nearest(self):
        normalized = np.linspace(0, 1, 14)
        scores = anomaly_scores(normalized, ScoringConfig())
        assert len(scores) == 20
        assert np.all(scores[:3] == scores[3])
        assert np.all(scores[-3:] == scores[-4])

    def test_out_of_range_input_rejected(self):
        with pytest.raises(ValueError):
            anomaly_scores(np.array([0.2, 1.4]), ScoringConfig())

    def test_pad_edges(self):
        out = pad_edges(np.array([1.0, 2.0, 3.0]), 2, 1)
        np.testing.assert_array_equal(out, [1, 1, 1, 2, 3, 3])


@pytest.mark.equations
class TestAuc:
    def test_perfect_separation(self):
        s = [_series("a", [0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])]
        assert compute_auc(s).auc == pytest.approx(1.0)

    def test_reversal_symmetry(self):
        rng = np.random.default_rng(5)
        scores = rng.uniform(0, 1, 50)
        labels = (rng.uniform(0, 1, 50) < 0.4).astype(int)
        labels[0], labels[1] = 0, 1
        auc = compute_auc([_series("a", scores, labels)]).auc
        flipped = compute_auc([_series("a", 1 - scores, labels)]).auc
        assert auc == pytest.approx(1.0 - flipped, abs=1e-9)

    def test_matches_pairwise_counting_oracle(self):
        rng = np.random.default_rng(6)
        scores = rng.uniform(0, 1, 400)
        labels = (rng.uniform(0, 1, 400) < 0.3).astype(int)
        auc = compute_auc([_series("a", scores, labels)]).auc
        assert auc == pytest.approx(pairwise_auc(scores, labels), abs=1e-9)

    def test_random_scores_near_half(self):
        rng = np.random.default_rng(7)
        scores = rng.uniform(0, 1, 4000)
        labels = (rng.uniform(0, 1, 4000) < 0.5).astype(int)
        assert compute_auc([_series("a", scores, labels)]).auc == pytest.approx(
            0.5, abs=0.05
        )

    def test_single_class_labels_rejected(self):
        with pytest.raises(DataError):
            compute_auc([_series("a", [0.1, 0.2], [0, 0])])

    def test_missing_labels_rejected(self):
        with pytest.raises(DataError):
            compute_auc([_series("a", [0.1, 0.2], None)])

    def test_video_order_does_not_matter(self):
        a = _series("a", [0.1, 0.9, 0.5, 0.5], [0, 1, 0, 1])
        b = _series("b", [0.3, 0.7, 0.5, 0.2], [0, 1, 1, 0])
        assert compute_auc([a, b]).auc == compute_auc([b, a]).auc


class TestSeriesAndDumps:
    def test_length_mismatch_rejected(self):
        with pytest.raises(DataError):
            ScoreSeries("v", np.arange(3), np.zeros(3), np.zeros(2),
                        np.zeros(3), None)

    def test_dump_round_trip(self, tmp_path):
        series = [
            _series("v0", [0.25, 0.5, 0.75], [0, 1, 1]),
            _series("v1", [0.1, 0.2, 0.3], [0, 0, 1]),
        ]
        path = write_score_dump(tmp_path / "scores.tsv", series)
        loaded = read_score_dump(path)
        assert [s.video_id for s in loaded] == ["v0", "v1"]
        for orig, got in zip(series, loaded):
            np.testing.assert_array_equal(got.frame_indices, orig.frame_indices)
            np.testing.assert_allclose(got.scores, orig.scores, atol=1e-6)
            np.testing.assert_allclose(got.psnr, orig.psnr, atol=1e-6)
            np.testing.assert_array_equal(got.labels, orig.labels)

    def test_dump_without_labels_round_trips_as_unlabeled(self, tmp_path):
        path = write_score_dump(tmp_path / "scores.tsv",
                                [_series("v0", [0.5, 0.6], None)])
        loaded = read_score_dump(path)
        assert loaded[0].labels is None

    def test_malformed_dump_rejected(self, tmp_path):
        bad = tmp_path / "bad.tsv"
        bad.write_text("nope\tnope\n1\t2\n")
        with pytest.raises(DataError):
            read_score_dump(bad)

    def test_roc_table_format(self, tmp_path):
        roc = RocResult(auc=0.75, fpr=np.array([0.0, 0.5, 1.0]),
                        tpr=np.array([0.0, 0.9, 1.0]),
                        thresholds=np.array([2, 1, 0.5]))
        path = write_roc_table(tmp_path / "roc.tsv", roc)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "fpr\ttpr"
        assert len(lines) == 4


@pytest.mark.properties
class TestScoringProperties:
    def test_fusion_is_convex(self):
        check_fusion_convexity(cases=100)

    def test_psnr_monotone_in_error(self):
        check_psnr_monotonicity(cases=100)

    def test_pooling_matches_bruteforce(self):
        check_pooling_matches_bruteforce(cases=100)

    def test_pipeline_determinism(self):
        rng = np.random.default_rng(8)
        maps = rng.uniform(0, 0.2, size=(30, 32, 32))
        labels = (rng.uniform(0, 1, 30) < 0.3).astype(int)
        labels[:2] = [0, 1]
        cfg = ScoringConfig(pool_sizes=(4, 8, 16), num_scales=3)

        def run():
            psnr = np.array([multiscale_psnr(m, cfg) for m in maps])
            scores = anomaly_scores(normalize_scores(psnr), cfg, 0, 0)
            return compute_auc([_series("v", scores, labels)]).auc

        assert run() == run()
