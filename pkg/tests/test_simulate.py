import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import isotonic_regression

from rptdetect import analysis
from rptdetect import simulate as S
from rptdetect.detector import mary_decide, mary_detector
from rptdetect.errors import InvalidArgumentError
from rptdetect.ramanujan import build_dictionary, restrict, support_set


class TestSpatialModels:
    def test_rho_distance(self):
        C = S.rho_distance_covariance(0.5, 3)
        assert np.allclose(C, [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])
        C2 = S.rho_distance_covariance(0.5, 2, positions=[[0, 0], [3, 4]])
        assert C2[0, 1] == pytest.approx(0.5 ** 5)
        assert np.array_equal(S.rho_distance_covariance(0.0, 4), np.eye(4))

    @pytest.mark.parametrize("rho", [-0.1, 1.0, 1.5])
    def test_rho_range(self, rho):
        with pytest.raises(InvalidArgumentError):
            S.rho_distance_covariance(rho, 3)
        with pytest.raises(InvalidArgumentError):
            S.SpatialModel("rho", rho=rho)

    def test_matrix_model(self):
        Sigma = [[2.0, 0.3], [0.3, 1.0]]
        m = S.SpatialModel.from_matrix(Sigma)
        assert np.array_equal(m.covariance(2), Sigma)
        assert m.covariance(1).tolist() == [[2.0]]
        with pytest.raises(InvalidArgumentError):
            m.covariance(3)
        with pytest.raises(Exception):
            S.SpatialModel.from_matrix([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(InvalidArgumentError):
            S.SpatialModel("laplacian")

    def test_spec_validation(self):
        with pytest.raises(InvalidArgumentError):
            S.SyntheticSpec((10, 40), 30)
        with pytest.raises(InvalidArgumentError):
            S.SyntheticSpec((), 30)
        with pytest.raises(InvalidArgumentError):
            S.SyntheticSpec((10,), 30, N_c=0)
        spec = S.SyntheticSpec((10, 8), 40, snr_db=-10)
        assert spec.M == 2 and spec.snr == pytest.approx(0.1)
        assert spec.with_length(80).L == 80


class TestSampleRepresentation:
    def setup_method(self):
        self.D = build_dictionary(32, 200)

    @pytest.mark.parametrize("T, snr", [(32, 10 ** -1.5), (18, 1.0), (1, 0.3), (7, 25.0)])
    def test_exact_snr(self, T, snr):
        x = S.sample_representation(T, self.D, snr, np.random.default_rng(T))
        K = restrict(self.D, support_set(self.D, T))
        assert x.shape == (T,)
        assert abs(analysis.snr(x, K) - snr) < 1e-10

    def test_zero_target(self):
        x = S.sample_representation(12, self.D, 0.0, np.random.default_rng(0))
        assert not np.any(x)
        with pytest.raises(InvalidArgumentError):
            S.sample_representation(12, self.D, -1.0, np.random.default_rng(0))

    def test_seeds_differ_with_same_snr(self):
        K = restrict(self.D, support_set(self.D, 20))
        a = S.sample_representation(20, self.D, 0.05, S.trial_rng(1, 0))
        b = S.sample_representation(20, self.D, 0.05, S.trial_rng(2, 0))
        assert not np.allclose(a, b)
        assert analysis.snr(a, K) == pytest.approx(analysis.snr(b, K), rel=1e-12)
        c = S.sample_representation(20, self.D, 0.05, S.trial_rng(1, 0))
        assert np.array_equal(a, c)

    def test_multichannel_columns(self):
        X = S.sample_representation(15, self.D, 0.2, np.random.default_rng(4), n_channels=3)
        K = restrict(self.D, support_set(self.D, 15))
        assert X.shape == (15, 3)
        for j in range(3):
            assert analysis.snr(X[:, j], K) == pytest.approx(0.2, abs=1e-10)


class TestSynthesis:
    def test_noiseless_recovery(self):
        spec = S.SyntheticSpec((10, 11, 12, 13, 14), 60, N_c=3, snr_db=0,
                               spatial=S.SpatialModel("rho", rho=0.5))
        det = mary_detector(S.spec_dictionary(spec), spec.periods, spec.spatial.spatial(3))
        batch = S.generate_batch(spec, 20, noise_scale=0.0)
        assert np.array_equal(mary_decide(batch.trials, det), batch.labels)

    def test_single_trial_matches_batch(self):
        spec = S.SyntheticSpec((9, 4), 36, snr_db=-5, seed=8)
        batch = S.generate_batch(spec, 3)
        rngs = (S.trial_rng(8, S.SIGNAL_STREAM, 1, 2), S.trial_rng(8, S.NOISE_STREAM, 1, 2))
        assert np.array_equal(S.synthesize_trial(spec, 1, rngs), batch.trials[5])
        with pytest.raises(InvalidArgumentError):
            S.synthesize_trial(spec, 2, np.random.default_rng(0))

    def test_noise_covariance_recovery(self):
        Sigma = S.rho_distance_covariance(0.7, 4)
        spec = S.SyntheticSpec((5,), 1000, N_c=4, snr_db=0, spatial=S.SpatialModel("rho", rho=0.7))
        batch = S.generate_batch(spec, 100, noise_scale=1.0, coeffs=[np.zeros(5)])
        rows = batch.trials.reshape(-1, 4)
        assert rows.shape[0] == 100_000
        assert np.max(np.abs(np.cov(rows.T) - Sigma)) < 0.05

    def test_reproducible(self):
        spec = S.SyntheticSpec((12, 7), 50, N_c=2, snr_db=-8, seed=42)
        a, b = S.generate_batch(spec, 10), S.generate_batch(spec, 10)
        assert np.array_equal(a.trials, b.trials) and np.array_equal(a.labels, b.labels)
        c = S.generate_batch(replace(spec, seed=43), 10)
        assert not np.array_equal(a.trials, c.trials)

    def test_channel_prefix_nesting(self):
        base = S.SyntheticSpec((12, 7), 50, N_c=8, snr_db=-8, seed=3,
                               spatial=S.SpatialModel("rho", rho=0.6))
        full = S.generate_batch(base, 5).trials
        for k in (1, 2, 4):
            part = S.generate_batch(replace(base, N_c=k), 5).trials
            assert np.allclose(full[..., :k], part, rtol=0, atol=1e-12)

    def test_noise_whiteness(self):
        spec = S.SyntheticSpec((3,), 4000, N_c=2, spatial=S.SpatialModel("rho", rho=0.8))
        W = S.generate_batch(spec, 5, coeffs=[np.zeros(3)]).trials
        for trial in W:
            for ch in range(2):
                w = trial[:, ch] - trial[:, ch].mean()
                r = np.array([np.dot(w[:-k], w[k:]) for k in range(1, 6)]) / np.dot(w, w)
                assert np.all(np.abs(r) < 3 / math.sqrt(len(w)))

    def test_projection_energy_favours_own_support(self):
        spec = S.SyntheticSpec((9, 4), 36, snr_db=-3, seed=2)
        D = S.spec_dictionary(spec)
        batch = S.generate_batch(spec, 400)
        from rptdetect.detector import orthogonal_operators
        A, B = orthogonal_operators(D, 9, 4)
        y = batch.trials[..., 0]
        eA = A.energy(y) / A.rank
        eB = B.energy(y) / B.rank
        own = np.where(batch.labels == 0, eA - eB, eB - eA)
        assert own.mean() > 0
        assert own.mean() > 3 * own.std() / math.sqrt(len(own))

    def test_prestimulus_segments(self):
        spec = S.SyntheticSpec((3,), 10, N_c=3, spatial=S.SpatialModel("rho", rho=0.5))
        segs = S.prestimulus_segments(spec, 1000, 300)
        assert len(segs) == 4 and segs[0].shape == (300, 3)
        assert np.array_equal(segs[2], S.prestimulus_segments(spec, 1000, 300)[2])


class TestRoc:
    def setup_method(self):
        self.spec = S.SyntheticSpec((25, 15), 200, snr_db=-15, seed=1)

    def test_corners(self):
        r = S.run_roc(self.spec, n_trials=300, gamma_grid=[-1e9, 0.0, 1e9])
        first, last = r.table.iloc[0], r.table.iloc[-1]
        assert (first.pf_emp, first.pd_emp) == (0.0, 0.0)
        assert (last.pf_emp, last.pd_emp) == (1.0, 1.0)
        assert list(r.table.gamma) == [1e9, 0.0, -1e9]

    def test_overlay(self):
        r = S.run_roc(self.spec, n_trials=2500)
        t = r.table
        assert np.max(np.abs(t.pd_emp - t.pd_theory)) <= 0.05
        assert np.max(np.abs(t.pf_emp - t.pf_theory)) <= 0.05
        assert np.all((t.pf_lo <= t.pf_emp) & (t.pf_emp <= t.pf_hi))
        assert np.all(np.diff(r.curve.pd) >= 0)

    def test_interval_width_shrinks(self):
        g = [0.0]
        w1 = S.run_roc(self.spec, n_trials=1000, gamma_grid=g).table
        w2 = S.run_roc(self.spec, n_trials=2000, gamma_grid=g).table
        ratio = (w2.pd_hi - w2.pd_lo).iloc[0] / (w1.pd_hi - w1.pd_lo).iloc[0]
        assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.05)

    def test_worker_count_does_not_change_results(self):
        a = S.run_roc(self.spec, n_trials=600, workers=1).table
        b = S.run_roc(self.spec, n_trials=600, workers=2).table
        assert a.equals(b)


class TestAccuracyHarness:
    def test_matches_analytic_prediction(self):
        spec = S.SyntheticSpec((32, 18), 64, snr_db=-15, seed=4)
        t = S.run_accuracy_vs_length(spec, [64, 128, 256, 512], 2000)
        for row in t.itertuples():
            lo, hi = analysis.wilson_interval(row.correct, row.trials, z=2.5758293035489004)
            assert lo <= row.accuracy_theory <= hi

    def test_monotone_after_isotonic_smoothing(self):
        spec = S.SyntheticSpec((32, 18), 64, snr_db=-15, seed=6)
        t = S.run_accuracy_vs_length(spec, [32, 64, 128, 192, 256, 384, 512, 768], 1000,
                                     random_signals=True)
        fit = isotonic_regression(t.accuracy.to_numpy()).x
        assert np.all(np.diff(fit) >= 0)
        # the monotone fit never has to leave the per-point intervals
        assert np.all((fit >= t.acc_lo - 1e-12) & (fit <= t.acc_hi + 1e-12))
        assert t.accuracy.iloc[-1] > t.accuracy.iloc[0]

    def test_shortest_length_above_chance(self):
        spec = S.SyntheticSpec((32, 18), 32, snr_db=-15, seed=6)
        t = S.run_accuracy_vs_length(spec, [32], 2000, random_signals=True)
        assert t.accuracy.iloc[0] >= 0.5

    def test_binary_tradeoff_consistency(self):
        spec = S.SyntheticSpec((10, 11), 50, snr_db=-10, seed=9)
        acc = S.run_accuracy_vs_length(spec, [50], 500, random_signals=True)
        trade = S.run_tradeoff(spec, [2], 500, channel_counts=(1,), methods=("rpt",))
        assert int(trade.errors.iloc[0]) == int(acc.trials.iloc[0] - acc.correct.iloc[0])


class TestGapHarness:
    def test_bound_dominates(self):
        spec = S.SyntheticSpec((32, 18), 320, snr_db=-15, seed=2)
        t = S.run_gap_experiment(spec, [320, 640, 960], 2000)
        assert np.all(t.gap_theory >= 0)
        assert np.all(t.pd_pmb >= t.pd_lo)
        assert np.all(np.diff(t.gap_closed) < 0)


class TestTradeoffHarness:
    def test_table_and_flooring(self):
        spec = S.SyntheticSpec(tuple(range(10, 14)), 50, N_c=2, snr_db=20, seed=1,
                               spatial=S.SpatialModel("rho", rho=0.5))
        t = S.run_tradeoff(spec, [2, 4], 50, channel_counts=(1, 2))
        assert len(t) == 8
        assert set(t.method) == {"rpt", "cca"}
        floor = t[t.errors == 0]
        assert len(floor) > 0
        assert np.all(floor.pe == 1 / (2 * floor.trials))

    def test_invalid_M(self):
        spec = S.SyntheticSpec((10, 11, 12), 50)
        with pytest.raises(InvalidArgumentError):
            S.run_tradeoff(spec, [4], 10)
        with pytest.raises(InvalidArgumentError):
            S.run_tradeoff(spec, [2], 10, methods=("psda",))


class TestMismatchHarness:
    def test_white_noise_curves_agree(self):
        spec = S.SyntheticSpec((12, 10, 9, 8), 48, N_c=4, snr_db=-12, seed=3,
                               spatial=S.SpatialModel("rho", rho=0.0))
        t = S.run_mismatch_experiment(spec, [48], 500)
        acc = t.set_index("covariance")
        assert acc.loc["known", "correct"] == acc.loc["identity", "correct"]
        for a, b in (("known", "estimated"), ("estimated", "known")):
            _, p = analysis.two_proportion_test(acc.loc[a, "correct"], acc.loc[a, "trials"],
                                                acc.loc[b, "correct"], acc.loc[b, "trials"])
            assert p > 0.01

    def test_requires_multichannel(self):
        with pytest.raises(InvalidArgumentError):
            S.run_mismatch_experiment(S.SyntheticSpec((8, 6), 24), [24], 10)


class TestHarmonicSweep:
    def test_schema_and_shared_trials(self):
        spec = S.SyntheticSpec((32, 18), 256, snr_db=-12, seed=1)
        t = S.run_harmonic_sweep(spec, [256], 200, harmonics=(1, 2), include_psda=True)
        assert list(t.method) == ["rpt", "cca", "cca", "psda"]
        assert list(t.harmonics) == [0, 1, 2, 0]
        assert np.all(t.trials == 400) and np.all(t.seconds == 1.0)
        assert np.all(t.accuracy > 0.5)
