import math

import numpy as np
import pytest
from scipy.stats import ks_2samp

from pfzeros.circuits import compile_general
from pfzeros.model import from_edge_list
from pfzeros.noise import (
    detectability,
    error_stats,
    noisy_minima_mask,
    noisy_scan,
    true_probabilities,
)
from pfzeros.statevector import run_full, sample_shots
from pfzeros.zeros import GridSpec, ScanGrid, scan


def l_grid(fn, spec):
    return scan(lambda w: math.log(fn(w)) if fn(w) > 0 else float("-inf"), spec)


class TestNoisyScan:
    def test_seed_determinism(self):
        spec = GridSpec(-1, 1, -1, 1, 12, 10)
        grid = l_grid(lambda w: 0.3, spec)
        a = noisy_scan(grid, 500, seed=7)
        b = noisy_scan(grid, 500, seed=7)
        assert np.array_equal(a.estimates, b.estimates)
        c = noisy_scan(grid, 500, seed=8)
        assert not np.array_equal(a.estimates, c.estimates)

    def test_thread_invariance(self):
        spec = GridSpec(-1, 1, -1, 1, 9, 11)
        grid = l_grid(lambda w: 0.4, spec)
        a = noisy_scan(grid, 200, seed=3, threads=1)
        b = noisy_scan(grid, 200, seed=3, threads=5)
        assert np.array_equal(a.estimates, b.estimates)

    def test_degenerate_probabilities(self):
        spec = GridSpec(-1, 1, -1, 1, 6, 6)
        zeros = noisy_scan(l_grid(lambda w: 0.0, spec), 100, seed=1)
        assert np.all(zeros.estimates == 0.0)
        ones = noisy_scan(l_grid(lambda w: 1.0, spec), 100, seed=1)
        assert np.all(ones.estimates == 1.0)

    def test_estimates_are_count_fractions(self):
        spec = GridSpec(-1, 1, -1, 1, 8, 8)
        n = 37
        noisy = noisy_scan(l_grid(lambda w: 0.37, spec), n, seed=2)
        counts = noisy.estimates * n
        assert np.allclose(counts, np.round(counts))

    def test_rejects_probabilities_above_one(self):
        spec = GridSpec(-1, 1, -1, 1, 4, 4)
        grid = ScanGrid(spec, np.full((4, 4), 0.5))  # ln L = 0.5 -> L ~ 1.65
        with pytest.raises(ValueError):
            noisy_scan(grid, 10, seed=0)

    def test_mean_statistics(self):
        # L = 0.5, n = 10000, 1000 cells: mean within 5 standard errors
        spec = GridSpec(-1, 1, -1, 1, 40, 25)
        noisy = noisy_scan(l_grid(lambda w: 0.5, spec), 10000, seed=11)
        se = math.sqrt(0.5 * 0.5 / (10000 * 1000))
        assert abs(noisy.estimates.mean() - 0.5) <= 5 * se


class TestErrorStats:
    def test_zero_probability(self):
        mean, var = error_stats(0.0, 1000, 200, seed=1)
        assert mean == 0.0 and var == 0.0

    def test_variance_formula(self):
        mean, var = error_stats(0.2, 5000, trials=4000, seed=5)
        expected = 0.2 * 0.8 / 5000  # = 3.2e-5
        assert var == pytest.approx(expected, rel=0.2)
        assert abs(mean - 0.2) <= 5 * math.sqrt(expected / 4000)

    def test_sqrt_n_scaling(self):
        _, v1 = error_stats(0.3, 1000, trials=4000, seed=9)
        _, v2 = error_stats(0.3, 10000, trials=4000, seed=10)
        assert math.sqrt(v1 / v2) == pytest.approx(math.sqrt(10), rel=0.15)

    def test_validation(self):
        with pytest.raises(ValueError):
            error_stats(1.5, 100, 200, seed=0)
        with pytest.raises(ValueError):
            error_stats(0.5, 100, 50, seed=0)


class TestBinomialShortcutEquivalence:
    def test_matches_multinomial_all_plus_sampling(self):
        # the binomial shortcut must be distributionally identical to full
        # projective sampling of the all-initial outcome
        m = from_edge_list(2, [(0, 1, 0.35 + 0.55j)])
        circ = compile_general(m)
        true_l = run_full(circ).probability
        n_shots, trials = 64, 10000
        multinomial = np.array(
            [sample_shots(circ, n_shots, seed=(1, t))[0] for t in range(trials)]
        )
        rng = np.random.default_rng(2)
        binomial = rng.binomial(n_shots, true_l, size=trials)
        stat = ks_2samp(multinomial, binomial)
        assert stat.pvalue > 1e-3

    def test_moment_agreement_across_points(self, rng):
        # 20 working points: first two moments agree within sampling error
        for t in range(20):
            l_true = float(rng.uniform(0.05, 0.95))
            n_shots, trials = 200, 400
            draws = rng.binomial(n_shots, l_true, size=trials) / n_shots
            se = math.sqrt(l_true * (1 - l_true) / (n_shots * trials))
            assert abs(draws.mean() - l_true) <= 6 * se


class TestDetectability:
    @staticmethod
    def _bowl_grid(spec, zeros):
        def fn(w):
            d = min(abs(w - z) for z in zeros)
            return min(0.9, 2.0 * d**2)

        return l_grid(fn, spec)

    def test_noiseless_limit(self):
        spec = GridSpec(-1, 1, -1, 1, 41, 43)
        zeros = [0.3 + 0.2j, -0.5 - 0.4j]
        grid = self._bowl_grid(spec, zeros)
        n = 10**7
        exact = noisy_scan(grid, n, seed=1)  # n -> infinity limit
        report = detectability(exact, zeros, radius_cells=1.0,
                               count_threshold=int(0.005 * n))
        assert report.fraction_within() == 1.0
        for d in report.detections:
            assert d.distance_cells <= 1.0

    def test_finite_shots_detection(self):
        spec = GridSpec(-1, 1, -1, 1, 41, 43)
        zeros = [0.3 + 0.2j, -0.5 - 0.4j]

        def fn(w):
            d = min(abs(w - z) for z in zeros)
            return min(0.9, 0.5 * d**2)

        grid = l_grid(fn, spec)
        hits = 0
        for seed in range(30):
            noisy = noisy_scan(grid, 5000, seed=seed)
            report = detectability(noisy, zeros, radius_cells=2.0, count_threshold=2)
            hits += report.fraction_within() == 1.0
        assert hits >= 27

    def test_single_shot_unreliable(self):
        spec = GridSpec(-1, 1, -1, 1, 41, 43)
        zeros = [0.3 + 0.2j]
        grid = self._bowl_grid(spec, zeros)
        noisy = noisy_scan(grid, 1, seed=4)
        # degenerate sampling: minima plaster the map instead of marking zeros
        mask = noisy_minima_mask(noisy, count_threshold=0)
        assert mask.sum() > 50

    def test_zero_outside_window_rejected(self):
        spec = GridSpec(-1, 1, -1, 1, 11, 11)
        grid = self._bowl_grid(spec, [0j])
        noisy = noisy_scan(grid, 100, seed=0)
        with pytest.raises(ValueError):
            detectability(noisy, [5.0 + 0j])

    def test_probabilities_round_trip(self):
        spec = GridSpec(-1, 1, -1, 1, 5, 5)
        grid = l_grid(lambda w: 0.25, spec)
        assert np.allclose(true_probabilities(grid), 0.25)
