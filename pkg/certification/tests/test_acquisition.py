import math
import tempfile
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase

from certification.services.acquisition import (
    MIN_RESAMPLES,
    BankEvidence,
    CampaignConfig,
    CoincidenceHistogram,
    JointCounts,
    bootstrap_margin,
    load_histogram,
    load_joint_counts,
    save_histogram,
    save_joint_counts,
    shot_noise_comparison,
    simulate_campaign,
    subtract_background,
    timing_entropy_bound,
)
from certification.services.coarsegrain import BoundKind
from certification.services.csv_service import read_comments
from certification.services.errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyHistogramError,
    InvalidDistributionError,
    PeakInWingsError,
    SchemaError,
)
from certification.services.filters import FilterBank, bank_weights
from certification.services.probcore import Grid2D, conditional_entropy
from certification.services.spdc import FWHM_PER_SIGMA, TimingModel, timing_difference_density

SPACING = 2 * math.pi * 100e6


def correlated_gaussian(sigma_plus: float, sigma_minus: float, half_span: float, step: float) -> Grid2D:
    n = int(round(2 * half_span / step))
    c = -half_span + (np.arange(n) + 0.5) * step
    a, b = np.meshgrid(c, c, indexing='ij')
    values = np.exp(-0.5 * ((a + b) / sigma_plus) ** 2 - 0.5 * ((a - b) / sigma_minus) ** 2)
    return Grid2D.normalize(-half_span, step, -half_span, step, values)


def peaked_histogram(sigma: float = 10e-12, pairs: float = 1e5, floor: float = 5.0) -> CoincidenceHistogram:
    density = timing_difference_density(TimingModel(0.0, sigma, FWHM_PER_SIGMA * sigma), 1e-12, span_sigmas=10.0)
    return CoincidenceHistogram.expected(density, pairs, floor)


def diagonal_counts(size: int = 5) -> JointCounts:
    table = np.full((size, size), 100, dtype=np.int64)
    np.fill_diagonal(table, 10_000)
    return JointCounts(table)


class HistogramTests(SimpleTestCase):

    def test_timing_bound_for_a_424_ps_peak(self):
        fwhm  = 424e-12
        model = TimingModel(0.0, fwhm / FWHM_PER_SIGMA, fwhm)
        hist  = CoincidenceHistogram.expected(timing_difference_density(model, 1e-12), 1.0)
        bound = timing_entropy_bound(hist)
        self.assertAlmostEqual(bound.value_bits, -30.324, delta=0.01)
        self.assertEqual(bound.kind, BoundKind.DIFF_VARIABLE)

    def test_bin_width_enters_in_seconds(self):
        counts = [0, 10, 10, 0]
        narrow = timing_entropy_bound(CoincidenceHistogram(1e-12, 0.0, counts))
        wide   = timing_entropy_bound(CoincidenceHistogram(2e-12, 0.0, counts))
        self.assertAlmostEqual(wide.value_bits - narrow.value_bits, 1.0, places=12)
        self.assertAlmostEqual(narrow.value_bits, 1.0 + math.log2(1e-12), places=12)

    def test_negative_counts_rejected(self):
        with self.assertRaises(InvalidDistributionError):
            CoincidenceHistogram(1e-12, 0.0, [1, -1, 2])
        with self.assertRaises(InvalidDistributionError):
            CoincidenceHistogram(0.0, 0.0, [1, 2])

    def test_background_subtraction_removes_the_floor(self):
        counts = np.full(20, 10)
        counts[10] = 1000
        clean = subtract_background(CoincidenceHistogram(1e-12, 0.0, counts), 0.1)
        self.assertEqual(clean.background_per_bin, 10.0)
        self.assertEqual(clean.total, 990.0)
        self.assertEqual(len(clean.provenance), 1)

    def test_peak_in_wings_aborts(self):
        counts = np.full(20, 10)
        counts[10] = 1000
        counts[0]  = 500
        with self.assertRaises(PeakInWingsError):
            subtract_background(CoincidenceHistogram(1e-12, 0.0, counts), 0.1)

    def test_flat_histogram_leaves_nothing(self):
        clean = subtract_background(CoincidenceHistogram(1e-12, 0.0, np.full(20, 7)), 0.1)
        with self.assertRaises(EmptyHistogramError):
            timing_entropy_bound(clean)

    def test_wing_fraction_is_checked(self):
        with self.assertRaises(ConfigError):
            subtract_background(CoincidenceHistogram(1e-12, 0.0, np.full(20, 7)), 0.5)

    def test_save_and_load(self):
        hist = CoincidenceHistogram(1e-12, -5e-12, [0, 3, 9, 4, 1, 0])
        with tempfile.TemporaryDirectory() as tmp:
            path = save_histogram(hist, Path(tmp) / 'histogram.csv', 'feed')
            self.assertEqual(read_comments(path), {'manifest': 'feed'})
            loaded = load_histogram(path)
        np.testing.assert_array_equal(loaded.counts, hist.counts)
        self.assertAlmostEqual(loaded.bin_width, 1e-12, delta=1e-24)
        self.assertAlmostEqual(loaded.t0, -5e-12, delta=1e-24)

    def test_uneven_bins_report_the_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'histogram.csv'
            path.write_text('bin_start_ps,counts\n0,5\n1,5\n3,5\n')
            with self.assertRaises(SchemaError) as ctx:
                load_histogram(path)
        self.assertEqual(ctx.exception.line, 4)

    def test_fractional_counts_report_the_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'histogram.csv'
            path.write_text('# manifest x\nbin_start_ps,counts\n0,5\n1,2.5\n')
            with self.assertRaises(SchemaError) as ctx:
                load_histogram(path)
        self.assertEqual(ctx.exception.line, 4)


class JointCountsTests(SimpleTestCase):

    def test_missing_pairs_are_zero(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'counts.csv'
            path.write_text('m_index,n_index,counts\n0,0,5\n1,2,7\n')
            jc = load_joint_counts(path)
        self.assertEqual(jc.shape, (2, 3))
        self.assertEqual(jc.total, 12.0)
        self.assertEqual(int(jc.counts[0, 1]), 0)

    def test_schema_errors(self):
        bodies = (
            'm_index,n_index,counts\n0,0,5\n0,0,7\n',
            'm_index,n_index,counts\n0,0,-5\n',
            'm,n,counts\n0,0,5\n',
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'counts.csv'
            for body in bodies:
                with self.subTest(body=body):
                    path.write_text(body)
                    with self.assertRaises(SchemaError):
                        load_joint_counts(path)
            path.write_text('m_index,n_index,counts\n3,0,5\n')
            with self.assertRaises(DimensionMismatchError):
                load_joint_counts(path, shape=(2, 2))

    def test_save_and_load(self):
        jc = diagonal_counts(3)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_joint_counts(jc, Path(tmp) / 'counts.csv', 'beef')
            loaded = load_joint_counts(path, shape=(3, 3))
        np.testing.assert_array_equal(loaded.counts, jc.counts)

    def test_table_must_match_the_banks(self):
        bank = FilterBank.uniform('top_hat', 4, SPACING, 0.0, SPACING)
        with self.assertRaises(DimensionMismatchError):
            diagonal_counts(5).to_coarse_grained(bank, bank)
        with self.assertRaises(EmptyHistogramError):
            JointCounts(np.zeros((2, 2))).probabilities()


class CampaignTests(SimpleTestCase):

    def setUp(self):
        self.rho  = correlated_gaussian(1.0, 4.0, 10.0, 0.05)
        self.bank = FilterBank.uniform('top_hat', 20, 1.0, -9.5, 1.0)

    def test_fixed_seed_is_reproducible(self):
        cfg = CampaignConfig(100_000, self.bank, self.bank, rng_seed=7)
        first  = simulate_campaign(self.rho, cfg, workers=1)
        second = simulate_campaign(self.rho, cfg, workers=4)
        np.testing.assert_array_equal(first.counts.counts, second.counts.counts)
        other = simulate_campaign(self.rho, CampaignConfig(100_000, self.bank, self.bank, rng_seed=8), workers=1)
        self.assertFalse(np.array_equal(first.counts.counts, other.counts.counts))
        self.assertIsNone(first.histogram)

    def test_noiseless_counts_are_the_expectation(self):
        timing = TimingModel(0.0, 20e-12, FWHM_PER_SIGMA * 20e-12)
        cfg = CampaignConfig(50_000, self.bank, self.bank, noiseless=True, timing=timing)
        result = simulate_campaign(self.rho, cfg, workers=1)
        np.testing.assert_allclose(result.counts.counts, result.expected)
        self.assertAlmostEqual(result.counts.total, 50_000, delta=1e-6)
        self.assertAlmostEqual(result.histogram.total, 50_000, delta=1e-6)

    def test_jitter_realizes_a_new_bank(self):
        bank = FilterBank.uniform('lorentzian', 401, 0.5, -100.0, 0.5)
        rho  = correlated_gaussian(1.0, 4.0, 8.0, 0.02)
        cfg  = CampaignConfig(10_000, bank, bank, center_jitter=0.05, width_jitter=0.05, rng_seed=1)
        result = simulate_campaign(rho, cfg, workers=1)
        self.assertEqual(result.bank_a.origin, 'simulated')
        self.assertFalse(np.allclose(result.bank_a.centers, bank.centers))
        self.assertFalse(np.allclose(result.bank_a.centers, result.bank_b.centers))
        np.testing.assert_allclose(result.bank_a.nominal_centers, bank.nominal_centers)

    def test_config_validation(self):
        for kwargs in ({'total_pairs': 0}, {'width_jitter': 1.0}, {'rng_seed': 2 ** 64}, {'center_jitter': -0.1}):
            with self.subTest(kwargs=kwargs):
                options = {'total_pairs': 10, 'bank_a': self.bank, 'bank_b': self.bank, **kwargs}
                with self.assertRaises(ConfigError):
                    CampaignConfig(**options)


class ShotNoiseTests(SimpleTestCase):

    def setUp(self):
        bank = FilterBank.uniform('top_hat', 5, SPACING, 0.0, SPACING)
        self.evidence = BankEvidence(bank, bank, 1.0, True)
        self.counts   = diagonal_counts(5)
        self.timing   = peaked_histogram()

    def test_bootstrap_is_reproducible_and_brackets_the_mean(self):
        first  = bootstrap_margin(self.counts, self.evidence, self.timing, n_resamples=MIN_RESAMPLES, rng_seed=3, workers=1)
        second = bootstrap_margin(self.counts, self.evidence, self.timing, n_resamples=MIN_RESAMPLES, rng_seed=3, workers=4)
        self.assertEqual(first, second)
        self.assertEqual(first.n_resamples, MIN_RESAMPLES)
        self.assertLessEqual(first.ci_low, first.margin_mean)
        self.assertLessEqual(first.margin_mean, first.ci_high)
        h_time = timing_entropy_bound(subtract_background(self.timing, 0.1))
        self.assertEqual(first.margin_point, self.evidence.pipeline_margin(self.counts, h_time, 'conditional'))
        self.assertGreater(first.margin_point, 0.0)

    def test_resamples_that_push_the_peak_into_the_wings_are_excluded(self):
        # Flat wings at 1000/bin pass exactly, but Poisson noise on 20 wing bins
        # lands near the 60-count limit about half the time.
        counts = np.full(100, 1000, dtype=np.int64)
        counts[50] = 1600
        timing = CoincidenceHistogram(1e-12, 0.0, counts, 0.0, ('marginal wings',))
        subtract_background(timing, 0.1)

        result = bootstrap_margin(self.counts, self.evidence, timing, n_resamples=MIN_RESAMPLES, rng_seed=11, workers=2)
        self.assertGreater(result.excluded, 0)
        self.assertLess(result.excluded, MIN_RESAMPLES)
        self.assertEqual(result.n_resamples, MIN_RESAMPLES)
        self.assertTrue(any('excluded' in w for w in result.warnings))
        self.assertTrue(math.isfinite(result.ci_low) and math.isfinite(result.ci_high))
        h_time = timing_entropy_bound(subtract_background(timing, 0.1))
        self.assertEqual(result.margin_point, self.evidence.pipeline_margin(self.counts, h_time, 'conditional'))
        again = bootstrap_margin(self.counts, self.evidence, timing, n_resamples=MIN_RESAMPLES, rng_seed=11, workers=1)
        self.assertEqual(result, again)

    def test_too_few_resamples(self):
        with self.assertRaises(ConfigError):
            bootstrap_margin(self.counts, self.evidence, self.timing, n_resamples=MIN_RESAMPLES - 1)

    def test_shared_bank_weights_are_computed_once(self):
        bank = FilterBank.uniform('lorentzian', 5, SPACING, 0.0, SPACING)
        with mock.patch('certification.services.acquisition.bank_weights', wraps=bank_weights) as spy:
            shared = BankEvidence.from_banks(bank, bank)
        self.assertEqual(spy.call_count, 1)
        self.assertEqual(shared.weights_b.arm, 'B')
        self.assertEqual(shared.weights_a.per_filter_w, shared.weights_b.per_filter_w)
        self.assertAlmostEqual(shared.w0, shared.weights_a.w0 ** 2, places=12)

        twin = FilterBank.uniform('lorentzian', 5, SPACING, 0.0, SPACING)
        with mock.patch('certification.services.acquisition.bank_weights', wraps=bank_weights) as spy:
            separate = BankEvidence.from_banks(bank, twin)
        self.assertEqual(spy.call_count, 2)
        self.assertAlmostEqual(separate.w0, shared.w0, places=12)
        self.assertEqual(separate.majorization_ok, shared.majorization_ok)

    def test_sum_bound_needs_unit_weight(self):
        bank = self.evidence.bank_a
        cg = self.counts.to_coarse_grained(bank, bank)
        self.assertTrue(self.evidence.frequency_bound(cg, 'sum_diff').valid)
        drifted = BankEvidence(bank, bank, 0.9, True)
        self.assertFalse(drifted.frequency_bound(cg, 'sum_diff').valid)
        self.assertGreater(
            drifted.frequency_bound(cg, 'conditional').value_bits,
            self.evidence.frequency_bound(cg, 'conditional').value_bits,
        )

    def test_shot_noise_comparison(self):
        result = shot_noise_comparison(self.counts, 0.9, (1.0, 1.2))
        expected = conditional_entropy(self.counts.probabilities(), 'B') * (1 / 0.9 - 1)
        self.assertAlmostEqual(result.drift_correction_bits, expected, places=12)
        self.assertAlmostEqual(result.ci_half_width_bits, 0.1, places=12)
        self.assertEqual(result.resolvable, expected > 0.1)
        with self.assertRaises(ValueError):
            shot_noise_comparison(self.counts, 0.0, (1.0, 1.2))
