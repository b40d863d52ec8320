import math

import numpy as np
from django.test import SimpleTestCase

from certification.services.coarsegrain import BoundKind, EntropyBound
from certification.services.errors import KindMismatchError
from certification.services.spdc import gaussian_max_entropy
from certification.services.witness import (
    THRESHOLDS,
    Inequality,
    ebits_lower_bound,
    evaluate_witness,
    frequency_budget,
    grating_resolution,
    prism_resolution,
    required_grating_width,
)

TWO_PI = 2 * math.pi


class ThresholdTests(SimpleTestCase):

    def test_threshold_values(self):
        self.assertAlmostEqual(THRESHOLDS[Inequality.SUM_DIFF], 4.094, delta=1e-3)
        self.assertAlmostEqual(THRESHOLDS[Inequality.CONDITIONAL], 3.094, delta=1e-3)
        self.assertAlmostEqual(THRESHOLDS[Inequality.SUM_DIFF] - THRESHOLDS[Inequality.CONDITIONAL], 1.0, places=12)


class EvaluateWitnessTests(SimpleTestCase):

    def test_conditional_witness_certifies_below_threshold(self):
        report = evaluate_witness(
            EntropyBound(-30.324, BoundKind.CONDITIONAL),
            EntropyBound(32.3, BoundKind.CONDITIONAL),
            'conditional',
            inputs_digest={'counts': 'abc'},
        )
        self.assertTrue(report.certified)
        self.assertAlmostEqual(report.margin, THRESHOLDS[Inequality.CONDITIONAL] + 30.324 - 32.3, places=12)
        self.assertEqual(report.to_dict()['inputs_digest'], {'counts': 'abc'})
        self.assertIn('CERTIFIED', report.summary())

    def test_margin_must_be_strictly_positive(self):
        threshold = THRESHOLDS[Inequality.CONDITIONAL]
        report = evaluate_witness(
            EntropyBound(0.0, BoundKind.CONDITIONAL),
            EntropyBound(threshold, BoundKind.CONDITIONAL),
            Inequality.CONDITIONAL,
        )
        self.assertEqual(report.margin, 0.0)
        self.assertFalse(report.certified)

    def test_invalid_bound_blocks_certification(self):
        report = evaluate_witness(
            EntropyBound(-40.0, BoundKind.CONDITIONAL),
            EntropyBound(1.0, BoundKind.CONDITIONAL, valid=False),
            Inequality.CONDITIONAL,
        )
        self.assertGreater(report.margin, 0.0)
        self.assertFalse(report.preconditions_met)
        self.assertFalse(report.certified)
        self.assertTrue(any('frequency bound is not valid' in note for note in report.notes))

    def test_substitute_kinds_are_noted(self):
        report = evaluate_witness(
            EntropyBound(-30.0, BoundKind.DIFF_VARIABLE),
            EntropyBound(30.0, BoundKind.SUM_VARIABLE, correction_w0=0.9),
            Inequality.CONDITIONAL,
        )
        self.assertEqual(len(report.notes), 2)
        self.assertEqual(report.w0_used, 0.9)

    def test_sum_difference_witness_needs_sum_and_difference_bounds(self):
        report = evaluate_witness(
            EntropyBound(-30.0, BoundKind.DIFF_VARIABLE),
            EntropyBound(33.0, BoundKind.SUM_VARIABLE),
            Inequality.SUM_DIFF,
        )
        self.assertTrue(report.certified)
        with self.assertRaises(KindMismatchError):
            evaluate_witness(
                EntropyBound(-30.0, BoundKind.CONDITIONAL),
                EntropyBound(33.0, BoundKind.SUM_VARIABLE),
                Inequality.SUM_DIFF,
            )

    def test_joint_bound_is_rejected(self):
        with self.assertRaises(KindMismatchError):
            evaluate_witness(
                EntropyBound(-30.0, BoundKind.CONDITIONAL),
                EntropyBound(33.0, BoundKind.JOINT),
                Inequality.CONDITIONAL,
            )

    def test_separable_states_never_certify(self):
        # Product Gaussian states, each photon at or above minimum uncertainty σ_t·σ_ω = 1/2.
        rng = np.random.default_rng(1234)
        for trial in range(1000):
            sigma_ta, sigma_tb = 10.0 ** rng.uniform(-13.0, -9.0, size=2)
            sigma_wa = rng.uniform(1.0, 3.0) / (2.0 * sigma_ta)
            sigma_wb = rng.uniform(1.0, 3.0) / (2.0 * sigma_tb)
            h_diff = EntropyBound(gaussian_max_entropy(math.hypot(sigma_ta, sigma_tb)), BoundKind.DIFF_VARIABLE)
            reports = (
                evaluate_witness(
                    h_diff,
                    EntropyBound(gaussian_max_entropy(sigma_wa), BoundKind.CONDITIONAL),
                    Inequality.CONDITIONAL,
                ),
                evaluate_witness(
                    h_diff,
                    EntropyBound(gaussian_max_entropy(math.hypot(sigma_wa, sigma_wb)), BoundKind.SUM_VARIABLE),
                    Inequality.SUM_DIFF,
                ),
            )
            for report in reports:
                with self.subTest(trial=trial, inequality=report.inequality.value):
                    self.assertLess(report.margin, 0.0)
                    self.assertFalse(report.certified)

    def test_unknown_inequality(self):
        with self.assertRaises(ValueError):
            evaluate_witness(
                EntropyBound(0.0, BoundKind.CONDITIONAL), EntropyBound(0.0, BoundKind.CONDITIONAL), 'bogus',
            )


class BudgetTests(SimpleTestCase):

    def test_budget_from_time_bound(self):
        budget = frequency_budget(-30.324, 1550e-9)
        self.assertAlmostEqual(budget.max_h_freq, 33.42, delta=0.02)
        self.assertAlmostEqual(budget.max_sigma / TWO_PI / 1e6, 442.0, delta=5.0)
        self.assertAlmostEqual(budget.max_fwhm_gauss_pm, 8.8, delta=0.9)
        self.assertAlmostEqual(budget.max_fwhm_lorentz / TWO_PI / 1e9, 0.29, delta=0.01)

    def test_budget_rejects_bad_inputs(self):
        with self.assertRaises(ValueError):
            frequency_budget(math.inf, 1550e-9)
        with self.assertRaises(ValueError):
            frequency_budget(-30.0, 0.0)

    def test_grating_resolution(self):
        self.assertAlmostEqual(grating_resolution(600, 10, 193.4e12) / 1e9, 32.2, delta=0.1)
        width = required_grating_width(600, 193.4e12, 1e9)
        self.assertAlmostEqual(width, 322.3, delta=0.1)
        self.assertAlmostEqual(required_grating_width(600, 193.4e12, 0.1e9), 3223.0, delta=1.0)
        self.assertAlmostEqual(grating_resolution(600, width, 193.4e12), 1e9, delta=1e-3)
        with self.assertRaises(ValueError):
            grating_resolution(0, 10, 193.4e12)

    def test_prism_resolution(self):
        result = prism_resolution(0.01, 1.5, 1.55, 1550e-9)
        self.assertAlmostEqual(1 / result.relative, 0.01 * 1.5 * 0.05 / 1550e-9, delta=1e-6)
        self.assertAlmostEqual(result.delta_nu_hz, 193.41e12 * result.relative, delta=1e9)
        with self.assertRaises(ValueError):
            prism_resolution(0.01, 1.5, 1.5, 1550e-9)


class EbitsTests(SimpleTestCase):

    def test_both_readings(self):
        bound = ebits_lower_bound(0.063)
        self.assertAlmostEqual(bound.formula_footnote, 2.989, delta=2e-3)
        self.assertAlmostEqual(bound.formula_e_based, 2.546, delta=2e-3)
        self.assertEqual(bound.matches_reported, 'formula_e_based')
        self.assertIsNone(bound.uncertainty)

    def test_clamped_and_propagated(self):
        bound = ebits_lower_bound(2.0, uncertainty=0.1)
        self.assertEqual((bound.formula_footnote, bound.formula_e_based), (0.0, 0.0))
        self.assertAlmostEqual(bound.uncertainty, 0.1 / (2.0 * math.log(2.0)), places=12)
        with self.assertRaises(ValueError):
            ebits_lower_bound(0.0)

    def test_reported_uncertainty_propagates(self):
        bound = ebits_lower_bound(0.063, uncertainty=0.0044)
        self.assertAlmostEqual(bound.uncertainty, 0.101, delta=1e-3)
