import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from certification.services.coarsegrain import (
    BoundKind,
    CoarseGrained2D,
    EntropyBound,
    conditional_entropy_bound,
    diff_variable_distribution,
    discretized_density,
    filter_sample,
    filter_sample_joint,
    joint_entropy_bound,
    load_coarse_grained_csv,
    marginal_entropy_bound,
    refine_convergence_report,
    save_coarse_grained_csv,
    sum_variable_distribution,
    tophat_bin,
)
from certification.services.errors import CoverageError, IncommensurateBinError, UnderResolvedError
from certification.services.filters import FilterBank, bank_weights, majorized_by_tophat
from certification.services.probcore import (
    Grid1D,
    Grid2D,
    ProbMatrix,
    conditional_entropy,
    continuous_conditional_entropy,
    continuous_entropy,
    continuous_majorizes,
)
from certification.services.spdc import gaussian_conditional_entropy


def correlated_gaussian(sigma_plus: float, sigma_minus: float, half_span: float, step: float) -> Grid2D:
    n = int(round(2 * half_span / step))
    c = -half_span + (np.arange(n) + 0.5) * step
    a, b = np.meshgrid(c, c, indexing='ij')
    values = np.exp(-0.5 * ((a + b) / sigma_plus) ** 2 - 0.5 * ((a - b) / sigma_minus) ** 2)
    return Grid2D.normalize(-half_span, step, -half_span, step, values)


def analytic_conditional_entropy(sigma_plus: float, sigma_minus: float) -> float:
    variance = sigma_plus ** 2 * sigma_minus ** 2 / (sigma_plus ** 2 + sigma_minus ** 2)
    return 0.5 * math.log2(2 * math.pi * math.e * variance)


class TopHatBinTests(SimpleTestCase):

    def test_uniform_density_bins_evenly(self):
        g = Grid1D.normalize(0.0, 0.25, np.ones(16))
        cg = tophat_bin(g, 1.0)
        np.testing.assert_allclose(cg.probs.p, [0.25] * 4)
        self.assertEqual(cg.bin_width, 1.0)

    def test_incommensurate_width_resamples_or_refuses(self):
        g = Grid1D.normalize(0.0, 1.0, np.ones(10))
        cg = tophat_bin(g, 2.5)
        np.testing.assert_allclose(cg.probs.p, [0.25] * 4)
        with self.assertRaises(IncommensurateBinError):
            tophat_bin(g, 2.5, strict=True)
        with self.assertRaises(IncommensurateBinError):
            tophat_bin(g, 0.0)

    def test_binned_density_is_majorized_by_the_original(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            g = Grid1D.normalize(0.0, 0.5, rng.random(24))
            coarse = discretized_density(tophat_bin(g, 2.0))
            self.assertTrue(continuous_majorizes(g, coarse)[0])
            self.assertGreaterEqual(continuous_entropy(coarse), continuous_entropy(g) - 1e-9)

    def test_joint_binning_preserves_mass(self):
        rho = correlated_gaussian(1.0, 4.0, 12.0, 0.25)
        cg = tophat_bin(rho, 1.0)
        self.assertEqual(cg.probs.shape, (24, 24))
        self.assertAlmostEqual(float(cg.probs.p.sum()), 1.0, places=12)


class BoundTests(SimpleTestCase):

    def test_entropy_bound_validates_w0(self):
        with self.assertRaises(ValueError):
            EntropyBound(1.0, BoundKind.CONDITIONAL, correction_w0=0.0)
        bound = EntropyBound(np.float64(1.5), 'joint', valid=np.bool_(True))
        self.assertIs(type(bound.value_bits), float)
        self.assertIs(type(bound.valid), bool)

    def test_conditional_bound_scales_with_w0(self):
        cg = CoarseGrained2D(ProbMatrix([[0.25, 0.25], [0.25, 0.25]]), 2.0, 2.0)
        full = conditional_entropy_bound(cg, majorization_ok=True)
        self.assertAlmostEqual(full.value_bits, 1.0 + 1.0, places=12)
        half = conditional_entropy_bound(cg, 0.5, majorization_ok=True)
        self.assertAlmostEqual(half.value_bits, 2.0 + 1.0, places=12)
        self.assertEqual(half.correction_w0, 0.5)
        with self.assertRaises(ValueError):
            conditional_entropy_bound(cg, 1.5, majorization_ok=True)

    def test_joint_and_marginal_bounds(self):
        cg = CoarseGrained2D(ProbMatrix([[0.5, 0.0], [0.0, 0.5]]), 0.5, 0.25)
        self.assertAlmostEqual(joint_entropy_bound(cg, majorization_ok=True).value_bits, 1.0 - 1.0 - 2.0, places=12)
        marginal = marginal_entropy_bound(cg, 'B', majorization_ok=False)
        self.assertAlmostEqual(marginal.value_bits, 1.0 - 2.0, places=12)
        self.assertFalse(marginal.valid)

    def test_conditional_bound_sits_above_the_continuous_value(self):
        rho = correlated_gaussian(1.0, 6.0, 18.0, 0.1)
        exact = continuous_conditional_entropy(rho, 'B')
        for delta in (2.0, 1.0, 0.5):
            with self.subTest(delta=delta):
                bound = conditional_entropy_bound(tophat_bin(rho, delta), majorization_ok=True)
                self.assertGreaterEqual(bound.value_bits, exact - 1e-9)


class SumDifferenceTests(SimpleTestCase):

    def test_product_uniform_sum_is_triangular(self):
        cg = CoarseGrained2D(ProbMatrix(np.full((2, 2), 0.25)), 1.0, 1.0)
        np.testing.assert_allclose(sum_variable_distribution(cg).probs.p, [0.25, 0.5, 0.25])
        np.testing.assert_allclose(diff_variable_distribution(cg).probs.p, [0.25, 0.5, 0.25])

    def test_difference_of_diagonal_is_a_point_mass(self):
        cg = CoarseGrained2D(ProbMatrix(np.eye(3) / 3), 1.0, 1.0)
        diff = diff_variable_distribution(cg)
        np.testing.assert_allclose(diff.probs.p, [0, 0, 1, 0, 0], atol=1e-15)
        self.assertIs(diff_variable_distribution(diff), diff)

    def test_unequal_widths_rejected(self):
        cg = CoarseGrained2D(ProbMatrix(np.full((2, 2), 0.25)), 1.0, 2.0)
        with self.assertRaises(IncommensurateBinError):
            sum_variable_distribution(cg)


class FilterSampleTests(SimpleTestCase):

    def test_tophat_filters_equal_exact_binning(self):
        rho  = correlated_gaussian(1.0, 4.0, 10.0, 0.05)
        bank = FilterBank.uniform('top_hat', 20, 1.0, -9.5, 1.0)
        sampled = filter_sample_joint(rho, bank, bank, workers=1)
        binned  = tophat_bin(rho, 1.0)
        np.testing.assert_allclose(sampled.probs.p, binned.probs.p, atol=1e-12)
        self.assertAlmostEqual(sampled.coverage, 1.0, places=9)

    def test_product_density_factorizes(self):
        step = 0.02
        c = -8.0 + (np.arange(800) + 0.5) * step
        ga, gb = np.exp(-0.5 * c ** 2), np.exp(-0.5 * (c / 1.5) ** 2)
        rho  = Grid2D.normalize(-8.0, step, -8.0, step, np.outer(ga, gb))
        bank = FilterBank.uniform('lorentzian', 401, 0.5, -100.0, 0.5)
        cg   = filter_sample_joint(rho, bank, bank, workers=1)
        outer = np.outer(cg.probs.p.sum(axis=1), cg.probs.p.sum(axis=0))
        np.testing.assert_allclose(cg.probs.p, outer, rtol=1e-9, atol=1e-15)

    def test_coarse_grid_is_refused(self):
        rho  = correlated_gaussian(1.0, 4.0, 10.0, 0.5)
        bank = FilterBank.uniform('lorentzian', 20, 1.0, -9.5, 1.0)
        with self.assertRaises(UnderResolvedError):
            filter_sample_joint(rho, bank, bank)

    def test_bank_not_covering_the_density_is_refused(self):
        g    = Grid1D.from_function(lambda x: np.exp(-0.5 * x * x), -6.0, 6.0, 0.01)
        bank = FilterBank.uniform('top_hat', 4, 1.0, 0.5, 1.0)
        with self.assertRaises(CoverageError):
            filter_sample(g, bank)

    def test_lorentzian_bound_is_conservative(self):
        rho   = correlated_gaussian(1.0, 4.0, 12.0, 0.025)
        exact = continuous_conditional_entropy(rho, 'B')
        bank  = FilterBank.uniform('lorentzian', 401, 0.5, -100.0, 0.5)
        cg    = filter_sample_joint(rho, bank, bank, workers=1)
        bound = conditional_entropy_bound(cg, majorization_ok=True)
        self.assertGreaterEqual(bound.value_bits, exact - 1e-6)


# Unit spacing; every nominal profile has peak below 1, so it is majorized by the top-hat.
BANK_SHAPES = {
    'lorentzian': {'width': 0.7, 'sigma_gauss': 0.0, 'reach': 80},
    'gaussian':   {'width': 0.5, 'sigma_gauss': 0.0, 'reach': 14},
    'voigt':      {'width': 0.4, 'sigma_gauss': 0.4, 'reach': 60},
}
CENTER_JITTER = 0.05
WIDTH_JITTER  = 0.02


def random_bank(rng, kind: str, jitter: bool) -> FilterBank:
    shape = BANK_SHAPES[kind]
    reach = shape['reach']
    bank  = FilterBank.uniform(
        kind, 2 * reach + 1, 1.0, -reach + rng.uniform(-0.5, 0.5), shape['width'], sigma_gauss=shape['sigma_gauss'],
    )
    if not jitter:
        return bank
    shifts = rng.uniform(-1.0, 1.0, len(bank)) * CENTER_JITTER
    scales = 1.0 + rng.uniform(-1.0, 1.0, len(bank)) * WIDTH_JITTER
    profiles = tuple(p.rescaled(s).shifted(d * p.fwhm()) for p, d, s in zip(bank.profiles, shifts, scales))
    return FilterBank(profiles, bank.nominal_spacing, bank.nominal_centers, 'jittered')


class BoundConservativenessTests(SimpleTestCase):
    """Randomized Gaussian states against the closed-form h(ω_A|ω_B)."""

    TRIALS_PER_CASE = 84

    def test_nominal_profiles_pass_the_tophat_check(self):
        rng = np.random.default_rng(0)
        for kind in BANK_SHAPES:
            with self.subTest(kind=kind):
                self.assertTrue(majorized_by_tophat(random_bank(rng, kind, False).aligned(0), 1.0).verdict)

    def test_bounds_never_undercut_the_analytic_value(self):
        rng = np.random.default_rng(2718)
        for kind in BANK_SHAPES:
            for jitter in (False, True):
                for trial in range(self.TRIALS_PER_CASE):
                    sigma_plus  = float(rng.uniform(0.3, 1.0))
                    sigma_minus = float(rng.uniform(1.0, 3.0))
                    bank_a = random_bank(rng, kind, jitter)
                    bank_b = random_bank(rng, kind, jitter)
                    with self.subTest(kind=kind, jitter=jitter, trial=trial):
                        self.check_trial(sigma_plus, sigma_minus, bank_a, bank_b, jitter)

    def check_trial(self, sigma_plus, sigma_minus, bank_a, bank_b, jitter):
        exact = gaussian_conditional_entropy(sigma_plus, sigma_minus)
        rho   = correlated_gaussian(sigma_plus, sigma_minus, 8.0, 0.03)
        cg    = filter_sample_joint(rho, bank_a, bank_b)
        w0    = (
            bank_weights(bank_a, search_window=3.0, points=2001).w0
            * bank_weights(bank_b, search_window=3.0, points=2001).w0
        )
        plain     = conditional_entropy_bound(cg, majorization_ok=True)
        corrected = conditional_entropy_bound(cg, w0, majorization_ok=True)

        self.assertAlmostEqual(corrected.value_bits, conditional_entropy(cg.probs, 'B') / w0, places=9)
        self.assertGreaterEqual(corrected.value_bits, exact - 1e-4)
        if jitter:
            self.assertLess(w0, 1.0)
            self.assertGreaterEqual(corrected.value_bits, plain.value_bits)
        else:
            self.assertAlmostEqual(w0, 1.0, places=12)
            self.assertAlmostEqual(corrected.value_bits, plain.value_bits, places=12)
            self.assertGreaterEqual(plain.value_bits, exact - 1e-4)


class ConvergenceTests(SimpleTestCase):

    def test_bounds_decrease_towards_the_analytic_value(self):
        sigma_plus, sigma_minus = 1.0, 8.0
        rho = correlated_gaussian(sigma_plus, sigma_minus, 32.0, 0.0625)
        analytic = analytic_conditional_entropy(sigma_plus, sigma_minus)
        spacings = [4.0, 2.0, 1.0, 0.5, 0.25]
        families = []
        for d in spacings:
            count = int(round(64.0 / d))
            bank = FilterBank.uniform('top_hat', count, d, -32.0 + d / 2, d)
            families.append((bank, bank))
        report = refine_convergence_report(rho, families, reference_bits=analytic)
        bounds = [entry.bound_bits for entry in report]
        for coarse, fine in zip(bounds, bounds[1:]):
            self.assertGreaterEqual(coarse, fine - 1e-9)
        self.assertTrue(all(entry.passes for entry in report))
        self.assertLess(report[-1].reference_gap_bits, 0.1)
        self.assertGreaterEqual(report[-1].reference_gap_bits, -1e-3)
        self.assertIsNone(report[0].change_bits)

    def test_needs_three_resolutions(self):
        rho  = correlated_gaussian(1.0, 4.0, 8.0, 0.25)
        bank = FilterBank.uniform('top_hat', 16, 1.0, -7.5, 1.0)
        with self.assertRaises(ValueError):
            refine_convergence_report(rho, [(bank, bank), (bank, bank)])


class CoarseGrainedCsvTests(SimpleTestCase):

    def test_round_trip_keeps_widths(self):
        cg = CoarseGrained2D(ProbMatrix([[0.1, 0.2], [0.3, 0.4]]), 1.5, 2.5, 10.0, 20.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_coarse_grained_csv(cg, Path(tmp) / 'cg.csv', digest='d1')
            self.assertTrue(path.read_text().startswith('# manifest d1\n'))
            loaded = load_coarse_grained_csv(path)
        np.testing.assert_allclose(loaded.probs.p, cg.probs.p)
        self.assertEqual((loaded.bin_width_a, loaded.bin_width_b), (1.5, 2.5))
        self.assertEqual((loaded.origin_a, loaded.origin_b), (10.0, 20.0))
