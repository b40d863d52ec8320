import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from certification.models import CheckResult, RunManifest, WitnessRecord
from certification.services.filters import FilterBank, save_bank_manifest

SPACING = 2 * math.pi * 100e6

CAMPAIGN = {
    'source':    {'pump_wavelength_nm': 775, 'pump_sigma_mhz': 100, 'phasematch_sigma_thz': 1},
    'detectors': {'timing_fwhm_ps': 424, 'timebin_ps': 1},
    'window':    {'span_a_ghz': 4, 'step_mhz': 4},
    'banks':     {'kind': 'lorentzian', 'spacing_mhz': 100, 'width_mhz': 100, 'extension': 3},
    'campaign':  {'total_pairs': 10_000_000, 'seed': 2024},
}


class CommandTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_config(self, name: str = 'run.json', **campaign) -> str:
        data = {**CAMPAIGN, 'campaign': {**CAMPAIGN['campaign'], **campaign}}
        path = self.dir / name
        path.write_text(json.dumps(data))
        return str(path)

    def call(self, name: str, *args, **options) -> str:
        out = StringIO()
        call_command(name, *args, stdout=out, **options)
        return out.getvalue()

    def exit_code(self, name: str, *args, **options) -> int:
        with self.assertRaises(SystemExit) as ctx:
            self.call(name, *args, **options)
        return ctx.exception.code


class BudgetCommandTests(CommandTestCase):

    def test_budget_from_fwhm(self):
        out_dir = self.dir / 'budget'
        printed = self.call('budget', fwhm_ps=424.0, out=str(out_dir))
        self.assertIn('max Gaussian sigma', printed)
        frame = pd.read_csv(out_dir / 'budget.csv', comment='#')
        values = {(q, u): v for q, v, u in frame.itertuples(index=False)}
        self.assertAlmostEqual(values[('time entropy bound', 'bits')], -30.324, delta=0.01)
        self.assertAlmostEqual(values[('max sum-frequency entropy', 'bits')], 33.42, delta=0.02)
        self.assertAlmostEqual(values[('max Gaussian sigma', 'MHz')], 442.0, delta=5.0)
        self.assertAlmostEqual(values[('max Lorentzian FWHM', 'GHz')], 0.29, delta=0.01)
        manifest = json.loads((out_dir / 'manifest.json').read_text())
        self.assertEqual(manifest['subcommand'], 'budget')
        self.assertTrue((out_dir / 'budget.csv').read_text().startswith(f"# manifest {manifest['manifest_digest']}"))

    def test_budget_from_bits(self):
        printed = self.call('budget', h_time_bits=-30.324)
        self.assertIn('given', printed)

    def test_bad_fwhm_is_an_input_error(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('budget', fwhm_ps=-1.0)
        self.assertEqual(ctx.exception.returncode, 3)


class FiltersCheckCommandTests(CommandTestCase):

    def bank_file(self, width: float) -> str:
        bank = FilterBank.uniform('lorentzian', 5, SPACING, 0.0, width)
        return str(save_bank_manifest(bank, self.dir / 'bank.json'))

    def test_spacing_wide_lorentzians_pass(self):
        out_dir = self.dir / 'check'
        self.assertEqual(self.exit_code('filters_check', self.bank_file(SPACING), out=str(out_dir)), 0)
        report = json.loads((out_dir / 'filters_check.json').read_text())
        self.assertTrue(report['all_pass'])
        self.assertAlmostEqual(report['w0'], 1.0, places=9)
        self.assertTrue((out_dir / 'dominance_curves.csv').is_file())
        self.assertEqual(RunManifest.objects.get().subcommand, 'filters_check')

    def test_half_width_lorentzians_fail(self):
        out_dir = self.dir / 'check'
        self.assertEqual(self.exit_code('filters_check', self.bank_file(0.5 * SPACING), out=str(out_dir)), 2)
        self.assertFalse(json.loads((out_dir / 'filters_check.json').read_text())['all_pass'])
        self.assertTrue(CheckResult.objects.filter(passed=False).exists())

    def test_missing_bank_is_an_input_error(self):
        with self.assertRaises(CommandError):
            self.call('filters_check', str(self.dir / 'absent.json'), out=str(self.dir / 'check'))


class SimulateCommandTests(CommandTestCase):

    def test_zero_pairs_rejected(self):
        with self.assertRaises(CommandError):
            self.call('simulate', config=self.write_config(total_pairs=0), out=str(self.dir / 'sim'))

    def test_config_is_required(self):
        with self.assertRaises(CommandError):
            self.call('simulate', out=str(self.dir / 'sim'))

    def test_fixed_seed_reproduces_the_files(self):
        config = self.write_config()
        self.call('simulate', config=config, seed=99, out=str(self.dir / 'first'))
        self.call('simulate', config=config, seed=99, out=str(self.dir / 'second'))
        for name in ('counts.csv', 'histogram.csv', 'bank_a.json'):
            with self.subTest(name=name):
                self.assertEqual(
                    (self.dir / 'first' / name).read_bytes(),
                    (self.dir / 'second' / name).read_bytes(),
                )
        campaign = json.loads((self.dir / 'first' / 'campaign.json').read_text())
        self.assertEqual(campaign['seed'], 99)
        self.assertEqual(campaign['total_pairs'], 10_000_000)


class CertifyCommandTests(CommandTestCase):

    def test_simulated_spdc_campaign_is_certified(self):
        config = self.write_config()
        self.call('simulate', config=config, out=str(self.dir / 'sim'))

        quick = self.dir / 'quick'
        self.assertEqual(self.exit_code('certify', campaign=str(self.dir / 'sim'), resamples=0, out=str(quick)), 0)
        report = json.loads((quick / 'report.json').read_text())
        self.assertTrue(report['certified'])
        self.assertEqual(report['exit_code'], 0)
        self.assertAlmostEqual(report['time_bound']['value_bits'], -30.324, delta=0.02)
        self.assertGreater(report['witness']['margin'], 0.5)
        self.assertIsNone(report['bootstrap'])
        self.assertTrue((quick / 'summary.txt').is_file())

        full = self.dir / 'full'
        code = self.exit_code('certify', campaign=str(self.dir / 'sim'), config=config, resamples=100, out=str(full))
        report = json.loads((full / 'report.json').read_text())
        self.assertEqual(code, 0)
        self.assertEqual(report['certified'], code == 0)
        self.assertEqual(report['bootstrap']['n_resamples'], 100)
        self.assertGreater(report['bootstrap']['ci_low'], 0.0)
        record = WitnessRecord.objects.filter(ci_low__isnull=False).get()
        self.assertTrue(record.certified)

    def test_product_state_control_is_not_certified(self):
        config = self.write_config(product_state=True)
        self.call('simulate', config=config, out=str(self.dir / 'sim'))
        code = self.exit_code('certify', campaign=str(self.dir / 'sim'), resamples=0, out=str(self.dir / 'cert'))
        report = json.loads((self.dir / 'cert' / 'report.json').read_text())
        self.assertEqual(code, 1)
        self.assertFalse(report['certified'])
        self.assertLess(report['witness']['margin'], 0.0)
        self.assertTrue(report['witness']['preconditions_met'])

    def test_product_state_control_fails_for_every_seed(self):
        for seed in range(50):
            with self.subTest(seed=seed):
                run = self.dir / f'seed{seed}'
                config = self.write_config(f'run{seed}.json', product_state=True, seed=seed)
                self.call('simulate', config=config, out=str(run / 'sim'))
                code = self.exit_code(
                    'certify', campaign=str(run / 'sim'), resamples=100, seed=seed, out=str(run / 'cert'),
                )
                report = json.loads((run / 'cert' / 'report.json').read_text())
                self.assertEqual(code, 1)
                self.assertFalse(report['certified'])
                self.assertLessEqual(report['bootstrap']['ci_low'], 0.0)
        self.assertFalse(WitnessRecord.objects.filter(certified=True).exists())

    def test_missing_inputs_are_input_errors(self):
        with self.assertRaises(CommandError):
            self.call('certify', resamples=0, out=str(self.dir / 'cert'))
        with self.assertRaises(CommandError):
            self.call('certify', campaign=str(self.dir / 'nowhere'), resamples=0, out=str(self.dir / 'cert'))

    def test_too_few_resamples(self):
        with self.assertRaises(CommandError) as ctx:
            self.call('certify', campaign=str(self.dir), resamples=10, out=str(self.dir / 'cert'))
        self.assertEqual(ctx.exception.returncode, 3)
