"""
budget
======
Django Management Command: how narrow the sum-frequency spectrum must be
for the conditional witness to succeed, given the timing entropy.

Usage:
    python manage.py budget --fwhm-ps 424
    python manage.py budget --fwhm-ps 424 --timebin-ps 1 --wavelength-nm 1550
    python manage.py budget --timing hist.csv --out runs/budget
    python manage.py budget --h-time-bits -30.324

Prints bits / MHz / pm / GHz columns; with --out also writes budget.csv.
"""
import sys
import logging
import math

import pandas as pd
from django.core.management.base import BaseCommand

from certification.services.acquisition       import (
    PICOSECOND, CoincidenceHistogram, load_histogram, subtract_background, timing_entropy_bound,
)
from certification.services.config_service    import load_run_config
from certification.services.csv_service       import write_table
from certification.services.errors            import EntroCertError
from certification.services.manifest_service  import build_manifest, write_manifest
from certification.services.spdc              import (
    FWHM_PER_SIGMA, TimingModel, linewidth_hz_to_pm, timing_difference_density,
)
from certification.services.witness           import THRESHOLDS, Inequality, frequency_budget

from ._common import box, input_error, resolve_out_dir

# ─── Logging setup ────────────────────────────────────────────────────────────
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s  %(levelname)-8s  %(name)s  %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class Command(BaseCommand):
    help = 'Frequency-entropy budget of the conditional witness for a given timing entropy.'

    # ─────────────────────────────────────────────────────────────────────────
    # CLI arguments
    # ─────────────────────────────────────────────────────────────────────────

    def add_arguments(self, parser):
        source = parser.add_mutually_exclusive_group(required=True)
        source.add_argument('--fwhm-ps', dest='fwhm_ps', type=float, help='Gaussian t_A − t_B FWHM in ps.')
        source.add_argument('--timing', help='Measured timing histogram CSV (background is subtracted).')
        source.add_argument('--h-time-bits', dest='h_time_bits', type=float, help='Timing entropy bound in bits.')
        parser.add_argument('--timebin-ps', dest='timebin_ps', type=float, default=1.0, help='Histogram bin for --fwhm-ps.')
        parser.add_argument('--wavelength-nm', dest='wavelength_nm', type=float, default=None,
                            help='Center wavelength. Default: analysis.center_wavelength, else 1550 nm.')
        parser.add_argument('--config', default=None, help='Run configuration JSON.')
        parser.add_argument('--out', default=None, help='Directory for budget.csv and manifest.json.')

    # ─────────────────────────────────────────────────────────────────────────
    # Entry point
    # ─────────────────────────────────────────────────────────────────────────

    def handle(self, *args, **options):
        try:
            config     = load_run_config(options['config'])
            wavelength = config.center_wavelength if options['wavelength_nm'] is None else options['wavelength_nm'] * 1e-9
            if not wavelength > 0:
                raise input_error(f"wavelength must be positive, got {wavelength!r}")
            h_time, origin = self._time_bound(options, config)
            budget = frequency_budget(h_time, wavelength)
        except (EntroCertError, ValueError) as exc:
            raise input_error(exc)

        fwhm_gauss = FWHM_PER_SIGMA * budget.max_sigma
        rows = [
            ('time entropy bound',           h_time,                                 'bits'),
            ('witness threshold',            THRESHOLDS[Inequality.CONDITIONAL],     'bits'),
            ('max sum-frequency entropy',    budget.max_h_freq,                      'bits'),
            ('max Gaussian sigma',           budget.max_sigma / TWO_PI / 1e6,        'MHz'),
            ('max Gaussian FWHM',            fwhm_gauss / TWO_PI / 1e6,              'MHz'),
            ('max Gaussian FWHM',            budget.max_fwhm_gauss_pm,               'pm'),
            ('max Lorentzian FWHM',          budget.max_fwhm_lorentz / TWO_PI / 1e9, 'GHz'),
            ('max Lorentzian FWHM',          linewidth_hz_to_pm(budget.max_fwhm_lorentz / TWO_PI, wavelength), 'pm'),
        ]

        self.stdout.write(self.style.SUCCESS(box('📐  Frequency Budget (conditional witness)', [
            ('Timing input', origin),
            ('Wavelength',   f"{wavelength / 1e-9:.6g} nm"),
        ])))
        for label, value, unit in rows:
            self.stdout.write(f"  {label:<28} {value:>14.6g}  {unit}")

        if options['out']:
            out_dir  = resolve_out_dir(options['out'], 'budget')
            manifest = build_manifest(
                'budget', {'timing': options['timing'], 'config': options['config']},
                {'run_config': config.snapshot, 'options': {
                    'fwhm_ps': options['fwhm_ps'], 'h_time_bits': options['h_time_bits'],
                    'timebin_ps': options['timebin_ps'], 'wavelength_m': wavelength,
                }},
            )
            write_manifest(manifest, out_dir)
            frame = pd.DataFrame(rows, columns=('quantity', 'value', 'unit'))
            write_table(out_dir / 'budget.csv', frame, manifest.digest)

    # ─────────────────────────────────────────────────────────────────────────
    # Private helpers
    # ─────────────────────────────────────────────────────────────────────────

    @staticmethod
    def _time_bound(options, config) -> tuple[float, str]:
        if options['h_time_bits'] is not None:
            return options['h_time_bits'], f"{options['h_time_bits']:+.4f} bits (given)"
        if options['timing'] is not None:
            histogram = subtract_background(load_histogram(options['timing']), config.wing_fraction)
            return timing_entropy_bound(histogram).value_bits, options['timing']
        fwhm, timebin = options['fwhm_ps'] * PICOSECOND, options['timebin_ps'] * PICOSECOND
        if not (fwhm > 0 and timebin > 0):
            raise input_error("--fwhm-ps and --timebin-ps must be positive")
        model     = TimingModel(0.0, fwhm / FWHM_PER_SIGMA, fwhm)
        histogram = CoincidenceHistogram.expected(timing_difference_density(model, timebin), 1.0)
        return timing_entropy_bound(histogram).value_bits, f"Gaussian FWHM {options['fwhm_ps']:g} ps in {options['timebin_ps']:g} ps bins"
