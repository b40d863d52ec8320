"""
filters_check
=============
Django Management Command: check a filter bank against the top-hat of its
spacing and compute the drift weights.

Usage:
    python manage.py filters_check bank.json
    python manage.py filters_check bank.json --spacing-mhz 100 --out runs/filters

Writes filters_check.json, filter_checks.csv, profiles.csv and
dominance_curves.csv (plot-ready series). Exit codes:
    0 every check passed · 2 a check failed · 3 input error
"""
import sys
import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd
from django.core.management.base import BaseCommand

from certification.services.config_service    import load_run_config
from certification.services.csv_service       import write_table
from certification.services.database_service  import DatabaseService
from certification.services.errors            import DegenerateRatioError, EntroCertError
from certification.services.filters           import (
    FilterBank, bank_weights, check_bank, load_bank_manifest, majorized_by_tophat,
    profile_dominance_curve, tophat_dominance_curve,
)
from certification.services.manifest_service  import build_manifest, write_json, write_manifest

from ._common import (
    EXIT_CERTIFIED, EXIT_PRECONDITIONS,
    add_common_arguments, box, input_error, resolve_out_dir,
)

# ─── Logging setup ────────────────────────────────────────────────────────────
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s  %(levelname)-8s  %(name)s  %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)

PROFILE_REACH     = 4.0     # spacings either side of each nominal center
PROFILE_POINTS    = 401
CURVE_REACH       = 4.0     # spacings of measure
CURVE_POINTS      = 201
TOPHAT_INDEX      = -1
MEAN_FILTER_INDEX = -2


class Command(BaseCommand):
    help = 'Check a filter bank against the top-hat of its spacing and compute drift weights w_n and w0.'

    # ─────────────────────────────────────────────────────────────────────────
    # CLI arguments
    # ─────────────────────────────────────────────────────────────────────────

    def add_arguments(self, parser):
        parser.add_argument('bank', help='Bank manifest JSON.')
        add_common_arguments(parser)
        spacing = parser.add_mutually_exclusive_group()
        spacing.add_argument(
            '--spacing-rad-per-s', dest='spacing_rad_per_s', type=float, default=None,
            help='Override the nominal spacing Δω (rad/s).',
        )
        spacing.add_argument(
            '--spacing-mhz', dest='spacing_mhz', type=float, default=None,
            help='Override the nominal spacing as an ordinary frequency in MHz (Δω = 2π·value).',
        )
        parser.add_argument('--arm', choices=('A', 'B'), default='A', help='Arm label for the ledger.')

    # ─────────────────────────────────────────────────────────────────────────
    # Entry point
    # ─────────────────────────────────────────────────────────────────────────

    def handle(self, *args, **options):
        try:
            config = load_run_config(options['config'])
            bank   = load_bank_manifest(options['bank'], clip_fraction=config.clip_fraction)
            bank   = self._with_spacing(bank, options)
        except EntroCertError as exc:
            raise input_error(exc)

        out_dir  = resolve_out_dir(options['out'], 'filters_check')
        arm      = options['arm']
        manifest = build_manifest(
            'filters_check',
            {'bank': options['bank'], 'config': options['config']},
            {'run_config': config.snapshot, 'options': {'spacing_rad_per_s': bank.nominal_spacing, 'arm': arm}},
        )
        write_manifest(manifest, out_dir)
        db = DatabaseService()
        db.save_manifest(manifest, str(out_dir))

        self.stdout.write(self.style.SUCCESS(box('🔎  Filter Bank Check', [
            ('Bank',    f"{options['bank']} ({len(bank)} filters, origin {bank.origin})"),
            ('Spacing', f"{bank.nominal_spacing:.6g} rad/s = 2π·{bank.nominal_spacing / (2 * math.pi) / 1e6:.6g} MHz"),
            ('Output',  str(out_dir)),
        ])))

        # ── 1. Per-filter top-hat checks ──────────────────────────────────────
        checks  = check_bank(bank)
        passing = sum(1 for c in checks if c.verdict)
        worst   = min(range(len(bank)), key=lambda n: checks[n].margin)
        db.save_result(
            check_name=f'Filter Top-Hat Majorization (arm {arm})',
            subject=f"{len(bank)} filters, spacing {bank.nominal_spacing:.6g} rad/s",
            passed=passing == len(bank),
            should_be='every filter to be majorized by the top-hat of the bank spacing',
            found=f"{passing}/{len(bank)} pass, worst margin {checks[worst].margin:.6g} at filter {worst}",
        )

        # ── 2. Drift weights ──────────────────────────────────────────────────
        try:
            weights = bank_weights(bank, arm=arm, **config.weight_options())
        except DegenerateRatioError as exc:
            db.save_result(
                check_name='Filter Drift Weights',
                subject=f"arm {arm} filter {exc.filter_index}",
                passed=False,
                should_be=f"every w_n to stay above the floor {config.weight_floor:g}",
                found=str(exc),
            )
            db.save_filter_weights(arm, bank.centers, checks)
            self.stdout.write(self.style.ERROR(f'\n❌  {exc}'))
            sys.exit(EXIT_PRECONDITIONS)

        db.save_filter_weights(arm, bank.centers, checks, weights.per_filter_w)
        mean_check = majorized_by_tophat(weights.target_profile, bank.nominal_spacing)
        db.save_result(
            check_name='Mean Filter Top-Hat Majorization',
            subject=f"w0 = {weights.w0:.6f} at filter {weights.argmin}",
            passed=mean_check.verdict,
            should_be='the mean filter to be majorized by the top-hat of the bank spacing',
            found=f"margin {mean_check.margin:.6g}",
        )

        # ── 3. Reports and plot series ────────────────────────────────────────
        all_pass = passing == len(bank) and mean_check.verdict
        self._write_reports(out_dir, manifest.digest, bank, checks, weights, mean_check, all_pass)

        code = EXIT_CERTIFIED if all_pass else EXIT_PRECONDITIONS
        self.stdout.write((self.style.SUCCESS if all_pass else self.style.WARNING)(box(
            f"{'✅  ALL FILTERS PASS' if all_pass else '❌  TOP-HAT CHECK FAILED'}",
            [
                ('Filters passing', f"{passing}/{len(bank)}"),
                ('Worst margin',    f"{checks[worst].margin:.6g} (filter {worst})"),
                ('Mean filter',     f"{'pass' if mean_check.verdict else 'fail'}, margin {mean_check.margin:.6g}"),
                ('w0',              f"{weights.w0:.6f} (minimizing filter {weights.argmin})"),
                ('Exit code',       str(code)),
            ],
        )))
        sys.exit(code)

    # ─────────────────────────────────────────────────────────────────────────
    # Private helpers
    # ─────────────────────────────────────────────────────────────────────────

    @staticmethod
    def _with_spacing(bank: FilterBank, options) -> FilterBank:
        if options['spacing_rad_per_s'] is not None:
            spacing = options['spacing_rad_per_s']
        elif options['spacing_mhz'] is not None:
            spacing = 2.0 * math.pi * 1e6 * options['spacing_mhz']
        else:
            return bank
        if not spacing > 0:
            raise input_error(f"spacing must be positive, got {spacing!r}")
        return replace(bank, nominal_spacing=float(spacing))

    def _write_reports(self, out_dir, digest, bank, checks, weights, mean_check, all_pass):
        spacing = bank.nominal_spacing
        rows = [
            {
                'filter_index':             n,
                'nominal_center_rad_per_s': float(bank.nominal_centers[n]),
                'center_rad_per_s':         float(bank.centers[n]),
                'fwhm_rad_per_s':           float(p.fwhm()),
                'peak_margin':              checks[n].margin,
                'passes':                   int(checks[n].verdict),
                'weight':                   float(weights.per_filter_w[n]),
            }
            for n, p in enumerate(bank.profiles)
        ]
        write_table(out_dir / 'filter_checks.csv', pd.DataFrame(rows), digest)
        write_json(out_dir / 'filters_check.json', {
            'spacing_rad_per_s': spacing,
            'origin':            bank.origin,
            'all_pass':          all_pass,
            'w0':                weights.w0,
            'argmin':            weights.argmin,
            'mean_filter':       {'passes': mean_check.verdict, 'margin': mean_check.margin},
            'filters':           [{**row, 'passes': bool(row['passes'])} for row in rows],
        }, digest)

        # Profiles on a common offset axis, relative to each nominal center.
        offsets  = np.linspace(-PROFILE_REACH * spacing, PROFILE_REACH * spacing, PROFILE_POINTS)
        series   = [(TOPHAT_INDEX, np.where(np.abs(offsets) <= spacing / 2.0, 1.0 / spacing, 0.0)),
                    (MEAN_FILTER_INDEX, weights.target_profile.evaluate(offsets))]
        series  += [(n, p.evaluate(offsets + bank.nominal_centers[n])) for n, p in enumerate(bank.profiles)]
        write_table(out_dir / 'profiles.csv', pd.DataFrame({
            'filter_index':           np.repeat([i for i, _ in series], offsets.size),
            'offset_rad_per_s':       np.tile(offsets, len(series)),
            'transmission_per_rad_s': np.concatenate([v for _, v in series]),
        }), digest)

        # Dominance curves resampled on a common measure axis.
        measure = np.linspace(0.0, CURVE_REACH * spacing, CURVE_POINTS)
        curves  = [(TOPHAT_INDEX, tophat_dominance_curve(spacing, measure).mass)]
        for index, profile in [(MEAN_FILTER_INDEX, weights.target_profile), *enumerate(bank.profiles)]:
            curve = profile_dominance_curve(profile)
            curves.append((index, np.interp(measure, curve.measure, curve.mass, right=curve.mass[-1])))
        write_table(out_dir / 'dominance_curves.csv', pd.DataFrame({
            'filter_index':      np.repeat([i for i, _ in curves], measure.size),
            'measure_rad_per_s': np.tile(measure, len(curves)),
            'mass':              np.concatenate([m for _, m in curves]),
        }), digest)
