"""
simulate
========
Django Management Command: draw a seeded measurement campaign from a model
SPDC state: joint filter-pair counts, a coincidence timing histogram and the
jitter-realized bank manifests.

Usage:
    python manage.py simulate --config campaign.json
    python manage.py simulate --config campaign.json --seed 7 --out runs/simulate

Writes counts.csv, histogram.csv, bank_a.json, bank_b.json, campaign.json and
manifest.json. The directory feeds `certify --campaign` as is.
"""
import sys
import logging
import math

import numpy as np
from django.core.management.base import BaseCommand

from certification.services.acquisition       import (
    CoincidenceHistogram, JointCounts, save_histogram, save_joint_counts, simulate_campaign,
)
from certification.services.config_service    import load_run_config
from certification.services.database_service  import DatabaseService
from certification.services.errors            import EntroCertError
from certification.services.filters           import save_bank_manifest
from certification.services.manifest_service  import build_manifest, write_json, write_manifest
from certification.services.spdc              import joint_spectral_density
from certification.steps.step01_inputs        import CAMPAIGN_FILES

from ._common import add_common_arguments, box, input_error, resolve_out_dir

# ─── Logging setup ────────────────────────────────────────────────────────────
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s  %(levelname)-8s  %(name)s  %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Simulate a seeded coincidence campaign for certify (counts, histogram, realized banks).'

    # ─────────────────────────────────────────────────────────────────────────
    # CLI arguments
    # ─────────────────────────────────────────────────────────────────────────

    def add_arguments(self, parser):
        add_common_arguments(parser)
        parser.add_argument('--seed', type=int, default=None, help='Overrides campaign.seed (unsigned 64-bit).')

    # ─────────────────────────────────────────────────────────────────────────
    # Entry point
    # ─────────────────────────────────────────────────────────────────────────

    def handle(self, *args, **options):
        if not options['config']:
            raise input_error("--config is required")
        seed = options['seed']
        if seed is not None and not 0 <= seed < 2 ** 64:
            raise input_error(f"--seed must be an unsigned 64-bit integer, got {seed}")

        try:
            config         = load_run_config(options['config'])
            params         = config.spdc_params()
            window         = config.spectral_window(params)
            timing         = config.timing_model(params)
            bank_a, bank_b = config.filter_banks(window)
            campaign       = config.campaign_config(bank_a, bank_b, timing, seed=seed)
        except (EntroCertError, ValueError) as exc:
            raise input_error(exc)

        out_dir = resolve_out_dir(options['out'], 'simulate')
        self.stdout.write(self.style.SUCCESS(box('🎲  Campaign Simulation', [
            ('Pairs',         f"{int(campaign.total_pairs):,}"),
            ('Seed',          str(campaign.rng_seed)),
            ('Banks',         f"{len(bank_a)} x {len(bank_b)} filters, spacing 2π·{bank_a.nominal_spacing / (2 * math.pi) / 1e6:.6g} MHz"),
            ('State',         'product of marginals' if config.product_state else 'SPDC'),
            ('Output',        str(out_dir)),
        ])))
        for warning in params.warnings():
            logger.warning(warning)

        try:
            rho = joint_spectral_density(params, window)
            if config.product_state:
                rho = rho.product_of_marginals()
            result = simulate_campaign(rho, campaign)
        except EntroCertError as exc:
            raise input_error(exc)

        # Count files hold integers; the noiseless expectation is rounded.
        counts = result.counts
        if campaign.noiseless:
            counts = JointCounts(np.rint(counts.counts).astype(np.int64))
        histogram = result.histogram
        if campaign.noiseless:
            histogram = CoincidenceHistogram(
                histogram.bin_width, histogram.t0, np.rint(histogram.counts).astype(np.int64),
                0.0, (*histogram.provenance, 'rounded'),
            )

        manifest = build_manifest(
            'simulate', {'config': options['config']},
            {'run_config': config.snapshot, 'options': {'seed': campaign.rng_seed}},
        )
        write_manifest(manifest, out_dir)
        save_joint_counts(counts, out_dir / CAMPAIGN_FILES['counts'], manifest.digest)
        save_histogram(histogram, out_dir / CAMPAIGN_FILES['timing'], manifest.digest)
        save_bank_manifest(result.bank_a, out_dir / CAMPAIGN_FILES['bank_a'], manifest.digest)
        save_bank_manifest(result.bank_b, out_dir / CAMPAIGN_FILES['bank_b'], manifest.digest)
        write_json(out_dir / 'campaign.json', {
            'rng_algorithm':  result.rng_algorithm,
            'seed':           campaign.rng_seed,
            'total_pairs':    int(campaign.total_pairs),
            'observed_pairs': int(counts.total),
            'histogram_pairs': float(histogram.total),
            'noiseless':      campaign.noiseless,
            'product_state':  config.product_state,
            'coverage':       result.coarse.coverage,
            'warnings':       [*params.warnings(), *result.warnings],
        }, manifest.digest)

        db = DatabaseService()
        db.save_manifest(manifest, str(out_dir))
        db.save_result(
            check_name='Campaign Simulation',
            subject=f"seed {campaign.rng_seed}",
            passed=not result.warnings,
            should_be=f"the banks to cover the density with {int(campaign.total_pairs):,} pairs drawn",
            found=f"coverage {result.coarse.coverage:.6f}, {int(counts.total):,} pairs in the count table",
        )

        self.stdout.write(self.style.SUCCESS(box('✅  CAMPAIGN WRITTEN', [
            ('Count table',   f"{counts.shape[0]} x {counts.shape[1]}, {int(counts.total):,} pairs"),
            ('Histogram',     f"{len(histogram.counts)} bins of {histogram.bin_width / 1e-12:g} ps"),
            ('Coverage',      f"{result.coarse.coverage:.6f}"),
            ('Manifest',      manifest.digest[:12]),
        ])))
