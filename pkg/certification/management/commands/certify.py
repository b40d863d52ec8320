"""
certify
=======
Django Management Command: certify energy-time entanglement from a timing
histogram, a joint filter-pair count table and the two filter-bank manifests.

Usage:
    python manage.py certify --campaign runs/simulate
    python manage.py certify --timing hist.csv --counts counts.csv \\
                             --bank-a bank_a.json --bank-b bank_b.json \\
                             --config run.json --inequality conditional --out runs/certify

Writes report.json, summary.txt, coarse_grained.csv and manifest.json, and
records every check in the run ledger. Exit codes:
    0 certified · 1 not certified · 2 preconditions failed · 3 input error
"""
import sys
import logging
from pathlib import Path

from django.core.management.base import BaseCommand

from certification.services.acquisition       import MIN_RESAMPLES
from certification.services.config_service    import load_run_config
from certification.services.database_service  import DatabaseService
from certification.services.errors            import DegenerateRatioError, EntroCertError
from certification.services.manifest_service  import write_json
from certification.services.witness           import Inequality
from certification.steps.step01_inputs        import Step01Inputs
from certification.steps.step02_filters       import Step02Filters
from certification.steps.step03_frequency     import Step03Frequency
from certification.steps.step04_timing        import Step04Timing
from certification.steps.step05_witness       import Step05Witness
from certification.steps.step06_uncertainty   import Step06Uncertainty

from ._common import (
    EXIT_CERTIFIED, EXIT_NOT_CERTIFIED, EXIT_PRECONDITIONS,
    add_common_arguments, box, input_error, resolve_out_dir,
)

# ─── Logging setup ────────────────────────────────────────────────────────────
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s  %(levelname)-8s  %(name)s  %(message)s',
    handlers=[logging.StreamHandler(sys.stdout)],
)
logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = (
        'Certify energy-time entanglement from coincidence data: top-hat majorization '
        'checks, drift-corrected entropy bounds, witness verdict and bootstrap interval.'
    )

    # ─────────────────────────────────────────────────────────────────────────
    # CLI arguments
    # ─────────────────────────────────────────────────────────────────────────

    def add_arguments(self, parser):
        add_common_arguments(parser)
        parser.add_argument('--campaign', default=None, help='Directory written by the simulate command.')
        parser.add_argument('--timing',   default=None, help='Timing histogram CSV (bin_start_ps,counts).')
        parser.add_argument('--counts',   default=None, help='Joint count CSV (m_index,n_index,counts).')
        parser.add_argument('--bank-a',   dest='bank_a', default=None, help='Bank manifest JSON of arm A.')
        parser.add_argument('--bank-b',   dest='bank_b', default=None, help='Bank manifest JSON of arm B.')
        parser.add_argument(
            '--inequality',
            choices=('sum-diff', 'conditional'),
            default=None,
            help='Witness form. Default: analysis.inequality of the config, else conditional.',
        )
        parser.add_argument(
            '--resamples',
            type=int,
            default=None,
            help=f'Bootstrap resamples (0 skips the bootstrap, otherwise >= {MIN_RESAMPLES}).',
        )
        parser.add_argument('--seed', type=int, default=0, help='Bootstrap seed (unsigned 64-bit).')

    # ─────────────────────────────────────────────────────────────────────────
    # Entry point
    # ─────────────────────────────────────────────────────────────────────────

    def handle(self, *args, **options):
        try:
            config     = load_run_config(options['config'])
            inequality = Inequality((options['inequality'] or config.inequality).replace('-', '_'))
        except (EntroCertError, ValueError) as exc:
            raise input_error(exc)

        resamples = config.resamples if options['resamples'] is None else options['resamples']
        seed      = options['seed']
        if resamples != 0 and resamples < MIN_RESAMPLES:
            raise input_error(f"--resamples must be 0 or at least {MIN_RESAMPLES}, got {resamples}")
        if not 0 <= seed < 2 ** 64:
            raise input_error(f"--seed must be an unsigned 64-bit integer, got {seed}")

        out_dir = resolve_out_dir(options['out'], 'certify')
        run_options = {
            'inequality':    inequality.value,
            'resamples':     resamples,
            'seed':          seed,
            'wing_fraction': config.wing_fraction,
        }

        self.stdout.write(self.style.SUCCESS(box('🔬  Energy-Time Entanglement Certification', [
            ('Inequality', inequality.value),
            ('Resamples',  str(resamples) if resamples else 'skipped'),
            ('Output',     str(out_dir)),
        ])))

        db = DatabaseService()
        db.save_result(
            check_name='Certification Session Start',
            subject=str(out_dir),
            passed=True,
            should_be='inputs to be resolved and the pipeline to start',
            found=f"Session started — {inequality.value} | resamples={resamples} | seed={seed}",
        )

        try:
            code = self._run_pipeline(db, config, options, out_dir, inequality, run_options)

        except KeyboardInterrupt:
            self.stdout.write(self.style.WARNING('\n⚠  Stopped by user (Ctrl+C).'))
            self._session_end(db, False, 'Keyboard interrupt — user stopped the run')
            raise

        except DegenerateRatioError as exc:
            self._session_end(db, False, f'Drift weight below the floor: {exc}')
            write_json(out_dir / 'report.json', {
                'exit_code':         EXIT_PRECONDITIONS,
                'certified':         False,
                'preconditions_met': False,
                'error':             str(exc),
            }, db.manifest.digest if db.manifest else None)
            self.stdout.write(self.style.ERROR(f'\n❌  Preconditions failed: {exc}'))
            sys.exit(EXIT_PRECONDITIONS)

        except EntroCertError as exc:
            self._session_end(db, False, f'Input error: {str(exc)[:250]}')
            self.stdout.write(self.style.ERROR(f'\n❌  Input error: {exc}'))
            raise input_error(exc)

        except Exception as exc:
            logger.error(f"Unhandled error: {exc}", exc_info=True)
            self._session_end(db, False, f'Certification crashed: {str(exc)[:250]}')
            self.stdout.write(self.style.ERROR(f'\n❌  Certification failed: {exc}'))
            raise

        sys.exit(code)

    # ─────────────────────────────────────────────────────────────────────────
    # Pipeline runner: executes all 6 steps in sequence
    # ─────────────────────────────────────────────────────────────────────────

    def _run_pipeline(self, db, config, options, out_dir: Path, inequality: Inequality, run_options: dict) -> int:
        def header(n: int, title: str):
            self.stdout.write(self.style.HTTP_INFO(
                f"\n┌{'─' * 60}┐\n"
                f"│  Step {n:02d} — {title:<50}│\n"
                f"└{'─' * 60}┘"
            ))

        # ── Step 01 ───────────────────────────────────────────────────────────
        header(1, 'Inputs and Run Manifest')
        paths  = {role: options[role] for role in ('timing', 'counts', 'bank_a', 'bank_b')}
        inputs = Step01Inputs(db, out_dir).run(config, paths, run_options, options['config'], options['campaign'])
        digest = inputs.manifest.digest
        self.stdout.write(self.style.SUCCESS(f"  ✓  Manifest digest : {digest[:16]}…"))

        # ── Step 02 ───────────────────────────────────────────────────────────
        header(2, 'Filter Banks')
        evidence = Step02Filters(db).run(inputs)
        self.stdout.write(self.style.SUCCESS(
            f"  {'✓' if evidence.majorization_ok else '✗'}  Mean filters majorized : {evidence.majorization_ok}\n"
            f"  ✓  Joint w0 : {evidence.w0:.6f}"
        ))

        # ── Step 03 ───────────────────────────────────────────────────────────
        header(3, 'Frequency Entropy Bound')
        h_freq = Step03Frequency(db, out_dir).run(inputs, evidence, inequality)
        self.stdout.write(self.style.SUCCESS(f"  ✓  h_ω ≤ {h_freq.value_bits:+.4f} bits ({h_freq.kind.value})"))

        # ── Step 04 ───────────────────────────────────────────────────────────
        header(4, 'Timing Entropy Bound')
        h_time = Step04Timing(db).run(inputs.histogram, config.wing_fraction)
        self.stdout.write(self.style.SUCCESS(f"  ✓  h_t ≤ {h_time.value_bits:+.4f} bits"))

        # ── Step 05 ───────────────────────────────────────────────────────────
        header(5, 'Entanglement Witness')
        step05 = Step05Witness(db)
        report = step05.run(inputs, evidence, h_time, h_freq, inequality)
        self.stdout.write(self.style.SUCCESS(f"  ✓  Margin : {report.margin:+.4f} bits"))

        # ── Step 06 ───────────────────────────────────────────────────────────
        bootstrap = comparison = None
        if run_options['resamples']:
            header(6, 'Shot-Noise Uncertainty')
            bootstrap, comparison = Step06Uncertainty(db).run(
                inputs, evidence, inequality,
                resamples=run_options['resamples'], seed=run_options['seed'], record=step05.record,
            )
            self.stdout.write(self.style.SUCCESS(
                f"  ✓  95% interval : [{bootstrap.ci_low:+.4f}, {bootstrap.ci_high:+.4f}] bits"
            ))

        if report.certified:
            code = EXIT_CERTIFIED
        elif not report.preconditions_met:
            code = EXIT_PRECONDITIONS
        else:
            code = EXIT_NOT_CERTIFIED

        self._write_reports(out_dir, digest, code, report, evidence, h_time, h_freq, bootstrap, comparison)

        # ── Log session end ───────────────────────────────────────────────────
        self._session_end(
            db, True,
            f"Complete — exit {code} | certified={report.certified} | margin={report.margin:+.4f} bits | "
            f"w0={report.w0_used:.6f} | manifest={digest[:12]}",
        )
        self._print_final_summary(db, report, code)
        return code

    # ─────────────────────────────────────────────────────────────────────────
    # Reports
    # ─────────────────────────────────────────────────────────────────────────

    def _write_reports(self, out_dir, digest, code, report, evidence, h_time, h_freq, bootstrap, comparison):
        data = {
            'exit_code':       code,
            'certified':       report.certified,
            'witness':         report.to_dict(),
            'time_bound':      h_time.to_dict(),
            'frequency_bound': h_freq.to_dict(),
            'banks': {
                'w0':                 evidence.w0,
                'w0_a':               evidence.weights_a.w0,
                'argmin_a':           evidence.weights_a.argmin,
                'w0_b':               evidence.weights_b.w0,
                'argmin_b':           evidence.weights_b.argmin,
                'majorization_ok':    evidence.majorization_ok,
                'origins':            list(evidence.origins),
                'spacings_rad_per_s': list(evidence.spacings),
            },
            'bootstrap':  None,
            'shot_noise': None,
        }
        lines = [report.summary()]
        if bootstrap is not None:
            data['bootstrap'] = {
                'margin_point': bootstrap.margin_point,
                'margin_mean':  bootstrap.margin_mean,
                'ci_low':       bootstrap.ci_low,
                'ci_high':      bootstrap.ci_high,
                'n_resamples':  bootstrap.n_resamples,
                'excluded':     bootstrap.excluded,
                'warnings':     list(bootstrap.warnings),
            }
            data['shot_noise'] = comparison._asdict()
            lines.append(
                f"  95% interval     [{bootstrap.ci_low:+.4f}, {bootstrap.ci_high:+.4f}] bits "
                f"over {bootstrap.n_resamples} resamples"
            )
            lines += [f"  warning: {w}" for w in bootstrap.warnings]
        lines.append(f"  exit code        {code}")
        lines.append(f"# manifest {digest}")

        write_json(out_dir / 'report.json', data, digest)
        summary = out_dir / 'summary.txt'
        summary.write_text("\n".join(lines) + "\n", encoding='utf-8')
        logger.info(f"📄 Wrote {summary}")

    def _session_end(self, db: DatabaseService, passed: bool, found: str):
        db.save_result(
            check_name='Certification Session End',
            subject=db.manifest.digest[:12] if db.manifest else '',
            passed=passed,
            should_be='all 6 steps to complete and every report file to be written',
            found=found,
        )

    # ─────────────────────────────────────────────────────────────────────────
    # Final summary
    # ─────────────────────────────────────────────────────────────────────────

    def _print_final_summary(self, db: DatabaseService, report, code: int):
        checks = db.manifest.checks.all()
        total  = checks.count()
        passed = checks.filter(passed=True).count()
        style  = self.style.SUCCESS if report.certified else self.style.WARNING
        self.stdout.write(style(box(
            f"{'✅  CERTIFIED' if report.certified else '❌  NOT CERTIFIED'}",
            [
                ('Margin',          f"{report.margin:+.4f} bits"),
                ('Threshold',       f"{report.threshold:.4f} bits"),
                ('Checks passed',   f"{passed}/{total}"),
                ('Exit code',       str(code)),
                ('Admin panel at',  'http://127.0.0.1:8000/admin/'),
            ],
        )))
