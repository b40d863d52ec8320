"""
Step 01: Inputs and Run Manifest
================================
✓ Resolve the input files (explicit paths, or a simulate output directory)
✓ Load the timing histogram, the joint count table and both bank manifests
✓ Confirm the count table matches the two banks
✓ Hash every input and write manifest.json
✓ Log each check to database
"""
import logging
from dataclasses import dataclass
from pathlib import Path

from certification.services.acquisition      import CoincidenceHistogram, JointCounts, load_histogram, load_joint_counts
from certification.services.config_service   import RunConfig
from certification.services.database_service import DatabaseService
from certification.services.errors           import EmptyHistogramError, SchemaError
from certification.services.filters          import FilterBank, load_bank_manifest
from certification.services.manifest_service import Manifest, build_manifest, write_manifest

logger = logging.getLogger(__name__)

# File names written by the simulate command.
CAMPAIGN_FILES = {
    'timing': 'histogram.csv',
    'counts': 'counts.csv',
    'bank_a': 'bank_a.json',
    'bank_b': 'bank_b.json',
}


@dataclass(frozen=True)
class CertifyInputs:
    config: RunConfig
    histogram: CoincidenceHistogram
    counts: JointCounts
    bank_a: FilterBank
    bank_b: FilterBank
    manifest: Manifest


class Step01Inputs:

    def __init__(self, db: DatabaseService, out_dir: Path):
        self.db      = db
        self.out_dir = out_dir

    def run(
        self,
        config: RunConfig,
        paths: dict[str, str | None],
        options: dict,
        config_path: str | None = None,
        campaign_dir: str | None = None,
    ) -> CertifyInputs:
        logger.info("━" * 55)
        logger.info("STEP 01: Inputs and Run Manifest")
        logger.info("━" * 55)

        # ── 1. Resolve paths ──────────────────────────────────────────────────
        resolved = self._resolve(paths, campaign_dir)

        # ── 2. Hash inputs and record the manifest ────────────────────────────
        roles = dict(resolved)
        if config_path:
            roles['config'] = config_path
        manifest = build_manifest(
            'certify', roles, {'run_config': config.snapshot, 'options': options},
        )
        write_manifest(manifest, self.out_dir)
        self.db.save_manifest(manifest, str(self.out_dir))

        # ── 3. Load and validate ──────────────────────────────────────────────
        clip      = config.clip_fraction
        histogram = load_histogram(resolved['timing'])
        bank_a    = load_bank_manifest(resolved['bank_a'], clip_fraction=clip)
        bank_b    = load_bank_manifest(resolved['bank_b'], clip_fraction=clip)
        counts    = load_joint_counts(resolved['counts'], (len(bank_a), len(bank_b)))

        self.db.save_result(
            check_name='Input Files Load',
            subject=', '.join(f"{role}={Path(p).name}" for role, p in sorted(resolved.items())),
            passed=True,
            should_be='timing histogram, joint counts and both bank manifests to parse',
            found=(
                f"{histogram.counts.size} timing bins, {counts.shape[0]}x{counts.shape[1]} count table, "
                f"{int(counts.total)} coincidences"
            ),
        )

        if counts.total <= 0 or histogram.total <= 0:
            self.db.save_result(
                check_name='Non-empty Counts',
                subject='counts/timing',
                passed=False,
                should_be='both count sets to hold coincidences',
                found=f"joint total {counts.total:g}, timing total {histogram.total:g}",
            )
            raise EmptyHistogramError("no coincidences in the count data")

        return CertifyInputs(config, histogram, counts, bank_a, bank_b, manifest)

    # ─────────────────────────────────────────────────────────────────────────
    # Private helpers
    # ─────────────────────────────────────────────────────────────────────────

    def _resolve(self, paths: dict[str, str | None], campaign_dir: str | None) -> dict[str, Path]:
        """Explicit paths win over the files of ``campaign_dir``."""
        resolved = {}
        for role, filename in CAMPAIGN_FILES.items():
            path = paths.get(role)
            if path is None and campaign_dir is not None:
                path = Path(campaign_dir) / filename
            if path is None:
                raise SchemaError(f"missing input: --{role.replace('_', '-')} (or --campaign <dir>)")
            resolved[role] = Path(path)

        missing = [str(p) for p in resolved.values() if not p.is_file()]
        if missing:
            self.db.save_result(
                check_name='Input Files Present',
                subject=', '.join(missing),
                passed=False,
                should_be='every input file to exist',
                found=f"{len(missing)} missing file(s)",
            )
            raise SchemaError(f"{missing[0]}: file not found")
        return resolved
