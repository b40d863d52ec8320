"""
DatabaseService
===============
All run-ledger writes in one place.
Comment format: "should be <expected>, found <actual>"

A service is bound to at most one RunManifest row. Checks written before the
manifest exists are attached to it once it is saved.
"""
import logging
from django.db import connection
from django.db.utils import OperationalError, ProgrammingError
from certification.models import RunManifest, CheckResult, FilterWeight, WitnessRecord

logger = logging.getLogger(__name__)


class DatabaseService:

    def __init__(self):
        self.manifest: RunManifest | None = None
        self._unbound: list[int] = []
        self._ready: set[type] = set()

    def _ensure_table(self, model) -> None:
        """Create a missing ledger table, and ``RunManifest`` before it, since every row points at a run."""
        if model in self._ready:
            return
        existing = set(connection.introspection.table_names())
        missing  = [m for m in dict.fromkeys((RunManifest, model)) if m._meta.db_table not in existing]
        if missing:
            with connection.schema_editor() as schema_editor:
                for m in missing:
                    schema_editor.create_model(m)
            logger.warning(
                "Ledger tables %s were auto-created at runtime. Run `manage.py migrate` to keep the schema consistent.",
                ', '.join(m._meta.db_table for m in missing),
            )
        self._ready.update(missing + [model])

    # ── Manifests ─────────────────────────────────────────────────────────────

    def save_manifest(self, manifest, out_dir: str = '') -> RunManifest:
        """Record a ``manifest_service.Manifest`` and bind this service to it."""
        self._ensure_table(RunManifest)
        self.manifest = RunManifest.objects.create(
            subcommand=manifest.subcommand,
            digest=manifest.digest,
            tool_version=manifest.tool_version,
            config=manifest.config,
            input_digests=dict(manifest.inputs),
            out_dir=str(out_dir)[:1024],
        )
        if self._unbound:
            CheckResult.objects.filter(pk__in=self._unbound).update(manifest=self.manifest)
            self._unbound.clear()
        logger.info(f"Run manifest {manifest.digest[:12]} recorded (id={self.manifest.pk})")
        return self.manifest

    # ── Check results ─────────────────────────────────────────────────────────

    def save_result(
        self,
        check_name: str,
        subject: str,
        passed: bool,
        should_be: str,
        found: str,
    ) -> CheckResult:
        self._ensure_table(CheckResult)
        comment = f"should be {should_be}, found {found}"
        obj = CheckResult.objects.create(
            manifest=self.manifest,
            check_name=check_name[:255],
            subject=str(subject)[:255],
            passed=bool(passed),
            comment=comment,
        )
        if self.manifest is None:
            self._unbound.append(obj.pk)
        icon = '✅' if passed else '❌'
        logger.info(f"{icon} [{check_name}] {comment}")
        return obj

    # ── Filter weights ────────────────────────────────────────────────────────

    def save_filter_weights(self, arm: str, centers, checks, weights=None) -> int:
        """One row per filter; ``checks`` are TopHatCheck tuples, ``weights`` may be None."""
        self._ensure_table(FilterWeight)
        weights = [None] * len(checks) if weights is None else list(weights)
        objs = [
            FilterWeight(
                manifest=self.manifest,
                arm=arm,
                filter_index=n,
                center=float(center),
                peak_margin=float(check.margin),
                passes=bool(check.verdict),
                weight=None if weight is None else float(weight),
            )
            for n, (center, check, weight) in enumerate(zip(centers, checks, weights))
        ]
        if objs:
            try:
                FilterWeight.objects.bulk_create(objs)
            except (ProgrammingError, OperationalError):
                # Table dropped since it was last seen.
                self._ready.discard(FilterWeight)
                self._ensure_table(FilterWeight)
                FilterWeight.objects.bulk_create(objs)
            logger.info(f"Saved {len(objs)} filter weights for arm {arm}")
        return len(objs)

    # ── Witness verdicts ──────────────────────────────────────────────────────

    def save_witness(self, report, ci: tuple[float, float] | None = None) -> WitnessRecord:
        """Record a ``witness.WitnessReport`` with its optional bootstrap interval."""
        self._ensure_table(WitnessRecord)
        obj = WitnessRecord.objects.create(
            manifest=self.manifest,
            inequality=report.inequality.value,
            h_time_bound=report.h_time_bound,
            h_freq_bound=report.h_freq_bound,
            threshold=report.threshold,
            margin=report.margin,
            w0_used=report.w0_used,
            certified=report.certified,
            preconditions_met=report.preconditions_met,
            ci_low=None if ci is None else float(ci[0]),
            ci_high=None if ci is None else float(ci[1]),
            report=report.to_dict(),
        )
        logger.info(f"Saved witness record {obj}")
        return obj

    def update_witness_interval(self, record: WitnessRecord, ci: tuple[float, float]) -> None:
        record.ci_low, record.ci_high = float(ci[0]), float(ci[1])
        record.save(update_fields=['ci_low', 'ci_high'])
