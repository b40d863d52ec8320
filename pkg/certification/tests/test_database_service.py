from django.db import connection
from django.test import TestCase, TransactionTestCase

from certification.models import CheckResult, FilterWeight, RunManifest, WitnessRecord
from certification.services.coarsegrain import BoundKind, EntropyBound
from certification.services.database_service import DatabaseService
from certification.services.filters import TopHatCheck
from certification.services.manifest_service import Manifest
from certification.services.witness import evaluate_witness


class DatabaseServiceTests(TestCase):

    def setUp(self):
        self.db = DatabaseService()
        self.manifest = Manifest('certify', {'timing': 'aa'}, {'inequality': 'conditional'})

    def test_checks_before_the_manifest_are_bound_later(self):
        early = self.db.save_result('Top-hat Majorization', 'arm A', True, 'peak <= 1/spacing', 'margin 0.3')
        self.assertIsNone(early.manifest)
        row = self.db.save_manifest(self.manifest, '/tmp/runs/certify')
        late = self.db.save_result('Filter Drift', 'arm A', False, 'w0 = 1', 'w0 = 0.98')
        self.assertEqual(row.digest, self.manifest.digest)
        self.assertEqual(set(row.checks.values_list('pk', flat=True)), {early.pk, late.pk})
        self.assertEqual(RunManifest.objects.get().input_digests, {'timing': 'aa'})

    def test_comment_format(self):
        obj = self.db.save_result('Witness', 'conditional', False, 'margin > 0', 'margin -1.2 bits')
        self.assertEqual(obj.comment, 'should be margin > 0, found margin -1.2 bits')
        self.assertFalse(CheckResult.objects.get(pk=obj.pk).passed)

    def test_filter_weights(self):
        self.db.save_manifest(self.manifest)
        checks = [TopHatCheck(True, 0.1), TopHatCheck(False, -0.2), TopHatCheck(True, 0.0)]
        saved  = self.db.save_filter_weights('B', [1.0, 2.0, 3.0], checks, [1.0, 0.97, 0.99])
        self.assertEqual(saved, 3)
        rows = list(FilterWeight.objects.filter(arm='B'))
        self.assertEqual([r.filter_index for r in rows], [0, 1, 2])
        self.assertEqual([r.passes for r in rows], [True, False, True])
        self.assertEqual(rows[1].weight, 0.97)
        self.assertEqual(self.db.save_filter_weights('A', [1.0], [TopHatCheck(True, 0.1)]), 1)
        self.assertIsNone(FilterWeight.objects.get(arm='A').weight)

    def test_witness_record_and_interval(self):
        self.db.save_manifest(self.manifest)
        report = evaluate_witness(
            EntropyBound(-30.3, BoundKind.CONDITIONAL), EntropyBound(32.3, BoundKind.CONDITIONAL), 'conditional',
        )
        record = self.db.save_witness(report)
        self.assertIsNone(record.ci_low)
        self.db.update_witness_interval(record, (0.9, 1.2))
        stored = WitnessRecord.objects.get(pk=record.pk)
        self.assertEqual((stored.ci_low, stored.ci_high), (0.9, 1.2))
        self.assertTrue(stored.certified)
        self.assertEqual(stored.report['inequality'], 'conditional')
        self.assertEqual(stored.manifest, self.db.manifest)


class MissingTableTests(TransactionTestCase):

    def test_missing_ledger_table_is_recreated_once(self):
        with connection.schema_editor() as editor:
            editor.delete_model(WitnessRecord)
        table = WitnessRecord._meta.db_table
        self.assertNotIn(table, connection.introspection.table_names())

        db = DatabaseService()
        db.save_manifest(Manifest('certify', {'timing': 'aa'}, {}))
        report = evaluate_witness(
            EntropyBound(-30.3, BoundKind.CONDITIONAL), EntropyBound(32.3, BoundKind.CONDITIONAL), 'conditional',
        )
        with self.assertLogs('certification.services.database_service', 'WARNING') as logs:
            record = db.save_witness(report)
        self.assertIn(table, connection.introspection.table_names())
        self.assertIn(table, logs.output[0])
        self.assertEqual(WitnessRecord.objects.get().pk, record.pk)

        with self.assertNoLogs('certification.services.database_service', 'WARNING'):
            db.save_witness(report)
        self.assertEqual(WitnessRecord.objects.count(), 2)
