"""
Step 05: Entanglement Witness
=============================
✓ Add the time and frequency bounds and compare them with the threshold
✓ Certify only when both bounds are valid and the margin is strictly positive
✓ Store the verdict, log each check to database
"""
import logging

from certification.services.acquisition      import BankEvidence
from certification.services.coarsegrain      import EntropyBound
from certification.services.database_service import DatabaseService
from certification.services.witness          import Inequality, WitnessReport, evaluate_witness
from certification.steps.step01_inputs       import CertifyInputs

logger = logging.getLogger(__name__)


class Step05Witness:

    def __init__(self, db: DatabaseService):
        self.db     = db
        self.record = None

    def run(
        self,
        inputs: CertifyInputs,
        evidence: BankEvidence,
        h_time: EntropyBound,
        h_freq: EntropyBound,
        inequality: Inequality,
    ) -> WitnessReport:
        logger.info("━" * 55)
        logger.info("STEP 05: Entanglement Witness")
        logger.info("━" * 55)

        report = evaluate_witness(
            h_time, h_freq, inequality,
            inputs_digest=dict(inputs.manifest.inputs),
            extra_notes=evidence.notes + tuple(f"bank origin {o}" for o in sorted(set(evidence.origins))),
        )

        self.db.save_result(
            check_name='Witness Preconditions',
            subject=f"w0 = {report.w0_used:.6f}",
            passed=report.preconditions_met,
            should_be='both entropy bounds to be backed by a passing majorization check',
            found='met' if report.preconditions_met else 'failed',
        )
        self.db.save_result(
            check_name='Energy-Time Entanglement Witness',
            subject=inequality.value,
            passed=report.certified,
            should_be=f"h_t + h_ω below {report.threshold:.4f} bits",
            found=(
                f"{report.h_time_bound:+.4f} + {report.h_freq_bound:+.4f} = "
                f"{report.h_time_bound + report.h_freq_bound:.4f} bits, margin {report.margin:+.4f}"
            ),
        )
        self.record = self.db.save_witness(report)
        return report
