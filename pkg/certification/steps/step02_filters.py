"""
Step 02: Top-Hat Majorization and Drift Weights
===============================================
✓ Check every filter of both arms against the top-hat of the bank spacing
✓ Build each arm's mean filter and check it against the same top-hat
✓ Compute the per-filter drift weights w_n and the joint w0 = w0_A·w0_B
✓ Store per-filter margins and weights, log each check to database
"""
import logging

from certification.services.acquisition      import BankEvidence
from certification.services.database_service import DatabaseService
from certification.services.errors           import DegenerateRatioError
from certification.services.filters          import check_bank
from certification.steps.step01_inputs       import CertifyInputs

logger = logging.getLogger(__name__)


class Step02Filters:

    def __init__(self, db: DatabaseService):
        self.db = db

    def run(self, inputs: CertifyInputs) -> BankEvidence:
        logger.info("━" * 55)
        logger.info("STEP 02: Filter Banks — Top-Hat Majorization and Drift Weights")
        logger.info("━" * 55)

        # ── 1. Per-filter top-hat checks ──────────────────────────────────────
        checks = {}
        for arm, bank in (('A', inputs.bank_a), ('B', inputs.bank_b)):
            checks[arm] = check_bank(bank)
            passing = sum(1 for c in checks[arm] if c.verdict)
            worst   = min(range(len(bank)), key=lambda n: checks[arm][n].margin)
            self.db.save_result(
                check_name=f'Filter Top-Hat Majorization (arm {arm})',
                subject=f"{len(bank)} filters, spacing {bank.nominal_spacing:.6g} rad/s, origin {bank.origin}",
                passed=passing == len(bank),
                should_be='every filter to be majorized by the top-hat of the bank spacing',
                found=f"{passing}/{len(bank)} pass, worst margin {checks[arm][worst].margin:.6g} at filter {worst}",
            )

        # ── 2. Drift weights ──────────────────────────────────────────────────
        try:
            evidence = BankEvidence.from_banks(inputs.bank_a, inputs.bank_b, **inputs.config.weight_options())
        except DegenerateRatioError as exc:
            self.db.save_result(
                check_name='Filter Drift Weights',
                subject=f"arm {exc.arm} filter {exc.filter_index}",
                passed=False,
                should_be=f"every w_n to stay above the floor {inputs.config.weight_floor:g}",
                found=str(exc),
            )
            raise

        for arm, bank, report in (('A', inputs.bank_a, evidence.weights_a), ('B', inputs.bank_b, evidence.weights_b)):
            self.db.save_filter_weights(arm, bank.centers, checks[arm], report.per_filter_w)

        self.db.save_result(
            check_name='Mean Filter Top-Hat Majorization',
            subject=f"w0_A={evidence.weights_a.w0:.6f} (filter {evidence.weights_a.argmin}), "
                    f"w0_B={evidence.weights_b.w0:.6f} (filter {evidence.weights_b.argmin})",
            passed=evidence.majorization_ok,
            should_be='both mean filters to be majorized by the top-hat of their spacing',
            found='; '.join(evidence.notes) or f"both pass, joint w0 = {evidence.w0:.6f}",
        )
        return evidence
