"""
Step 03: Frequency Entropy Bound
================================
✓ Turn the joint counts into filter-pair probabilities
✓ Bound h(ω_A|ω_B) by H(A|B)/w0 + log₂Δω (or h(ω_A+ω_B) for the sum/difference witness)
✓ Export the coarse-grained table
✓ Log the bound to database
"""
import logging
from pathlib import Path

from certification.services.acquisition      import BankEvidence
from certification.services.coarsegrain      import EntropyBound, save_coarse_grained_csv
from certification.services.database_service import DatabaseService
from certification.services.witness          import Inequality
from certification.steps.step01_inputs       import CertifyInputs

logger = logging.getLogger(__name__)


class Step03Frequency:

    def __init__(self, db: DatabaseService, out_dir: Path):
        self.db      = db
        self.out_dir = out_dir

    def run(self, inputs: CertifyInputs, evidence: BankEvidence, inequality: Inequality) -> EntropyBound:
        logger.info("━" * 55)
        logger.info("STEP 03: Frequency Entropy Bound")
        logger.info("━" * 55)

        cg    = inputs.counts.to_coarse_grained(inputs.bank_a, inputs.bank_b)
        bound = evidence.frequency_bound(cg, inequality)
        save_coarse_grained_csv(cg, self.out_dir / 'coarse_grained.csv', inputs.manifest.digest)

        self.db.save_result(
            check_name='Frequency Entropy Bound',
            subject=bound.kind.value,
            passed=bound.valid,
            should_be='a conservative (majorization-backed) upper bound on the frequency entropy',
            found=f"{bound.value_bits:+.4f} bits ({bound.provenance})",
        )
        return bound
