"""
Step 06: Shot-Noise Uncertainty
===============================
✓ Poisson-resample both count sets and rerun the margin pipeline
✓ Report the 95% interval of the margin
✓ Compare the drift correction with the shot-noise half-width
✓ Log each check to database
"""
import logging

from certification.services.acquisition      import (
    BankEvidence, BootstrapResult, ShotNoiseComparison, bootstrap_margin, shot_noise_comparison,
)
from certification.services.database_service import DatabaseService
from certification.services.witness          import Inequality
from certification.steps.step01_inputs       import CertifyInputs

logger = logging.getLogger(__name__)


class Step06Uncertainty:

    def __init__(self, db: DatabaseService):
        self.db = db

    def run(
        self,
        inputs: CertifyInputs,
        evidence: BankEvidence,
        inequality: Inequality,
        *,
        resamples: int,
        seed: int,
        record=None,
    ) -> tuple[BootstrapResult, ShotNoiseComparison]:
        logger.info("━" * 55)
        logger.info("STEP 06: Shot-Noise Uncertainty")
        logger.info("━" * 55)

        result = bootstrap_margin(
            inputs.counts, evidence, inputs.histogram,
            n_resamples=resamples,
            rng_seed=seed,
            inequality=inequality,
            wing_fraction=inputs.config.wing_fraction,
        )
        if record is not None:
            self.db.update_witness_interval(record, (result.ci_low, result.ci_high))

        self.db.save_result(
            check_name='Bootstrap Margin Interval',
            subject=f"{result.n_resamples} resamples, seed {seed}",
            passed=result.ci_low > 0,
            should_be='the 95% margin interval to exclude zero',
            found=f"[{result.ci_low:+.4f}, {result.ci_high:+.4f}] bits, mean {result.margin_mean:+.4f}",
        )

        comparison = shot_noise_comparison(inputs.counts, evidence.w0, (result.ci_low, result.ci_high))
        self.db.save_result(
            check_name='Drift Correction vs Shot Noise',
            subject=f"w0 = {evidence.w0:.6f}",
            passed=True,
            should_be='the drift correction compared with the shot-noise half-width',
            found=(
                f"correction {comparison.drift_correction_bits:.4f} bits, half-width "
                f"{comparison.ci_half_width_bits:.4f} bits ("
                f"{'resolvable' if comparison.resolvable else 'below shot noise'})"
            ),
        )
        return result, comparison
