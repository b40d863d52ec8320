"""
Step 04: Timing Entropy Bound
=============================
✓ Estimate the accidental floor from the histogram wings and subtract it
✓ Bound h(t_A − t_B) by H(T) + log₂Δt
✓ Log each check to database
"""
import logging

from certification.services.acquisition      import CoincidenceHistogram, subtract_background, timing_entropy_bound
from certification.services.coarsegrain      import EntropyBound
from certification.services.database_service import DatabaseService
from certification.services.errors           import PeakInWingsError

logger = logging.getLogger(__name__)


class Step04Timing:

    def __init__(self, db: DatabaseService):
        self.db = db

    def run(self, histogram: CoincidenceHistogram, wing_fraction: float) -> EntropyBound:
        logger.info("━" * 55)
        logger.info("STEP 04: Timing Entropy Bound")
        logger.info("━" * 55)

        # ── 1. Background subtraction ─────────────────────────────────────────
        try:
            cleaned = subtract_background(histogram, wing_fraction)
        except PeakInWingsError as exc:
            self.db.save_result(
                check_name='Timing Background Subtraction',
                subject=f"{histogram.counts.size} bins, wing fraction {wing_fraction:g}",
                passed=False,
                should_be='the coincidence peak to stay clear of the histogram wings',
                found=str(exc),
            )
            raise
        self.db.save_result(
            check_name='Timing Background Subtraction',
            subject=f"{histogram.counts.size} bins, wing fraction {wing_fraction:g}",
            passed=True,
            should_be='a flat accidental floor estimated from the wings',
            found=f"{cleaned.background_per_bin:.6g} counts/bin removed, {cleaned.total:.6g} counts kept",
        )

        # ── 2. Entropy bound ──────────────────────────────────────────────────
        bound = timing_entropy_bound(cleaned)
        self.db.save_result(
            check_name='Timing Entropy Bound',
            subject=f"bin width {histogram.bin_width:.6g} s",
            passed=bound.valid,
            should_be='an upper bound on h(t_A − t_B) from the binned histogram',
            found=f"{bound.value_bits:+.4f} bits",
        )
        return bound
