from django.db import models


class RunManifest(models.Model):
    """
    One row per CLI run. The digest is the SHA-256 of the canonical manifest
    JSON (timestamp excluded) and is embedded in every output file.
    """
    subcommand    = models.CharField(max_length=32)
    digest        = models.CharField(max_length=64, db_index=True)
    tool_version  = models.CharField(max_length=32)
    config        = models.JSONField(default=dict, blank=True)
    input_digests = models.JSONField(default=dict, blank=True)
    out_dir       = models.CharField(max_length=1024, blank=True)
    created_at    = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table         = 'run_manifests'
        verbose_name     = 'Run Manifest'
        verbose_name_plural = 'Run Manifests'

    def __str__(self):
        return f"{self.subcommand} {self.digest[:12]}"


class CheckResult(models.Model):
    """
    Every verification a run performs.
    Comment format: "should be <expected>, found <actual>"
    """
    manifest   = models.ForeignKey(RunManifest, null=True, blank=True, on_delete=models.CASCADE, related_name='checks')
    check_name = models.CharField(max_length=255)
    subject    = models.CharField(max_length=255, blank=True)
    passed     = models.BooleanField(default=False)
    comment    = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table         = 'check_results'
        verbose_name     = 'Check Result'
        verbose_name_plural = 'Check Results'

    def __str__(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.check_name}"


class FilterWeight(models.Model):
    """Per-filter top-hat margin and drift weight of one bank arm."""
    ARM_CHOICES = [('A', 'A'), ('B', 'B')]

    manifest     = models.ForeignKey(RunManifest, null=True, blank=True, on_delete=models.CASCADE, related_name='weights')
    arm          = models.CharField(max_length=1, choices=ARM_CHOICES, default='A')
    filter_index = models.IntegerField()
    center       = models.FloatField(help_text='rad/s')
    peak_margin  = models.FloatField()
    passes       = models.BooleanField(default=False)
    weight       = models.FloatField(null=True, blank=True)

    class Meta:
        db_table         = 'filter_weights'
        verbose_name     = 'Filter Weight'
        verbose_name_plural = 'Filter Weights'
        ordering         = ('manifest', 'arm', 'filter_index')

    def __str__(self):
        return f"{self.arm}[{self.filter_index}] w={self.weight}"


class WitnessRecord(models.Model):
    """The witness verdict of one certify run."""
    INEQUALITY_CHOICES = [('sum_diff', 'Sum/difference'), ('conditional', 'Conditional')]

    manifest          = models.ForeignKey(RunManifest, null=True, blank=True, on_delete=models.CASCADE, related_name='witnesses')
    inequality        = models.CharField(max_length=16, choices=INEQUALITY_CHOICES)
    h_time_bound      = models.FloatField()
    h_freq_bound      = models.FloatField()
    threshold         = models.FloatField()
    margin            = models.FloatField()
    w0_used           = models.FloatField()
    certified         = models.BooleanField(default=False)
    preconditions_met = models.BooleanField(default=False)
    ci_low            = models.FloatField(null=True, blank=True)
    ci_high           = models.FloatField(null=True, blank=True)
    report            = models.JSONField(default=dict, blank=True)
    created_at        = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table         = 'witness_records'
        verbose_name     = 'Witness Record'
        verbose_name_plural = 'Witness Records'

    def __str__(self):
        return f"[{'CERTIFIED' if self.certified else 'NOT CERTIFIED'}] {self.inequality} {self.margin:+.4f} bits"
