from django.contrib import admin
from .models import RunManifest, CheckResult, FilterWeight, WitnessRecord


@admin.register(RunManifest)
class RunManifestAdmin(admin.ModelAdmin):
    list_display   = ('id', 'subcommand', 'digest', 'tool_version', 'created_at')
    list_filter    = ('subcommand',)
    search_fields  = ('digest',)
    ordering       = ('-created_at',)


@admin.register(CheckResult)
class CheckResultAdmin(admin.ModelAdmin):
    list_display   = ('id', 'check_name', 'subject', 'passed', 'comment')
    list_filter    = ('passed', 'manifest__subcommand')
    search_fields  = ('check_name', 'comment')
    ordering       = ('-id',)
    list_per_page  = 50


@admin.register(FilterWeight)
class FilterWeightAdmin(admin.ModelAdmin):
    list_display  = ('id', 'manifest', 'arm', 'filter_index', 'center', 'peak_margin', 'passes', 'weight')
    list_filter   = ('arm', 'passes')
    ordering      = ('-manifest', 'arm', 'filter_index')


@admin.register(WitnessRecord)
class WitnessRecordAdmin(admin.ModelAdmin):
    list_display  = ('id', 'inequality', 'margin', 'ci_low', 'ci_high', 'w0_used', 'certified', 'preconditions_met')
    list_filter   = ('certified', 'inequality', 'preconditions_met')
    ordering      = ('-created_at',)
