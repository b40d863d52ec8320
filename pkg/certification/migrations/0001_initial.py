import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True
    dependencies = []

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('subcommand', models.CharField(max_length=32)),
                ('digest', models.CharField(db_index=True, max_length=64)),
                ('tool_version', models.CharField(max_length=32)),
                ('config', models.JSONField(blank=True, default=dict)),
                ('input_digests', models.JSONField(blank=True, default=dict)),
                ('out_dir', models.CharField(blank=True, max_length=1024)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'verbose_name': 'Run Manifest',
                'verbose_name_plural': 'Run Manifests',
                'db_table': 'run_manifests',
            },
        ),
        migrations.CreateModel(
            name='CheckResult',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('check_name', models.CharField(max_length=255)),
                ('subject', models.CharField(blank=True, max_length=255)),
                ('passed', models.BooleanField(default=False)),
                ('comment', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('manifest', models.ForeignKey(
                    blank=True, null=True, on_delete=django.db.models.deletion.CASCADE,
                    related_name='checks', to='certification.runmanifest',
                )),
            ],
            options={
                'verbose_name': 'Check Result',
                'verbose_name_plural': 'Check Results',
                'db_table': 'check_results',
            },
        ),
        migrations.CreateModel(
            name='FilterWeight',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('arm', models.CharField(choices=[('A', 'A'), ('B', 'B')], default='A', max_length=1)),
                ('filter_index', models.IntegerField()),
                ('center', models.FloatField(help_text='rad/s')),
                ('peak_margin', models.FloatField()),
                ('passes', models.BooleanField(default=False)),
                ('weight', models.FloatField(blank=True, null=True)),
                ('manifest', models.ForeignKey(
                    blank=True, null=True, on_delete=django.db.models.deletion.CASCADE,
                    related_name='weights', to='certification.runmanifest',
                )),
            ],
            options={
                'verbose_name': 'Filter Weight',
                'verbose_name_plural': 'Filter Weights',
                'db_table': 'filter_weights',
                'ordering': ('manifest', 'arm', 'filter_index'),
            },
        ),
        migrations.CreateModel(
            name='WitnessRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('inequality', models.CharField(
                    choices=[('sum_diff', 'Sum/difference'), ('conditional', 'Conditional')], max_length=16,
                )),
                ('h_time_bound', models.FloatField()),
                ('h_freq_bound', models.FloatField()),
                ('threshold', models.FloatField()),
                ('margin', models.FloatField()),
                ('w0_used', models.FloatField()),
                ('certified', models.BooleanField(default=False)),
                ('preconditions_met', models.BooleanField(default=False)),
                ('ci_low', models.FloatField(blank=True, null=True)),
                ('ci_high', models.FloatField(blank=True, null=True)),
                ('report', models.JSONField(blank=True, default=dict)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('manifest', models.ForeignKey(
                    blank=True, null=True, on_delete=django.db.models.deletion.CASCADE,
                    related_name='witnesses', to='certification.runmanifest',
                )),
            ],
            options={
                'verbose_name': 'Witness Record',
                'verbose_name_plural': 'Witness Records',
                'db_table': 'witness_records',
            },
        ),
    ]
