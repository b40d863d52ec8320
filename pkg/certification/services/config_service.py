"""
ConfigService
=============
Run configuration files (``--config <path>``).

Every physical quantity carries its unit in the key name and is converted to
SI here (seconds, rad/s, metres):

    time       _ps _fs _s
    angular    _rad_per_s, or ordinary frequency _hz _mhz _ghz _thz (times 2π)
    length     _pm _nm _mm _m
    gvd        _fs2_per_mm (kept in fs²/mm)

Dimensionless keys (counts, seeds, fractions, flags) are listed explicitly.
A numeric key without a recognised suffix, an unknown key, or the same
quantity given twice in different units is a ``ConfigError``.

Example::

    {
      "source":    {"pump_wavelength_nm": 775, "pump_sigma_mhz": 100,
                    "phasematch_sigma_thz": 1, "crystal_length_mm": 20,
                    "gvd_fs2_per_mm": 292},
      "detectors": {"jitter_a_ps": 20, "jitter_b_ps": 20, "timebin_ps": 1},
      "window":    {"span_a_ghz": 2, "span_b_ghz": 2, "step_mhz": 5},
      "banks":     {"kind": "lorentzian", "spacing_mhz": 100, "width_mhz": 100},
      "campaign":  {"total_pairs": 10000000, "center_jitter": 0.05, "seed": 7},
      "analysis":  {"inequality": "conditional", "resamples": 200}
    }
"""
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from .acquisition import CampaignConfig
from .errors import ConfigError
from .filters import FilterBank, ProfileKind
from .spdc import (
    FWHM_PER_SIGMA,
    SpdcParams,
    SpectralWindow,
    TimingModel,
    intrinsic_timing_sigma,
    timing_model,
    wavelength_to_angular_frequency,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

UNITS = {
    'time':    {'ps': 1e-12, 'fs': 1e-15, 's': 1.0},
    'angular': {'rad_per_s': 1.0, 'hz': TWO_PI, 'mhz': TWO_PI * 1e6, 'ghz': TWO_PI * 1e9, 'thz': TWO_PI * 1e12},
    'length':  {'pm': 1e-12, 'nm': 1e-9, 'mm': 1e-3, 'm': 1.0},
    'gvd':     {'fs2_per_mm': 1.0},
}

# Suffixes tried longest first so that "_rad_per_s" wins over "_s".
_SUFFIXES = sorted(
    ((suffix, dimension) for dimension, table in UNITS.items() for suffix in table),
    key=lambda item: -len(item[0]),
)

SCHEMA = {
    'source': {
        'pump_wavelength':  'length',
        'pump_center':      'angular',
        'pump_sigma':       'angular',
        'phasematch_sigma': 'angular',
        'crystal_length':   'length',
        'gvd':              'gvd',
    },
    'detectors': {
        'jitter_a':    'time',
        'jitter_b':    'time',
        'timebin':     'time',
        'timing_fwhm': 'time',
    },
    'window': {
        'span_a': 'angular',
        'span_b': 'angular',
        'step':   'angular',
    },
    'banks': {
        'kind':        'str',
        'spacing':     'angular',
        'width':       'angular',
        'sigma_gauss': 'angular',
        'count_a':     'int',
        'count_b':     'int',
        'extension':   'float',
    },
    'campaign': {
        'total_pairs':                  'int',
        'center_jitter':                'float',
        'width_jitter':                 'float',
        'seed':                         'int',
        'background_per_cell':          'float',
        'histogram_background_per_bin': 'float',
        'histogram_span_sigmas':        'float',
        'noiseless':                    'bool',
        'product_state':                'bool',
    },
    'analysis': {
        'inequality':        'str',
        'wing_fraction':     'float',
        'resamples':         'int',
        'weight_floor':      'float',
        'search_window':     'float',
        'clip_fraction':     'float',
        'center_wavelength': 'length',
    },
}


def _setting(name: str, default):
    try:
        from django.conf import settings
        if settings.configured:
            return getattr(settings, name, default)
    except ImportError:
        pass
    return os.getenv(name, default)


def _split_key(key: str) -> tuple[str, str | None, str | None]:
    for suffix, dimension in _SUFFIXES:
        if key.endswith('_' + suffix):
            return key[: -len(suffix) - 1], suffix, dimension
    return key, None, None


def _parse_section(name: str, raw: dict) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be an object")
    schema = SCHEMA[name]
    parsed: dict = {}
    given:  dict = {}
    for key, value in raw.items():
        base, suffix, dimension = _split_key(key)
        if suffix is not None and base in schema and schema[base] == dimension:
            if base in given:
                raise ConfigError(f"{name}.{base} given twice ({given[base]} and {key})")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}.{key} must be a number")
            given[base]  = key
            parsed[base] = float(value) * UNITS[dimension][suffix]
            continue
        kind = schema.get(key)
        if kind is None:
            if base in schema:
                raise ConfigError(f"{name}.{key}: unit not accepted for {base} ({schema[base]})")
            raise ConfigError(f"{name}.{key}: unknown key")
        if kind in UNITS:
            raise ConfigError(f"{name}.{key}: a {kind} quantity needs a unit suffix")
        parsed[key] = _coerce(name, key, kind, value)
    return parsed


def _coerce(section: str, key: str, kind: str, value):
    label = f"{section}.{key}"
    if kind == 'str':
        if not isinstance(value, str):
            raise ConfigError(f"{label} must be a string")
        return value
    if kind == 'bool':
        if not isinstance(value, bool):
            raise ConfigError(f"{label} must be true or false")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{label} must be a number")
    if kind == 'int':
        if float(value) != int(value):
            raise ConfigError(f"{label} must be an integer")
        return int(value)
    return float(value)


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration, SI units; absent sections are empty dicts."""
    source: dict = field(default_factory=dict)
    detectors: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    banks: dict = field(default_factory=dict)
    campaign: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    snapshot: dict = field(default_factory=dict)

    # ── analysis defaults ──

    @property
    def inequality(self) -> str:
        return self.analysis.get('inequality', 'conditional').replace('-', '_')

    @property
    def wing_fraction(self) -> float:
        return self.analysis.get('wing_fraction', 0.1)

    @property
    def resamples(self) -> int:
        return int(self.analysis.get('resamples', _setting('ENTROCERT_RESAMPLES', 200)))

    @property
    def weight_floor(self) -> float:
        return float(self.analysis.get('weight_floor', _setting('ENTROCERT_WEIGHT_FLOOR', 1e-3)))

    @property
    def search_window(self) -> float:
        return self.analysis.get('search_window', 50.0)

    @property
    def clip_fraction(self) -> float:
        return self.analysis.get('clip_fraction', 1e-6)

    @property
    def center_wavelength(self) -> float:
        return self.analysis.get('center_wavelength', 1550e-9)

    def weight_options(self) -> dict:
        return {'search_window': self.search_window, 'floor': self.weight_floor}

    # ── builders ──

    def spdc_params(self) -> SpdcParams:
        src = self.source
        if 'pump_wavelength' in src:
            pump_center = wavelength_to_angular_frequency(src['pump_wavelength'])
        elif 'pump_center' in src:
            pump_center = src['pump_center']
        else:
            raise ConfigError("source needs pump_wavelength or pump_center")
        for key in ('pump_sigma', 'phasematch_sigma'):
            if key not in src:
                raise ConfigError(f"source.{key} is required")
        optional = {}
        if 'crystal_length' in src:
            optional['crystal_length_mm'] = src['crystal_length'] * 1e3
        if 'gvd' in src:
            optional['gvd_fs2_per_mm'] = src['gvd']
        det = self.detectors
        return SpdcParams(
            pump_center, src['pump_sigma'], src['phasematch_sigma'],
            jitter_a=det.get('jitter_a', 0.0),
            jitter_b=det.get('jitter_b', 0.0),
            timebin=det.get('timebin', 1e-12),
            **optional,
        )

    def spectral_window(self, params: SpdcParams) -> SpectralWindow:
        """The configured window around ω_p/2, or ±6 marginal σ when none is given."""
        win = self.window
        if not win:
            return SpectralWindow.full(params)
        if 'span_a' not in win or 'step' not in win:
            raise ConfigError("window needs span_a and step")
        return SpectralWindow.around(params, win['span_a'], win.get('span_b', win['span_a']), win['step'])

    def timing_model(self, params: SpdcParams) -> TimingModel:
        """An explicit detectors.timing_fwhm overrides the crystal + jitter model."""
        fwhm = self.detectors.get('timing_fwhm')
        if fwhm is None:
            return timing_model(params)
        if not fwhm > 0:
            raise ConfigError("detectors.timing_fwhm must be positive")
        intrinsic = intrinsic_timing_sigma(params.crystal_length_mm, params.gvd_fs2_per_mm)
        return TimingModel(intrinsic, fwhm / FWHM_PER_SIGMA, fwhm)

    def filter_banks(self, window: SpectralWindow) -> tuple[FilterBank, FilterBank]:
        """Uniform banks centred on the window, reaching ``extension`` spans past each edge."""
        cfg = self.banks
        if 'spacing' not in cfg:
            raise ConfigError("banks.spacing is required")
        spacing   = cfg['spacing']
        kind      = ProfileKind(cfg.get('kind', 'lorentzian'))
        width     = cfg.get('width', spacing)
        extension = cfg.get('extension', 1.0)
        if not spacing > 0 or extension < 0:
            raise ConfigError("banks.spacing must be positive and banks.extension non-negative")
        if kind == ProfileKind.TABULATED:
            raise ConfigError("tabulated banks are loaded from bank manifests, not built from a config")

        def build(center: float, span: float, count: int | None) -> FilterBank:
            count = count or int(math.ceil(span * (1.0 + 2.0 * extension) / spacing)) + 1
            first = center - 0.5 * (count - 1) * spacing
            return FilterBank.uniform(kind, count, spacing, first, width, sigma_gauss=cfg.get('sigma_gauss', 0.0))

        return (
            build(window.center_a, window.span_a, cfg.get('count_a')),
            build(window.center_b, window.span_b, cfg.get('count_b')),
        )

    def campaign_config(
        self,
        bank_a: FilterBank,
        bank_b: FilterBank,
        timing: TimingModel | None,
        *,
        seed: int | None = None,
    ) -> CampaignConfig:
        camp = self.campaign
        if 'total_pairs' not in camp:
            raise ConfigError("campaign.total_pairs is required")
        return CampaignConfig(
            total_pairs=camp['total_pairs'],
            bank_a=bank_a,
            bank_b=bank_b,
            center_jitter=camp.get('center_jitter', 0.0),
            width_jitter=camp.get('width_jitter', 0.0),
            rng_seed=camp.get('seed', 0) if seed is None else seed,
            background_rate=camp.get('background_per_cell', 0.0),
            timing=timing,
            histogram_bin_width=self.detectors.get('timebin', 1e-12),
            histogram_span_sigmas=camp.get('histogram_span_sigmas', 8.0),
            histogram_background=camp.get('histogram_background_per_bin', 0.0),
            noiseless=camp.get('noiseless', False),
        )

    @property
    def product_state(self) -> bool:
        return self.campaign.get('product_state', False)


def parse_run_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    unknown = set(data) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown configuration sections: {', '.join(sorted(unknown))}")
    sections = {name: _parse_section(name, data.get(name, {})) for name in SCHEMA}

    source = sections['source']
    if 'pump_wavelength' in source and 'pump_center' in source:
        raise ConfigError("source: give pump_wavelength or pump_center, not both")
    if 'inequality' in sections['analysis'] and sections['analysis']['inequality'].replace('-', '_') not in ('conditional', 'sum_diff'):
        raise ConfigError("analysis.inequality must be conditional or sum-diff")
    return RunConfig(**sections, snapshot=data)


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except FileNotFoundError as exc:
        raise ConfigError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    config = parse_run_config(data)
    logger.info(f"Loaded run configuration {path}")
    return config
