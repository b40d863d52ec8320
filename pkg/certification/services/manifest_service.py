"""
ManifestService
===============
Run manifests: which subcommand ran, on which input files (by SHA-256 of
their bytes), with which configuration and tool version.

The manifest digest is the SHA-256 of the canonical JSON (sorted keys,
compact separators) of everything except the timestamp, so re-running with
identical inputs reproduces it.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import entrocert

logger = logging.getLogger(__name__)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(',', ':'), ensure_ascii=False, default=str)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open('rb') as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class Manifest:
    subcommand: str
    inputs: dict[str, str]
    config: dict
    tool_version: str = entrocert.__version__
    created_at: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds'))

    @property
    def digest(self) -> str:
        return sha256_text(canonical_json({
            'subcommand':   self.subcommand,
            'inputs':       self.inputs,
            'config':       self.config,
            'tool_version': self.tool_version,
        }))

    def to_dict(self) -> dict:
        return {
            'subcommand':      self.subcommand,
            'inputs':          dict(self.inputs),
            'config':          self.config,
            'tool_version':    self.tool_version,
            'created_at':      self.created_at,
            'manifest_digest': self.digest,
        }


def build_manifest(subcommand: str, inputs: dict[str, str | Path], config: dict) -> Manifest:
    """Hash every input file; keys are the input roles (e.g. ``timing``, ``bank_a``)."""
    digests = {role: file_digest(path) for role, path in sorted(inputs.items()) if path is not None}
    manifest = Manifest(subcommand, digests, config)
    logger.info(f"Manifest {manifest.digest[:12]} for '{subcommand}' over {len(digests)} input(s)")
    return manifest


def write_json(path: str | Path, data: dict, digest: str | None = None) -> Path:
    """Pretty JSON with a ``manifest_digest`` field when a digest is given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if digest is not None:
        data = {**data, 'manifest_digest': digest}
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n", encoding='utf-8')
    logger.info(f"📄 Wrote {path}")
    return path


def write_manifest(manifest: Manifest, out_dir: str | Path) -> Path:
    return write_json(Path(out_dir) / 'manifest.json', manifest.to_dict())
