"""
CSV Service
===========
Schema-checked reading and manifest-stamped writing of the CSV files the
pipeline exchanges (filter profiles, joint counts, timing histograms,
coarse-grained tables).

Comment lines starting with ``#`` are skipped on read. Written files start
with a ``# manifest <digest>`` line when a digest is supplied.
"""
import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import SchemaError

logger = logging.getLogger(__name__)


def _data_line_numbers(path: Path) -> list[int]:
    with path.open(encoding='utf-8') as fh:
        return [
            i for i, line in enumerate(fh, start=1)
            if line.strip() and not line.lstrip().startswith('#')
        ]


def read_table(
    path: str | Path,
    columns: Sequence[str],
    *,
    integer_columns: Sequence[str] = (),
    non_negative: Sequence[str] = (),
) -> pd.DataFrame:
    """Read ``path`` and check that it has exactly ``columns``, all numeric.

    Errors carry the 1-based line number of the offending row in the file.
    """
    path = Path(path)
    if not path.is_file():
        raise SchemaError(f"{path}: file not found")

    lines = _data_line_numbers(path)
    if not lines:
        raise SchemaError(f"{path}: no header row", line=1)

    try:
        frame = pd.read_csv(path, comment='#', skipinitialspace=True, skip_blank_lines=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc

    found = [str(c).strip() for c in frame.columns]
    if found != list(columns):
        raise SchemaError(
            f"{path}: header should be {','.join(columns)}, found {','.join(found)}",
            line=lines[0],
        )
    frame.columns = found

    for col in columns:
        numeric = pd.to_numeric(frame[col], errors='coerce')
        bad = numeric.isna() | ~np.isfinite(numeric.fillna(0.0))
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SchemaError(f"{path}: column {col} is not a finite number", line=lines[row + 1])
        if col in non_negative and (numeric < 0).any():
            row = int(np.flatnonzero((numeric < 0).to_numpy())[0])
            raise SchemaError(f"{path}: column {col} is negative ({numeric.iloc[row]})", line=lines[row + 1])
        if col in integer_columns:
            fractional = numeric != np.round(numeric)
            if fractional.any():
                row = int(np.flatnonzero(fractional.to_numpy())[0])
                raise SchemaError(f"{path}: column {col} must be an integer ({numeric.iloc[row]})", line=lines[row + 1])
        frame[col] = numeric

    frame.attrs['line_numbers'] = lines[1:]
    logger.debug(f"Read {len(frame)} rows from {path}")
    return frame


def read_comments(path: str | Path) -> dict[str, str]:
    """Collect leading ``# key value`` comment lines (the manifest line included)."""
    found = {}
    with Path(path).open(encoding='utf-8') as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped:
                continue
            if not stripped.startswith('#'):
                break
            key, _, value = stripped.lstrip('#').strip().partition(' ')
            if key:
                found[key] = value.strip()
    return found


def write_table(
    path: str | Path,
    frame: pd.DataFrame,
    digest: str | None = None,
    comments: dict[str, object] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as fh:
        if digest:
            fh.write(f"# manifest {digest}\n")
        for key, value in (comments or {}).items():
            fh.write(f"# {key} {float(value)!r}\n" if isinstance(value, float) else f"# {key} {value}\n")
        frame.to_csv(fh, index=False, float_format='%.17g')
    logger.info(f"📄 Wrote {path} ({len(frame)} rows)")
    return path
