"""
Helpers shared by the entrocert management commands.

Exit-code contract of the CLI:
    0  certified (or: every check passed)
    1  not certified
    2  preconditions failed
    3  input error
"""
from pathlib import Path

from django.conf                  import settings
from django.core.management.base import CommandError

EXIT_CERTIFIED     = 0
EXIT_NOT_CERTIFIED = 1
EXIT_PRECONDITIONS = 2
EXIT_INPUT_ERROR   = 3


def add_common_arguments(parser):
    parser.add_argument(
        '--config',
        default=None,
        help='Run configuration JSON (unit-suffixed keys).',
    )
    parser.add_argument(
        '--out',
        default=None,
        help='Output directory. Default: ENTROCERT_OUT_DIR/<subcommand>.',
    )


def resolve_out_dir(out: str | None, subcommand: str) -> Path:
    path = Path(out) if out else Path(settings.ENTROCERT_OUT_DIR) / subcommand
    path.mkdir(parents=True, exist_ok=True)
    return path


def input_error(exc: Exception | str) -> CommandError:
    return CommandError(f"input error: {exc}", returncode=EXIT_INPUT_ERROR)


def box(title: str, rows: list[tuple[str, str]]) -> str:
    body = "".join(f"  {label:<17}: {value}\n" for label, value in rows)
    return f"\n{'═' * 62}\n  {title}\n{'─' * 62}\n{body}{'═' * 62}\n"
