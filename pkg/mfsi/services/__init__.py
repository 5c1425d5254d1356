"""Service-layer helpers: mode runners and result writers."""

from .report_service import version_string, write_csv, write_report
from .run_service import (
    MODE_RUNNERS,
    run,
    run_decouple_check,
    run_mms_verify,
    run_resolvent,
    run_solve,
    run_spectrum,
)

__all__ = [
    "MODE_RUNNERS",
    "run",
    "run_decouple_check",
    "run_mms_verify",
    "run_resolvent",
    "run_solve",
    "run_spectrum",
    "version_string",
    "write_csv",
    "write_report",
]
