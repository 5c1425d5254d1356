"""``mfsi <mode> --config <path> [--set key=value ...] [--out <dir>] [--workers N]``"""
from __future__ import annotations

import argparse
from dataclasses import replace
from typing import List, Optional, Sequence

from mfsi.config.run_config import MODES, load_config
from mfsi.errors import ConfigValidationError
from mfsi.services.run_service import run
from mfsi.utils.logger import AppLogger

logger = AppLogger.get_logger(__name__)

EXIT_CODES = {
    "ok": 0,
    "solver-error": 1,
    "config-invalid": 2,
    "picard-divergence": 3,
    "picard-maxit": 4,
    "smallness-violation": 5,
    "singular-system": 6,
    "unsupported-dimension": 7,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mfsi",
        description="Time-periodic multilayered fluid-structure interaction: solver and operator diagnostics.",
    )
    parser.add_argument("mode", choices=MODES, help="run mode")
    parser.add_argument("--config", default=None, help="JSON experiment configuration")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one configuration key, e.g. --set geometry.n_h=16 (repeatable)",
    )
    parser.add_argument("--out", default=None, help="output directory for report.json and CSV files")
    parser.add_argument("--workers", type=int, default=None, help="worker threads (default: available cores)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """コマンドラインから 1 モードを実行し、終了コードを返す。"""
    args = build_parser().parse_args(argv)
    overrides: List[str] = list(args.overrides)
    if args.workers is not None:
        overrides.append(f"workers={args.workers}")

    try:
        config = load_config(args.config, overrides)
    except ConfigValidationError as exc:
        for violation in exc.violations:
            logger.error("Invalid configuration: %s", violation)
        return EXIT_CODES[exc.reason]

    config = replace(config, mode=args.mode)
    success, reason, _ = run(config, args.out)
    if not success:
        logger.error("mfsi %s failed: %s", args.mode, reason)
    return EXIT_CODES.get(reason, EXIT_CODES["solver-error"])


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
