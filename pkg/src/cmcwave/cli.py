"""``cmcwave <command> --config <path> [--seed N] [--out DIR] [--threads N]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .harness import COMMANDS, ConfigError, RunConfig, replay, run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cmcwave", description="Numerical experiments for the wave CMC equation.")
    ap.add_argument("command", choices=COMMANDS + ("replay",))
    ap.add_argument("report", nargs="?", help="report.json to re-execute (replay only)")
    ap.add_argument("--config", type=Path, help="JSON config; defaults are used for missing fields")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", type=Path, help="output directory (default runs/<command>)")
    ap.add_argument("--threads", type=int, default=1, help="FFT worker threads")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("usage error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.command == "replay":
            if not args.report:
                print("usage error: replay needs a report path", file=sys.stderr)
                return 2
            rep = replay(args.report, args.out, args.seed, args.threads)
            print(json.dumps(rep.replay, indent=2, sort_keys=True))
            return 0 if rep.passed and rep.replay["matches"] else 1
        raw = json.loads(args.config.read_text()) if args.config else {}
        cfg = RunConfig.build(raw, args.command, args.seed)
        rep = run(cfg, args.out or Path("runs") / args.command, args.threads)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for c in rep.checks:
        tag = "INFO" if c["informational"] else ("PASS" if c["passed"] else "FAIL")
        print(f"{tag} {c['name']}: {c['value']} {c['op']} {c['threshold']}")
    print(f"report: {Path(args.out or Path('runs') / args.command) / 'report.json'}")
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
