#!/usr/bin/env python3
"""Fetch the public ratings file used by the opt-in refit tests.

Downloads the published forced-choice answers CSV into
``data/mucped23/answers.csv`` (relative to the repository root).  The
test suite skips the public-data acceptance test while this file is
absent, so running this script is the single opt-in step.

Usage: python3 scripts/fetch_ratings.py [--dest PATH] [--url URL]
"""

from __future__ import annotations

import argparse
import sys
import urllib.request
from pathlib import Path

DEFAULT_URL = ("https://raw.githubusercontent.com/google-research/"
               "google-research/master/mucped23/answers.csv")
DEFAULT_DEST = Path(__file__).resolve().parents[1] / "data" / "mucped23" / "answers.csv"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--url", default=DEFAULT_URL)
    parser.add_argument("--dest", type=Path, default=DEFAULT_DEST)
    parser.add_argument("--force", action="store_true",
                        help="redownload even if the file exists")
    args = parser.parse_args(argv)

    if args.dest.exists() and not args.force:
        print(f"already fetched: {args.dest} "
              f"({args.dest.stat().st_size} bytes); use --force to refresh")
        return 0

    print(f"fetching {args.url}")
    try:
        with urllib.request.urlopen(args.url, timeout=60) as response:
            payload = response.read()
    except OSError as exc:
        print(f"error: download failed: {exc}", file=sys.stderr)
        return 1

    if not payload or b"," not in payload.splitlines()[0]:
        print("error: response does not look like a CSV", file=sys.stderr)
        return 1

    args.dest.parent.mkdir(parents=True, exist_ok=True)
    args.dest.write_bytes(payload)
    lines = payload.count(b"\n")
    print(f"wrote {args.dest} ({len(payload)} bytes, ~{lines} rows)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
