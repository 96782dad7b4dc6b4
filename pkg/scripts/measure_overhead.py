#!/usr/bin/env python3
"""Measure multilingual-pipeline overhead against the English-only bypass.

Both paths run the same fixed-service-time generator stub, so the delta is
purely the classify/normalize/plan stages. Flags pass through to
`finlingua overhead` (--requests, --service-time, --concurrency).
"""

import sys

from finlingua.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["overhead", *sys.argv[1:]]))
