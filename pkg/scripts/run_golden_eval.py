#!/usr/bin/env python3
"""Run the golden conversation suite and print the report.

Exit code 0 only when plan, language, and grounding are all at 100%, so
this is safe to drop into CI as-is. Flags pass through to `finlingua eval
run` (--suite, --mode, --format, --report).
"""

import sys

from finlingua.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["eval", "run", *sys.argv[1:]]))
