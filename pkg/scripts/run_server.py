#!/usr/bin/env python3
"""Start the HTTP gateway on the bundled dataset.

Thin wrapper over `finlingua serve` for people running from a checkout;
all flags pass through, so `python3 scripts/run_server.py --port 9000
--deterministic` and `finlingua serve --port 9000 --deterministic` are the
same thing.
"""

import sys

from finlingua.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["serve", *sys.argv[1:]]))
