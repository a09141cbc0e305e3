"""Run the pricing study from a config file and print the resulting table.

Usage: python3 scripts/run_pricing.py [configs/pricing.cfg] [--threads N] [--out PATH]
"""

import argparse
import sys

from peergrid.experiments import load_config, resolve_workers, run_study


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("config", nargs="?", default="configs/pricing.cfg")
    parser.add_argument("--threads", type=int)
    parser.add_argument("--out")
    args = parser.parse_args(argv)
    rows, out = run_study(load_config(args.config, "pricing"), resolve_workers(args.threads), args.out)
    cols = list(rows[0])
    print(",".join(cols))
    for row in rows:
        print(",".join("" if row[c] is None else f"{row[c]:.6g}" for c in cols))
    print(f"wrote {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
