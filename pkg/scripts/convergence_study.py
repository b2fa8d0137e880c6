#!/usr/bin/env python3
"""Refinement studies with printed error tables and observed orders.

    python scripts/convergence_study.py --study mms
    python scripts/convergence_study.py --study transport --levels 32,64,128
"""

import argparse
import sys

from vpsep.studies import mms_phase_field_study, transport_translation_study


def print_table(name, study, expect):
    print(f"{name} (expect order about {expect})")
    print(f"  {'n':>5}  {'L2 error':>12}  {'order':>6}")
    for k, n in enumerate(study.levels):
        order = f"{study.orders[k - 1]:6.3f}" if k else "     -"
        print(f"  {n:>5}  {study.errors[k]:12.5e}  {order}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--study", choices=("mms", "transport", "both"),
                        default="both")
    parser.add_argument("--levels", default=None,
                        help="comma-separated mesh sizes")
    args = parser.parse_args(argv)
    levels = (tuple(int(v) for v in args.levels.split(","))
              if args.levels else None)

    if args.study in ("mms", "both"):
        study = mms_phase_field_study(levels=levels or (16, 32, 64))
        print_table("manufactured solution, fourth-order sublimit", study, 2)
    if args.study in ("transport", "both"):
        study = transport_translation_study(levels=levels or (32, 64, 128))
        print_table("semi-Lagrangian translation", study, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
