#!/usr/bin/env python3
"""Run the whole pipeline on the built-in demo fleet.

Equivalent to:

    voyagekit synth   --out <dir> --seed <seed>
    voyagekit ingest  --out <dir> --seed <seed>
    voyagekit score   --out <dir> --seed <seed>
    voyagekit optimize --plots --out <dir> --seed <seed>
    voyagekit pathid  --out <dir> --seed <seed>
    voyagekit report  --out <dir> --seed <seed>

Outputs land in the --out directory; see report.json for the consolidated
summary.
"""

import argparse
import sys

from voyagekit.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/demo")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    base = ["--out", args.out, "--seed", str(args.seed)]
    steps = [
        ["synth"],
        ["ingest"],
        ["score"],
        ["optimize", "--plots"],
        ["pathid"],
        ["report"],
    ]
    for step in steps:
        code = cli_main([*step, *base])
        if code != 0:
            print(f"step {step[0]} failed with exit code {code}", file=sys.stderr)
            return code
    print(f"\ndone; inspect {args.out}/report.json")
    return 0


if __name__ == "__main__":
    sys.exit(main())
