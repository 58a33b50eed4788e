#!/usr/bin/env python3
"""Run every bundled program under each scheduler and tabulate the outcomes.

The digest column must agree across schedulers per program; a trailing check
enforces it so the script doubles as a quick end-to-end smoke test.
"""

import argparse
import sys

from stationflow import engine, harness, state


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=3,
                    help="seeds per randomized scheduler (default 3)")
    ap.add_argument("--fuel", type=int, default=1_000_000)
    args = ap.parse_args()

    rows = []
    disagreements = []
    for name in harness.RUNNABLE:
        prog = harness.corpus_program(name)
        digests = set()
        for scheduler, seeds in (("eager", [0]),
                                 ("random", range(args.seeds)),
                                 ("tlo-random", range(args.seeds))):
            for seed in seeds:
                r = engine.run(state.init(prog), scheduler=scheduler,
                               seed=seed, fuel=args.fuel)
                digest = (state.terminal_digest(r.config)[:12]
                          if r.status == "terminal" else "-")
                digests.add(digest)
                rows.append((name, scheduler, seed, r.status, r.steps, digest))
        if len(digests) != 1:
            disagreements.append(name)

    w = max(len(r[0]) for r in rows)
    print(f"{'program':{w}}  {'scheduler':10}  seed  {'status':8}  steps  digest")
    for name, scheduler, seed, status, steps, digest in rows:
        print(f"{name:{w}}  {scheduler:10}  {seed:4}  {status:8}  {steps:5}  {digest}")

    if disagreements:
        print(f"\nDIVERGED: {', '.join(disagreements)}", file=sys.stderr)
        return 1
    print(f"\nall {len(harness.RUNNABLE)} programs agree across schedulers")
    return 0


if __name__ == "__main__":
    sys.exit(main())
