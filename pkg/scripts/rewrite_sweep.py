#!/usr/bin/env python3
"""Sweep rewriting schedules for one program and profile what the optimizer
actually did: step counts per seed, how often each rewrite rule fired, and
whether every terminal matched the eager baseline.
"""

import argparse
import sys
from collections import Counter

from stationflow import engine, harness, state


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("program", nargs="?", default="core_social",
                    choices=list(harness.RUNNABLE))
    ap.add_argument("--seeds", type=int, default=25)
    ap.add_argument("--fuel", type=int, default=1_000_000)
    args = ap.parse_args()

    prog = harness.corpus_program(args.program)
    base = engine.run(state.init(prog), scheduler="eager", fuel=args.fuel)
    if base.status != "terminal":
        print(f"eager baseline did not finish: {base.status}", file=sys.stderr)
        return 1
    baseline = state.terminal_digest(base.config)
    print(f"{args.program}: eager baseline {base.steps} steps, "
          f"digest {baseline[:12]}")

    rule_counts: Counter[str] = Counter()
    steps = []
    mismatches = 0
    for seed in range(args.seeds):
        r = engine.run(state.init(prog), scheduler="tlo-random", seed=seed,
                       fuel=args.fuel, trace=True)
        steps.append(r.steps)
        for rec in r.trace:
            if rec.rule == "Opt":
                rule_counts[rec.site.rsplit(":", 1)[1]] += 1
        ok = (r.status == "terminal"
              and state.terminal_digest(r.config) == baseline)
        if not ok:
            mismatches += 1
            print(f"  seed {seed}: MISMATCH ({r.status})", file=sys.stderr)

    print(f"{args.seeds} rewriting schedules: steps min/mean/max = "
          f"{min(steps)}/{sum(steps) / len(steps):.1f}/{max(steps)}")
    if rule_counts:
        total = sum(rule_counts.values())
        print(f"rewrites applied ({total} total):")
        for rule, n in rule_counts.most_common():
            print(f"  {rule:10} {n:5}  {100 * n / total:5.1f}%")
    else:
        print("no rewrites fired")
    if mismatches:
        print(f"\n{mismatches} schedules diverged from eager", file=sys.stderr)
        return 1
    print("all schedules agree with the eager terminal")
    return 0


if __name__ == "__main__":
    sys.exit(main())
