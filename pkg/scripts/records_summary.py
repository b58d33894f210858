#!/usr/bin/env python3
"""Summarize a sweep records file: score distribution, best cells, both
selection rules.

    python scripts/records_summary.py --records run/records.jsonl [--top 10]
"""
import argparse
import sys

from topiclab.errors import EmptySelectionError
from topiclab.sweep import load_records, select_diverse, select_top


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--records", required=True)
    parser.add_argument("--top", type=int, default=10)
    args = parser.parse_args()

    records = load_records(args.records)
    scored = [r for r in records if not r.failed]
    failed = [r for r in records if r.failed]
    print(f"{len(records)} cells: {len(scored)} scored, {len(failed)} failed")
    if failed:
        reasons = {}
        for r in failed:
            key = r.failed_reason.split("(")[0].strip()
            reasons[key] = reasons.get(key, 0) + 1
        for reason, count in sorted(reasons.items(), key=lambda kv: -kv[1]):
            print(f"  {count:4d}x {reason}")
    if not scored:
        return 1

    print(f"\nbest {args.top} cells by DBCV:")
    header = f"{'dbcv':>7} {'#clu':>5} {'noise':>6}  params"
    print(header)
    for r in sorted(scored, key=lambda r: -r.dbcv)[: args.top]:
        mark = " (O)" if r.has_outlier else ""
        print(f"{r.dbcv:7.4f} {r.n_clusters:4d}{mark:4} {r.n_noise:5d}  {r.params}")

    top = select_top(records)
    print(f"\nselect_top     -> dbcv={top.dbcv:.4f} clusters={top.n_clusters} {top.params}")
    try:
        diverse = select_diverse(records)
        print(f"select_diverse -> dbcv={diverse.dbcv:.4f} clusters={diverse.n_clusters} "
              f"{diverse.params}")
    except EmptySelectionError as exc:
        print(f"select_diverse -> none ({exc})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
