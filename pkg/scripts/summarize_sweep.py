# scripts/summarize_sweep.py

import argparse
import csv
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from aoi_priority.sweep import crossing_point, ratio_at  # noqa: E402


def read_rows(path: str) -> list:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        for raw in csv.DictReader(f):
            row = {}
            for k, v in raw.items():
                if v == "":
                    row[k] = None
                elif v in ("true", "false"):
                    row[k] = v == "true"
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser(description="Crossing point and reference ratio of a sweep CSV")
    parser.add_argument("csv_path")
    parser.add_argument("--a", default="age_u2", help="first curve")
    parser.add_argument("--b", default="sim_age_1", help="second curve")
    parser.add_argument("--at", type=float, default=5.0, help="swept value for the ratio")
    parser.add_argument("--ratio-of", default="sim_age_1")
    parser.add_argument("--ratio-to", default="age_ref")
    args = parser.parse_args()

    rows = read_rows(args.csv_path)
    cross = crossing_point(rows, args.a, args.b)
    ratio = ratio_at(rows, args.at, args.ratio_of, args.ratio_to)

    print(f"points:   {len(rows)}")
    print(f"crossing: {args.a} x {args.b} at {cross if cross is not None else 'none'}")
    print(f"ratio:    {args.ratio_of}/{args.ratio_to} at {args.at} = {ratio if ratio is not None else 'n/a'}")


if __name__ == "__main__":
    main()
