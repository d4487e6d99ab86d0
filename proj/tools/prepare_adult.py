#!/usr/bin/env python3
"""Prepare the UCI Adult census file for the income case study.

Reads the raw comma-separated records (adult.data from the UCI repository,
no header), keeps the education/occupation/income columns, drops rows with a
missing value in any of them, and writes one directory containing:

  graph.txt   education -> occupation -> income triangle
  old.csv     rows for women
  new.csv     rows for men

Point the attribution tool or the acceptance gate (--census-dir, or the
CENSUS_DATA_DIR environment variable for ctest) at that directory.
"""

import argparse
import csv
import sys
from pathlib import Path

# Field positions in the raw record.
EDUCATION, OCCUPATION, SEX, INCOME = 3, 6, 9, 14
MISSING = "?"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("adult_data", type=Path, help="raw adult.data file")
    parser.add_argument(
        "--out-dir",
        type=Path,
        default=Path("census"),
        help="output directory (default: ./census)",
    )
    args = parser.parse_args()

    rows = {"Female": [], "Male": []}
    dropped = 0
    with args.adult_data.open(newline="") as handle:
        for record in csv.reader(handle):
            if not record:
                continue
            fields = [f.strip() for f in record]
            # adult.test writes income with a trailing period; tolerate it.
            fields[INCOME] = fields[INCOME].rstrip(".")
            used = [fields[EDUCATION], fields[OCCUPATION], fields[INCOME]]
            if MISSING in used or fields[SEX] not in rows:
                dropped += 1
                continue
            rows[fields[SEX]].append(used)

    kept = sum(len(v) for v in rows.values())
    if kept == 0:
        print("no usable rows found; is this the raw adult.data file?", file=sys.stderr)
        return 1

    categories = [sorted({r[c] for group in rows.values() for r in group}) for c in range(3)]
    for cats in categories:
        bad = [c for c in cats if "," in c or '"' in c]
        if bad:
            print(f"category values unsafe for csv output: {bad}", file=sys.stderr)
            return 1

    args.out_dir.mkdir(parents=True, exist_ok=True)
    graph = args.out_dir / "graph.txt"
    with graph.open("w") as handle:
        for name, cats in zip(("education", "occupation", "income"), categories):
            handle.write(f"node {name} categorical {','.join(cats)}\n")
        handle.write("education -> occupation\n")
        handle.write("education -> income\n")
        handle.write("occupation -> income\n")

    for sex, filename in (("Female", "old.csv"), ("Male", "new.csv")):
        with (args.out_dir / filename).open("w") as handle:
            handle.write("education,occupation,income\n")
            for r in rows[sex]:
                handle.write(",".join(r) + "\n")

    print(
        f"kept {kept} rows ({len(rows['Female'])} women -> old.csv, "
        f"{len(rows['Male'])} men -> new.csv), dropped {dropped}; wrote {args.out_dir}/"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
