#!/usr/bin/env python3
"""Write the Wisconsin Diagnostic Breast Cancer data (569 x 30) as CSV.

Uses the copy bundled with scikit-learn, so no network access is needed.
The label (M or B) is the last column. Exits 0 without writing anything when
scikit-learn is missing, so callers can treat the file as optional.
"""
import csv
import os
import sys


def main() -> int:
    if len(sys.argv) != 2:
        print("usage: export_wdbc.py OUT.csv", file=sys.stderr)
        return 2
    out = sys.argv[1]
    try:
        from sklearn.datasets import load_breast_cancer
    except ImportError:
        print("scikit-learn not available; WDBC not exported")
        return 0
    data = load_breast_cancer()
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    # sklearn encodes malignant as 0, benign as 1
    names = {0: "M", 1: "B"}
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([n.replace(" ", "_") for n in data.feature_names] + ["diagnosis"])
        for row, target in zip(data.data, data.target):
            w.writerow([repr(float(v)) for v in row] + [names[int(target)]])
    print(f"wrote {len(data.target)} rows to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
