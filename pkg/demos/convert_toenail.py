"""Convert a public copy of the toenail trial data to the package layout.

Two common distributions are recognised by their columns:

  * R packages (HSAUR, HSAUR2/3): ID, outcome ("none or mild" /
    "moderate or severe"), treatment ("itraconazole" / "terbinafine"),
    time, visit
  * the longitudinal-data textbook file: idnum, infect (1 = moderate or
    severe), treat (0/1), month, visit

Output columns: id, time (nominal week of the visit: 0, 4, 8, 12, 24, 36,
48), y (1 = none or mild), trt (1 = terbinafine, treatment B).  Load it
with time_factor 0.25 to get months.

usage: python convert_toenail.py input.csv output.csv
"""

import csv
import sys

WEEKS = {1: 0, 2: 4, 3: 8, 4: 12, 5: 24, 6: 36, 7: 48}


def convert(rows):
    for r in rows:
        r = {k.strip().strip('"').lower(): v.strip().strip('"') for k, v in r.items() if k}
        visit = int(float(r["visit"]))
        if "outcome" in r:
            sid, y = r["id"], int(r["outcome"].lower().startswith("none"))
            trt = int(r["treatment"].lower().startswith("terb"))
        else:
            sid, y, trt = r["idnum"], 1 - int(float(r["infect"])), int(float(r["treat"]))
        yield sid, WEEKS[visit], y, trt


def main(src, dst):
    with open(src, newline="") as fh, open(dst, "w", newline="") as out:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["id", "time", "y", "trt"])
        n = 0
        for row in convert(csv.DictReader(fh)):
            w.writerow(row)
            n += 1
    print(f"wrote {n} rows to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(*sys.argv[1:])
