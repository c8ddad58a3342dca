"""Independent golden generator for the sea_ice fixture.

Parses the CSV with the csv module only, reads each cell as a double and
sums the row exactly with fractions, rounding once.  Run from anywhere:

    python oracle.py            # rewrites golden/sea_ice_sum.json
"""
import csv
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent


def to_ms(text):
    dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    return int(dt.timestamp()) * 1000 + dt.microsecond // 1000


def rfc3339(ms):
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ms % 1000:03d}Z"


def golden(csv_path):
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            total = sum((Fraction(float(cell)) for cell in row[1:] if cell.strip()), Fraction(0))
            rows.append((to_ms(row[0]), float(total)))
    rows.sort()
    return {"sea_ice_sum": [[rfc3339(t), v] for t, v in rows]}


def main(argv):
    csv_path = Path(argv[1]) if len(argv) > 1 else HERE / "data" / "sea_ice.csv"
    out = HERE / "golden" / "sea_ice_sum.json"
    out.write_text(json.dumps(golden(csv_path)) + "\n")
    print(out)


if __name__ == "__main__":
    main(sys.argv)
