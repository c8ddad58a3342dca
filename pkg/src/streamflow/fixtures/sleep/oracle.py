"""Data generator and independent golden generator for the sleep fixture.

Two houses each hold two wearables.  Every house writes one CSV of
``time,uid,angle`` samples; wearable ``b`` in house 1 reports a constant
angle and a few samples of the others are blank.  The golden is computed by
brute force straight from the raw rows: each 5 s mean is a fresh scan of
the samples in ``(s - 5 s, s]`` and each 300 s estimate a fresh scan of the
5 s means in ``(t - 300 s, t]``.  A mean is the exactly summed, once rounded
total divided by the count.

    python oracle.py            # rewrites data/*.csv and golden/inactivity_300s.json
"""
import csv
import json
import random
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

HERE = Path(__file__).resolve().parent

T0 = int(datetime(2016, 6, 1, tzinfo=timezone.utc).timestamp()) * 1000
SPAN = 1_200_000
SHORT, LONG, STRIDE = 5_000, 300_000, 60_000
CONSTANT = 12.5

# uid -> (first offset ms, period ms); offsets keep timestamps unique per house
WEARABLES = {
    "1": {"a": (0, 1000), "b": (500, 1000)},
    "2": {"c": (250, 1000), "d": (600, 2000)},
}


def rfc3339(ms):
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ms % 1000:03d}Z"


def to_ms(text):
    dt = datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)
    return int(dt.timestamp()) * 1000 + dt.microsecond // 1000


def generate(seed=7):
    rng = random.Random(seed)
    for house, wearables in WEARABLES.items():
        rows = []
        for uid, (offset, period) in wearables.items():
            t = T0 + offset + period
            while t <= T0 + SPAN:
                if uid == "b":
                    angle = str(CONSTANT)
                elif rng.random() < 0.02:
                    angle = ""
                else:
                    angle = f"{rng.uniform(-90, 90):.2f}"
                rows.append((t, uid, angle))
                t += period
        rows.sort()
        with open(HERE / "data" / f"house_{house}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "uid", "angle"])
            for t, uid, angle in rows:
                w.writerow([rfc3339(t), uid, angle])


def mean(values):
    return float(sum((Fraction(v) for v in values), Fraction(0))) / len(values) if values else None


def golden():
    out = {}
    for house in sorted(WEARABLES):
        samples = {}
        with open(HERE / "data" / f"house_{house}.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                if row["angle"].strip():
                    samples.setdefault(row["uid"], []).append((to_ms(row["time"]), float(row["angle"])))
        for uid in sorted(samples):
            pts = samples[uid]
            series = []
            for t in range(T0 + STRIDE, T0 + SPAN + 1, STRIDE):
                shorts = []
                for s in range(t - LONG + SHORT, t + 1, SHORT):
                    m = mean([v for ts, v in pts if s - SHORT < ts <= s])
                    if m is not None:
                        shorts.append(m)
                series.append([rfc3339(t), mean(shorts)])
            out[f"inactivity_300s(house={house})(wearable={uid})"] = series
    return out


def main():
    (HERE / "data").mkdir(exist_ok=True)
    (HERE / "golden").mkdir(exist_ok=True)
    generate()
    path = HERE / "golden" / "inactivity_300s.json"
    path.write_text(json.dumps(golden(), indent=0) + "\n")
    print(path)


if __name__ == "__main__":
    main()
