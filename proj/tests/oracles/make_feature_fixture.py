"""Reference step-duration statistics computed with numpy."""
import json
import sys

import numpy as np

STATS = ["mean", "std", "min", "max", "median", "p5", "p25", "p75", "p95", "iqr"]


def summarize(x):
    p = np.percentile(x, [5, 25, 50, 75, 95], method="linear")
    return [float(np.mean(x)), float(np.std(x)), float(np.min(x)), float(np.max(x)),
            float(p[2]), float(p[0]), float(p[1]), float(p[3]), float(p[4]),
            float(p[3] - p[1])]


rng = np.random.default_rng(7)
series = []
for i in range(1000):
    n = int(rng.integers(3, 240))
    kind = i % 4
    if kind == 0:
        d = rng.normal(0.55, 0.05, n)
    elif kind == 1:
        d = rng.uniform(0.3, 1.2, n)
    elif kind == 2:
        d = 0.4 + rng.gamma(2.0, 0.05, n)
    else:
        d = np.round(rng.normal(0.6, 0.08, n) * 50) / 50
    d = np.clip(d, 0.05, None)
    diffs = np.diff(d)
    names = ["sd_" + s for s in STATS] + ["diff_" + s for s in STATS]
    series.append({"durations": d.tolist(),
                   "features": dict(zip(names, summarize(d) + summarize(diffs)))})

json.dump({"series": series}, open(sys.argv[1], "w"))
