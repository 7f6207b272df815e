"""Reference filter and peak outputs from scipy for the C++ signal tests."""
import json
import sys

import numpy as np
from scipy import signal

rng = np.random.default_rng(20240611)
cases = []
for k in range(6):
    fs = [50.0, 50.0, 100.0, 32.0, 50.0, 20.0][k]
    n = int(fs * rng.uniform(8, 20))
    t = np.arange(n) / fs
    x = (np.sin(2 * np.pi * rng.uniform(0.8, 2.4) * t)
         + 0.4 * np.sin(2 * np.pi * rng.uniform(3, 8) * t)
         + 0.2 * rng.standard_normal(n) + rng.uniform(-1, 1))
    lo, hi = 0.5, min(3.0, fs / 2 - 1)
    sos = signal.butter(2, [lo, hi], btype="bandpass", fs=fs, output="sos")
    y = signal.sosfiltfilt(sos, x)
    distance = int(np.ceil(0.3 * fs))
    peaks, _ = signal.find_peaks(y, distance=distance, prominence=0.3)
    wlen = int(np.ceil(1.0 * fs))
    windowed, _ = signal.find_peaks(y, distance=distance, prominence=0.3, wlen=wlen)
    cases.append({
        "fs": fs, "low": lo, "high": hi, "x": x.tolist(),
        "sos": sos.tolist(), "filtered": y.tolist(),
        "distance": distance, "prominence": 0.3, "peaks": peaks.tolist(),
        "wlen": wlen, "peaks_windowed": windowed.tolist(),
    })

json.dump({"cases": cases}, open(sys.argv[1], "w"))
