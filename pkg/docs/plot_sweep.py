"""Plot ``sweep.csv`` and ``error_curve_b*.csv`` outputs (requires matplotlib).

    python3 docs/plot_sweep.py out/sweep.csv [out/error_curve_b1.csv ...]
"""

import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_sweep(path):
    curves = defaultdict(list)
    for r in rows(path):
        if r["avg_error"]:
            curves[(r["policy"], r["buffer"])].append((float(r["p"]), float(r["avg_error"]), float(r["stderr"])))
    fig, ax = plt.subplots()
    for (policy, b), pts in sorted(curves.items()):
        pts.sort()
        ax.errorbar([x for x, _, _ in pts], [y for _, y, _ in pts], yerr=[2 * s for _, _, s in pts],
                    marker="o", capsize=2, label=f"{policy}, b={b}")
    ax.set_xlabel("success probability p")
    ax.set_ylabel("average estimation error")
    ax.legend()
    out = path.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print("wrote", out)


def plot_curve(path):
    data = rows(path)
    fig, ax = plt.subplots()
    x = [int(r["delta_1"]) for r in data]
    ax.plot(x, [float(r["error_b1"] if "error_b1" in r else r["error"]) for r in data], marker=".", label="b=1")
    if "error_b1" in data[0]:
        pts = [(int(r["delta_1"]), float(r["error"])) for r in data if r["error"]]
        ax.plot(*zip(*pts), marker="s", linestyle="none", label="b=2")
    ax.set_xlabel("age of the freshest packet")
    ax.set_ylabel("estimation error")
    ax.legend()
    out = path.rsplit(".", 1)[0] + ".png"
    fig.savefig(out, dpi=150)
    print("wrote", out)


if __name__ == "__main__":
    for arg in sys.argv[1:]:
        with open(arg) as fh:
            header = fh.readline()
        (plot_curve if header.startswith("delta_1") else plot_sweep)(arg)
