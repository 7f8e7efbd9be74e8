#!/usr/bin/env python3
"""Plot a `rebalplan bench` CSV: extra cost vs the best plan, delta-steps and generated nodes."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path, newline="") as f:
        return [r for r in csv.DictReader(f) if r["cost_minor"]]


def best_by_task(rows):
    best = {}
    for r in rows:
        key = (int(r["cost_minor"]), int(r["length"]))
        best[r["task_id"]] = min(best.get(r["task_id"], key), key)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--out", default="bench.png")
    args = ap.parse_args()

    rows = load(args.csv)
    best = best_by_task(rows)
    algos = sorted({r["algorithm"] for r in rows})
    sizes = sorted({int(r["size"]) for r in rows})

    extra = defaultdict(list)
    delta = defaultdict(lambda: defaultdict(int))
    nodes = defaultdict(list)
    for r in rows:
        c, l = best[r["task_id"]]
        extra[(r["algorithm"], int(r["size"]))].append((int(r["cost_minor"]) - c) / 100)
        delta[r["algorithm"]][int(r["length"]) - l] += 1
        if r["generated_nodes"]:
            nodes[(r["algorithm"], int(r["size"]))].append(int(r["generated_nodes"]))

    fig, axes = plt.subplots(1, 3, figsize=(16, 4.5))
    width = 0.8 / len(algos)
    for i, a in enumerate(algos):
        data = [extra[(a, s)] or [0] for s in sizes]
        pos = [k + i * width for k in range(len(sizes))]
        axes[0].boxplot(data, positions=pos, widths=width * 0.9, showfliers=False)
        axes[0].plot([], label=a)
    axes[0].set_xticks([k + 0.4 - width / 2 for k in range(len(sizes))], [str(s) for s in sizes])
    axes[0].set_xlabel("holdings")
    axes[0].set_ylabel("extra cost vs best")
    axes[0].legend()

    steps = sorted({d for a in algos for d in delta[a]})
    for i, a in enumerate(algos):
        axes[1].bar([s + i * width for s in steps], [delta[a][s] for s in steps], width=width, label=a)
    axes[1].set_xlabel("delta steps vs shortest best plan")
    axes[1].set_ylabel("plans")
    axes[1].legend()

    for a in sorted({a for a, _ in nodes}):
        xs = [s for s in sizes if nodes[(a, s)]]
        med = [sorted(nodes[(a, s)])[len(nodes[(a, s)]) // 2] for s in xs]
        axes[2].plot(xs, med, marker="o", label=a)
    axes[2].set_yscale("log")
    axes[2].set_xlabel("holdings")
    axes[2].set_ylabel("median generated nodes")
    axes[2].legend()

    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
