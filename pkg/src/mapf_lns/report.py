"""Figures for benchmark reports, written next to the result files."""

from __future__ import annotations

import statistics
from collections import defaultdict
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bench import BenchRun  # noqa: E402

COLORS = {"sequential": "tab:gray", "drop": "tab:red", "sync": "tab:blue", "deta": "tab:green"}
LABELS = {"sequential": "MAPF-LNS", "drop": "DROP-LNS", "sync": "SYNC-LNS", "deta": "DETA-LNS"}


def plot_convergence(runs: Sequence[BenchRun], k: int, path: Path) -> Path:
    """Sum of delays of the best-known solution against runtime, one curve per run."""
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    seen = set()
    for run in runs:
        if run.row.k != k or run.log is None or not run.log.improvements:
            continue
        ev = run.log.improvements
        xs = [e.time for e in ev] + [run.log.budget]
        ys = [e.sum_of_delays for e in ev] + [ev[-1].sum_of_delays]
        algo = run.row.algorithm
        ax.step(
            xs, ys, where="post", color=COLORS.get(algo), alpha=0.6, lw=1,
            label=None if algo in seen else LABELS.get(algo, algo),
        )
        seen.add(algo)
    ax.set_xlabel("runtime (s)")
    ax.set_ylabel("sum of delays")
    ax.set_title(f"k = {k}")
    if seen:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_summary(runs: Sequence[BenchRun], path: Path) -> Path:
    """Median suboptimality and NPO* per algorithm, grouped by agent count."""
    med_sub: dict[tuple[int, str], float] = {}
    med_npo: dict[tuple[int, str], float] = {}
    groups = defaultdict(list)
    for run in runs:
        if run.row.suboptimality is not None:
            groups[(run.row.k, run.row.algorithm)].append(run.row)
    for key, rows in groups.items():
        med_sub[key] = statistics.median(r.suboptimality for r in rows)
        med_npo[key] = statistics.median(r.npo_total for r in rows)
    ks = sorted({k for k, _ in groups})
    algos = [a for a in LABELS if any((k, a) in groups for k in ks)]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    width = 0.8 / max(1, len(algos))
    for j, algo in enumerate(algos):
        xs = [i + j * width for i in range(len(ks))]
        ax1.bar(xs, [med_sub.get((k, algo), 0) for k in ks], width, color=COLORS[algo], label=LABELS[algo])
        ax2.bar(xs, [med_npo.get((k, algo), 0) for k in ks], width, color=COLORS[algo])
    for ax, label in ((ax1, "median suboptimality"), (ax2, "median NPO*")):
        ax.set_xticks([i + 0.4 - width / 2 for i in range(len(ks))])
        ax.set_xticklabels([str(k) for k in ks])
        ax.set_xlabel("agents")
        ax.set_ylabel(label)
    if algos:
        ax1.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_figures(runs: Sequence[BenchRun], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    made = [plot_summary(runs, out_dir / "summary.png")]
    for k in sorted({r.row.k for r in runs}):
        made.append(plot_convergence(runs, k, out_dir / f"convergence_k{k}.png"))
    return made
