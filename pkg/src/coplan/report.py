"""Matplotlib figures rendered next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def sweep_figures(rows: Sequence[dict], outdir) -> list[Path]:
    """Summary figures for a sweep: goal-reached rate over tau x head start,
    and mean conflict fallbacks by tau per user policy."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    taus = sorted({float(r["tau"]) for r in rows})
    ks = sorted({int(r["headStart"]) for r in rows})
    policies = sorted({r["policy"] for r in rows})

    def reached(row) -> float:
        return 1.0 if str(row["reached"]).lower() == "true" else 0.0

    paths = []

    grid = [[[] for _ in taus] for _ in ks]
    for row in rows:
        i = ks.index(int(row["headStart"]))
        j = taus.index(float(row["tau"]))
        grid[i][j].append(reached(row))
    rates = [[sum(cell) / len(cell) if cell else 0.0 for cell in line] for line in grid]

    fig, ax = plt.subplots(figsize=(6, 4))
    im = ax.imshow(rates, vmin=0.0, vmax=1.0, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(taus)), [f"{t:g}" for t in taus])
    ax.set_yticks(range(len(ks)), [str(k) for k in ks])
    ax.set_xlabel("necessities threshold tau")
    ax.set_ylabel("head start k")
    ax.set_title("goal reached rate")
    for i in range(len(ks)):
        for j in range(len(taus)):
            ax.text(j, i, f"{rates[i][j]:.2f}", ha="center", va="center", color="w")
    fig.colorbar(im, ax=ax)
    path = outdir / "reached_rate.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)

    fig, ax = plt.subplots(figsize=(6, 4))
    for policy in policies:
        ys = []
        for t in taus:
            cells = [
                int(r["conflictFallbacks"])
                for r in rows
                if float(r["tau"]) == t and r["policy"] == policy
            ]
            ys.append(sum(cells) / len(cells) if cells else 0.0)
        ax.plot(taus, ys, marker="o", label=policy)
    ax.set_xlabel("necessities threshold tau")
    ax.set_ylabel("mean conflict fallbacks per game")
    ax.set_title("contradictory intermediate goals by tau")
    ax.legend()
    path = outdir / "conflict_fallbacks.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    paths.append(path)
    return paths


def posterior_figure(posterior_history: Sequence[dict], path) -> Path:
    """Per-word posterior trajectory over the agent's decision points."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = list(posterior_history[0]) if posterior_history else []
    xs = range(len(posterior_history))
    fig, ax = plt.subplots(figsize=(6, 4))
    for label in labels:
        ax.plot(xs, [snap.get(label, 0.0) for snap in posterior_history], marker=".", label=label)
    ax.set_xlabel("agent decision")
    ax.set_ylabel("posterior probability")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("goal posterior over the game")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
