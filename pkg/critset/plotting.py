"""
Figures for experiment reports.

Every function returns a matplotlib Figure; callers save and close it. The
Agg backend is selected at import so runs never need a display.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def score_profile(report):
    """log g^n along the best direction of a criticality report."""
    N = report.window[0]
    n = np.arange(-N, N + 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(n, report.profile, marker=".", color="tab:blue")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.axhline(report.score, color="tab:red", linestyle="--", linewidth=0.8, label=f"score {report.score:.4f}")
    ax.set_xlabel("n")
    ax.set_ylabel(r"$\log g^n(v)$")
    ax.set_title(f"Cocycle profile at ({report.base[0]:.4f}, {report.base[1]:.4f})")
    ax.legend()
    fig.tight_layout()
    return fig


def scan_scores(points, scores, threshold, candidates=()):
    """Sample cloud coloured by criticality score."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if len(points):
        P = np.asarray(points)
        sc = ax.scatter(P[:, 0], P[:, 1], c=scores, s=4, cmap="viridis")
        fig.colorbar(sc, ax=ax, label="score")
    for c in candidates:
        ax.plot(*c.point, marker="x", color="tab:red")
    ax.set_title(f"Criticality scan (threshold {threshold})")
    ax.set_aspect("equal")
    fig.tight_layout()
    return fig


def branches(branch_list, events=(), saddle=None):
    """Manifold branches with their intersection points."""
    colors = {"Unstable": "tab:red", "Stable": "tab:blue"}
    fig, ax = plt.subplots(figsize=(7, 7))
    for br in branch_list:
        P = br.polyline.copy()
        # NaN rows split the line where the branch left the domain
        P = np.insert(P, br.breaks + 1, np.nan, axis=0)
        ax.plot(P[:, 0], P[:, 1], linewidth=0.7, color=colors[br.kind.value], label=f"{br.kind.value}/{br.side.value}")
    if len(events):
        E = np.array([e.point for e in events])
        ax.scatter(E[:, 0], E[:, 1], s=12, color="black", zorder=3, label="intersections")
    if saddle is not None:
        ax.plot(*saddle, marker="o", color="black")
    ax.set_aspect("equal")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return fig


def pliss(seq, gamma1, times):
    """Partial sums of log a_i - log gamma1 with the Pliss times marked."""
    C = np.cumsum(np.log(seq) - np.log(gamma1))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(C, color="tab:blue")
    ax.scatter(times, C[times], color="tab:red", s=10, zorder=3, label="Pliss times")
    ax.set_xlabel("index")
    ax.set_ylabel(r"$\sum (\log a_i - \log \gamma_1)$")
    ax.legend()
    fig.tight_layout()
    return fig


def iterate_scores(scores, critical_iterate):
    """Window scores of the iterates along a tangency orbit."""
    n, s = zip(*scores) if scores else ((), ())
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(n, s, marker=".", color="tab:blue")
    ax.axvline(critical_iterate, color="tab:red", linestyle="--", label="critical iterate")
    ax.set_xlabel("time along the tangency orbit")
    ax.set_ylabel("window score")
    ax.legend()
    fig.tight_layout()
    return fig


def save(fig, path):
    fig.savefig(path, dpi=120)
    plt.close(fig)
