"""Matplotlib figures written next to the CSV/JSON outputs of the report commands."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _style(ax, xlabel, ylabel, title=None):
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title, fontsize=10)
    for side in ("top", "right"):
        ax.spines[side].set_visible(False)
    ax.tick_params(direction="out", length=3)


def new_figure(width=5.0, height=None):
    height = height or width * (math.sqrt(5) - 1) / 2
    fig, ax = plt.subplots(figsize=(width, height), dpi=120)
    return fig, ax


def save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_sublinearity(profile, path):
    fig, ax = new_figure()
    ax.loglog(profile.ns, profile.max_ratio, "o-", label=r"$\max_{|x|\leq n}|\chi|/n$")
    for r, ratios in enumerate(profile.ribbon_ratio):
        ax.loglog(profile.ks, ratios, "s--", ms=4, label=f"ribbon {r}: $|\\chi(z_k)|/k$")
    _style(ax, "n, k (graph steps)", "ratio", "corrector growth")
    ax.legend(frameon=False, fontsize=8)
    return save(fig, path)


def plot_resolvent_scan(scan, path):
    eps, val = zip(*scan)
    fig, ax = new_figure()
    ax.loglog(eps, val, "o-")
    _style(ax, r"$\epsilon$", r"$\epsilon\,\langle|\psi_\epsilon|^2\rangle$", "resolvent diagnostic")
    return save(fig, path)


def plot_endpoints(points, D, path, max_points=5000):
    """Scatter of scaled endpoints with the 1- and 2-sigma ellipses of D."""
    pts = np.asarray(points)[:max_points]
    fig, ax = new_figure(4.5, 4.5)
    ax.plot(pts[:, 0], pts[:, 1], ".", ms=1.5, alpha=0.4, color="0.3")
    w, V = np.linalg.eigh(np.asarray(D))
    t = np.linspace(0, 2 * np.pi, 200)
    circle = np.stack([np.cos(t), np.sin(t)])
    for k in (1, 2):
        ell = (V @ np.diag(k * np.sqrt(np.maximum(w, 0))) @ circle).T
        ax.plot(ell[:, 0], ell[:, 1], "-", lw=1.2, color="C3")
    ax.set_aspect("equal")
    _style(ax, "x", "y", r"endpoints $M_n/\sqrt{n}$ and $D$ ellipses")
    return save(fig, path)


def plot_corrector_influence(report, path):
    md = report.metadata
    fig, ax = new_figure()
    ax.loglog(md["ladder"], md["percentiles"], "o-")
    _style(ax, "n", r"95th pct of $\max_{k\leq n}|\chi(X_k)|/\sqrt{n}$", "corrector influence")
    return save(fig, path)
