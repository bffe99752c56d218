"""PNG figures for CLI reports (matplotlib, non-interactive backend)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .poly import PolySystem  # noqa: E402


def _curve(ax, F: PolySystem | None, lo, hi):
    """Zero set of a single plane curve drawn as a contour line."""
    if F is None or F.num_vars != 2 or F.codim != 1:
        return
    xs = np.linspace(lo[0], hi[0], 400)
    ys = np.linspace(lo[1], hi[1], 400)
    XX, YY = np.meshgrid(xs, ys)
    pts = np.stack([XX.ravel(), YY.ravel()], axis=1).astype(complex)
    Z = F.compiled.values(pts)[:, 0].real.reshape(XX.shape)
    ax.contour(XX, YY, Z, levels=[0.0], colors="0.75", linewidths=0.8)


def _limits(points: np.ndarray, pad: float = 0.05):
    lo, hi = points.min(axis=0), points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    return lo - pad * span, hi + pad * span


def _save(fig, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def plot_sample(points: np.ndarray, kind: np.ndarray, path, F: PolySystem | None = None, title: str = ""):
    """Scatter of the sample (first two coordinates), basic and extra points coloured apart."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if len(points):
        lo, hi = _limits(points[:, :2])
        _curve(ax, F, lo, hi)
        basic = kind == 0
        ax.scatter(points[basic, 0], points[basic, 1], s=4, label="basic")
        if np.any(~basic):
            ax.scatter(points[~basic, 0], points[~basic, 1], s=8, marker="x", label="extra")
        ax.legend(loc="upper right")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title or f"{len(points)} sample points")
    _save(fig, path)


def plot_bottlenecks(pairs, path, F: PolySystem | None = None, highlight: float | None = None):
    """Bottleneck pairs as segments; the narrowest ones in red."""
    fig, ax = plt.subplots(figsize=(6, 6))
    if pairs:
        allp = np.array([p for a, b, _ in pairs for p in (a[:2], b[:2])])
        lo, hi = _limits(allp, 0.15)
        _curve(ax, F, lo, hi)
        for a, b, r in pairs:
            red = highlight is not None and abs(r - highlight) < 1e-9
            ax.plot([a[0], b[0]], [a[1], b[1]], "-", color="tab:red" if red else "tab:blue",
                    lw=1.6 if red else 0.7)
            ax.plot([a[0], b[0]], [a[1], b[1]], ".", color="k", ms=3)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(f"{len(pairs)} bottleneck pairs")
    _save(fig, path)


def plot_eta(etas: np.ndarray, path, epsilon: float | None = None):
    fig, ax = plt.subplots(figsize=(6, 4))
    etas = np.asarray(etas, dtype=float)
    spread = np.ptp(etas) if len(etas) else 0.0
    ax.hist(etas, bins=60 if spread > 1e-9 * max(abs(etas).max(initial=0.0), 1e-300) else 1)
    if epsilon is not None:
        ax.axvline(epsilon, color="tab:red", ls="--", label="epsilon")
        ax.legend()
    ax.set_xlabel("eta")
    ax.set_ylabel("points")
    _save(fig, path)


def plot_complex(points: np.ndarray, edges, triangles, path, title: str = ""):
    """1-skeleton and triangles of a complex, projected to the first two coordinates."""
    fig, ax = plt.subplots(figsize=(6, 6))
    P = np.asarray(points)[:, :2] if len(points) else np.zeros((0, 2))
    for a, b, c in triangles:
        ax.fill(P[[a, b, c], 0], P[[a, b, c], 1], color="tab:orange", alpha=0.15, lw=0)
    for a, b in edges:
        ax.plot(P[[a, b], 0], P[[a, b], 1], "-", color="tab:blue", lw=0.4)
    if len(P):
        ax.scatter(P[:, 0], P[:, 1], s=4, color="k", zorder=3)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_title(title)
    _save(fig, path)
