"""Figures written next to run reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.lines import Line2D  # noqa: E402
import numpy as np  # noqa: E402

from .grid import ScalarField  # noqa: E402

PARAMS = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 120,
    "lines.linewidth": 1.2,
}

MODEL_COLOR = "black"
SUPPORT_COLOR = "#d62728"


def violation_history(history, eps_print: float, path: str | Path) -> None:
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.semilogy(np.arange(len(history)), np.maximum(history, 1e-6), color="#1f77b4")
        ax.axhline(eps_print, color="gray", ls="--", lw=0.8, label="tolerance")
        ax.set_xlabel("step")
        ax.set_ylabel("max overhang violation")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def _zero_contour(ax, field_values, axes, color):
    ax.contour(axes[0], axes[1], field_values.T, levels=[0.0], colors=color, linewidths=1.2)


def _legend(ax):
    handles = [Line2D([], [], color=MODEL_COLOR, label="initial"),
               Line2D([], [], color=SUPPORT_COLOR, label="final")]
    ax.legend(handles=handles, frameon=False, loc="upper right")


def contours_2d(field0: ScalarField, field1: ScalarField, path: str | Path, z_min: float | None = None) -> None:
    """Initial (black) and final (red) zero contours of a 2D run."""
    x, y = field0.grid.axes()
    with plt.rc_context(PARAMS):
        fig, ax = plt.subplots(figsize=(4.0, 4.0 * np.ptp(y) / np.ptp(x)))
        _zero_contour(ax, field1.values, (x, y), SUPPORT_COLOR)
        _zero_contour(ax, field0.values, (x, y), MODEL_COLOR)
        if z_min is not None:
            ax.axhline(z_min, color="gray", lw=0.8)
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        _legend(ax)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def slices_3d(field0: ScalarField, field1: ScalarField, path: str | Path, z_min: float | None = None) -> None:
    """Zero contours on the mid x-z and y-z planes, initial and final."""
    x, y, z = field0.grid.axes()
    ix, iy = len(x) // 2, len(y) // 2
    with plt.rc_context(PARAMS):
        fig, axs = plt.subplots(1, 2, figsize=(7.0, 3.6))
        for ax, sl, horiz, name in ((axs[0], np.s_[:, iy, :], x, "x"), (axs[1], np.s_[ix, :, :], y, "y")):
            _zero_contour(ax, field1.values[sl], (horiz, z), SUPPORT_COLOR)
            _zero_contour(ax, field0.values[sl], (horiz, z), MODEL_COLOR)
            if z_min is not None:
                ax.axhline(z_min, color="gray", lw=0.8)
            ax.set_aspect("equal")
            ax.set_xlabel(name)
            ax.set_ylabel("z")
        _legend(axs[0])
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
