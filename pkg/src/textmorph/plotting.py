"""Report figures for the training demo.

Written next to the report log so a demo run leaves both a machine-readable
record and something a human can glance at.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def _rolling_mean(values, window: int) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return arr
    window = max(1, min(window, arr.size))
    kernel = np.ones(window) / window
    return np.convolve(arr, kernel, mode="valid")


def render_demo_figures(result, out_prefix) -> list[str]:
    """Write difficulty and policy figures for a DemoResult.

    Returns the list of file paths written. Uses the Agg backend; safe
    headless.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_prefix = Path(out_prefix)
    written = []

    if result.steps > 0:
        window = min(100, result.steps)
        fig, ax = plt.subplots(figsize=(7, 3.5))
        ax.plot(_rolling_mean(result.agent_ed, window), label="agent-directed")
        ax.plot(_rolling_mean(result.random_ed, window), label="random baseline")
        ax.set_xlabel("step")
        ax.set_ylabel(f"edit distance (rolling mean, w={window})")
        ax.set_title("Augmentation difficulty over training")
        ax.legend()
        fig.tight_layout()
        path = out_prefix.with_name(out_prefix.name + "_difficulty.png")
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(str(path))

    probs = np.asarray(result.final_probabilities)
    fig, ax = plt.subplots(figsize=(7, 3.0))
    idx = np.arange(probs.shape[0])
    w = 0.38
    ax.bar(idx - w / 2, probs[:, 0], width=w, label="x direction")
    ax.bar(idx + w / 2, probs[:, 1], width=w, label="y direction")
    ax.axhline(0.5, linestyle=":", linewidth=1)
    ax.set_xlabel("fiducial point index (top row, then bottom row)")
    ax.set_ylabel("P(sign = +1)")
    ax.set_ylim(0, 1)
    ax.set_title("Final policy probabilities")
    ax.legend()
    fig.tight_layout()
    path = out_prefix.with_name(out_prefix.name + "_policy.png")
    fig.savefig(path, dpi=110)
    plt.close(fig)
    written.append(str(path))
    return written
