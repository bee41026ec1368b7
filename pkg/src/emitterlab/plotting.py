"""Deterministic standalone SVG panels written with matplotlib."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import DomainError  # noqa: E402

STYLES = ("line", "scatter", "histogram", "log_y")


def _as_datasets(datasets):
    if isinstance(datasets, dict):
        datasets = list(datasets.items())
    out = []
    for item in datasets:
        if isinstance(item, dict):
            label, x, y = item.get("label", ""), item["x"], item["y"]
        elif len(item) == 2:
            label, (x, y) = item
        else:
            label, x, y = item
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape != y.shape:
            raise DomainError(f"dataset {label!r}: x and y differ in length")
        out.append((str(label), x, y))
    if not out or all(x.size == 0 for _, x, _ in out):
        raise DomainError("nothing to plot: empty dataset")
    return out


def emit_svg_plot(datasets, style, path, xlabel="", ylabel="", title=""):
    """Write one panel; ``datasets`` is a list of (label, x, y) or a label->(x, y) dict.

    Identical inputs give byte-identical files (fixed hash salt, no date).
    """
    if style not in STYLES:
        raise DomainError(f"style must be one of {STYLES}")
    data = _as_datasets(datasets)
    with plt.rc_context({"svg.hashsalt": "emitterlab", "svg.fonttype": "path",
                         "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, x, y in data:
            if style == "scatter":
                ax.plot(x, y, "o", ms=3, label=label)
            elif style == "histogram":
                ax.step(x, y, where="mid", lw=0.8, label=label)
            else:
                ax.plot(x, y, lw=1.0, label=label)
        if style == "log_y":
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if any(label for label, _, _ in data):
            ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
