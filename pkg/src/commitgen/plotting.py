"""Report figures rendered to files with the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

METRIC_LABELS = ("BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "Meteor")
_STYLE = {"font.size": 9, "axes.spines.top": False, "axes.spines.right": False,
          "savefig.dpi": 120, "figure.figsize": (6.0, 3.6)}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def loss_curves(train_loss, valid_loss, path, title="training", best_epoch=None):
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        epochs = np.arange(1, len(train_loss) + 1)
        ax.plot(epochs, train_loss, label="train")
        ax.plot(epochs, valid_loss, label="valid")
        if best_epoch:
            ax.axvline(best_epoch, color="grey", linestyle=":", label=f"best epoch {best_epoch}")
        ax.set_xlabel("epoch")
        ax.set_ylabel("loss")
        ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def metric_bars(reports, path, title="test-set metrics"):
    """Grouped bars; ``reports`` maps a system name to its six metric values."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 3.6))
        names = list(reports)
        x = np.arange(len(METRIC_LABELS))
        width = 0.8 / max(len(names), 1)
        for i, name in enumerate(names):
            ax.bar(x + (i - (len(names) - 1) / 2) * width, reports[name], width, label=name)
        ax.set_xticks(x)
        ax.set_xticklabels(METRIC_LABELS)
        ax.set_ylabel("score")
        ax.set_ylim(0, 100)
        ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def mixture_pie(proportions, path):
    """Share of final messages taken from each candidate source."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        labels = list(proportions)
        values = [proportions[k] for k in labels]
        if sum(values) > 0:
            ax.pie(values, labels=[f"{k} {v:.1%}" for k, v in zip(labels, values)], startangle=90,
                   counterclock=False)
        ax.set_title("selected source")
        return _save(fig, path)


def pathstats_lines(caps, rows, path):
    """Each metric as a function of the path cap; ``rows[i]`` holds six values for ``caps[i]``."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        rows = np.asarray(rows, dtype=float).reshape(len(caps), len(METRIC_LABELS))
        for j, label in enumerate(METRIC_LABELS):
            ax.plot(caps, rows[:, j], marker="o", label=label)
        ax.set_xticks(list(caps))
        ax.set_xlabel("paths per polarity")
        ax.set_ylabel("score")
        ax.set_title("path-cap sweep")
        ax.legend(frameon=False, ncol=3)
        return _save(fig, path)
