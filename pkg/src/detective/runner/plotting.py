"""Matplotlib figures written next to the CSV reports."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.4,
    "lines.markersize": 4,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

# PNG metadata normally embeds the matplotlib version; drop it so files depend only on the data.
_PNG_META = {"Software": None}


def _round_axis(rounds):
    labels = [str(r) for r in rounds]
    return list(range(len(labels))), labels


def plot_accuracy(runs, path, domains=None):
    """Target and mean accuracy per round, one line per run.

    ``runs`` maps a run label to a list of row dicts with keys ``round``,
    ``acc_target`` and ``acc_mean`` (accuracies as fractions).
    """
    with plt.rc_context(RC):
        fig, axes = plt.subplots(1, 2, figsize=(7.0, 2.8), sharex=False)
        for label, rows in runs.items():
            xs, ticks = _round_axis([r["round"] for r in rows])
            axes[0].plot(xs, [100 * r["acc_target"] for r in rows], marker="o", label=label)
            axes[1].plot(xs, [100 * r["acc_mean"] for r in rows], marker="o", label=label)
            for ax in axes:
                ax.set_xticks(xs)
                ax.set_xticklabels(ticks)
        axes[0].set_title("target domain")
        axes[1].set_title("mean over domains")
        for ax in axes:
            ax.set_xlabel("round")
            ax.set_ylabel("accuracy (%)")
            ax.grid(alpha=0.3)
        axes[1].legend(loc="lower right", frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)


def plot_selection(log_rows, path):
    """Integrated uncertainty against density for every scored candidate, selected ones filled."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(3.6, 2.8))
        kept = [r for r in log_rows if r["selected"] and r["density"] == r["density"]]
        dropped = [r for r in log_rows if not r["selected"] and r["density"] == r["density"]]
        if dropped:
            ax.scatter([r["density"] for r in dropped], [r["u_int"] for r in dropped], s=12,
                       facecolors="none", edgecolors="0.5", label="pruned")
        if kept:
            ax.scatter([r["density"] for r in kept], [r["u_int"] for r in kept], s=12, color="C3", label="selected")
        ax.set_xlabel("k-NN density")
        ax.set_ylabel("integrated uncertainty")
        if kept or dropped:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)
