"""Figure rendering for convergence histories (headless, SVG output)."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["save_convergence_plot", "save_compare_plot"]


def _finite_series(pairs):
    xs = [k for k, v in pairs if v is not None and v > 0.0]
    ys = [v for _, v in pairs if v is not None and v > 0.0]
    return xs, ys


def save_convergence_plot(path, records, smoothed, title):
    """One run: iteration count vs. recursive and true relative residuals."""
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    rel_attr = "rel_s" if smoothed else "rel_r"
    true_attr = "true_rel_s" if smoothed else "true_rel_r"
    xs, ys = _finite_series([(r.k, getattr(r, rel_attr)) for r in records])
    ax.semilogy(xs, ys, "-", color="tab:blue", label="recursive")
    xs, ys = _finite_series([(r.k, getattr(r, true_attr)) for r in records])
    ax.semilogy(xs, ys, "--", color="tab:red", label="true")
    ax.set_xlabel("iteration")
    ax.set_ylabel("relative residual norm")
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_compare_plot(path, series, final_levels, title):
    """Residual/approximation norms on a multiplication-count axis.

    ``series`` maps a label to a list of (spmm_count, value) pairs; residual
    series are drawn on a log axis, with dashed horizontal markers at the
    ``final_levels`` attained accuracies.
    """
    fig, (ax_res, ax_norm) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    colors = {}
    for idx, (label, pairs) in enumerate(series.items()):
        color = f"C{idx}"
        colors[label] = color
        xs, ys = _finite_series(pairs)
        axis = ax_res if "residual" in label else ax_norm
        axis.semilogy(xs, ys, "-", color=color, label=label, linewidth=1.0)
    for label, level in final_levels.items():
        if level is not None and level > 0.0:
            ax_res.axhline(level, linestyle="--", linewidth=0.8,
                           color=colors.get(label, "gray"))
    ax_res.set_xlabel("multiplications by A")
    ax_res.set_ylabel("relative residual norm")
    ax_norm.set_xlabel("multiplications by A")
    ax_norm.set_ylabel("approximation norm")
    for axis in (ax_res, ax_norm):
        axis.grid(True, which="both", alpha=0.3)
        axis.legend(loc="best", fontsize=7)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
