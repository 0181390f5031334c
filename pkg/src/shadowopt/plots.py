"""Figure rendering for experiment reports.

Renders alongside the CSV output; the CSV stays the canonical record.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_report_figure(report, path):
    """Deviation/defect panel plus loss panel for one preset run."""
    ks = np.arange(report.deviations.size)
    fig, (ax_dev, ax_loss) = plt.subplots(1, 2, figsize=(9.0, 3.4))

    ax_dev.plot(ks, report.deviations, color="tab:blue", lw=1.4, label="deviation")
    finite_defects = np.isfinite(report.defects)
    ax_dev.plot(
        ks[finite_defects],
        report.defects[finite_defects],
        color="tab:orange",
        lw=1.0,
        label="defect",
    )
    if np.isfinite(report.eps_bound):
        ax_dev.axhline(report.eps_bound, color="tab:blue", ls="--", lw=1.0, label="radius bound")
    ax_dev.axhline(report.delta_bound, color="tab:orange", ls=":", lw=1.0, label="defect bound")
    positive = report.deviations[report.deviations > 0]
    if positive.size and positive.max() / max(positive.min(), 1e-300) > 50.0:
        ax_dev.set_yscale("log")
    ax_dev.set_xlabel("iteration k")
    ax_dev.set_ylabel("distance")
    ax_dev.set_title(f"{report.preset} ({report.regime})")
    ax_dev.legend(fontsize=8)

    ax_loss.plot(ks, report.losses, color="tab:green", lw=1.4)
    ax_loss.set_xlabel("iteration k")
    ax_loss.set_ylabel("objective value")
    ax_loss.set_title("loss along the algorithm orbit")

    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)


def render_sweep_figure(sweep, path):
    """Log-log max deviation against step size with the fitted slope."""
    fig, ax = plt.subplots(figsize=(4.6, 3.4))
    ax.loglog(sweep.h_values, sweep.max_deviations, "o", color="tab:blue", label="measured")
    anchor = sweep.max_deviations[0]
    ax.loglog(
        sweep.h_values,
        anchor * (sweep.h_values / sweep.h_values[0]) ** sweep.slope,
        "--",
        color="tab:gray",
        label=f"slope {sweep.slope:.2f}",
    )
    ax.set_xlabel("step size h")
    ax.set_ylabel("max deviation")
    ax.set_title(f"h sweep on {sweep.target}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=140)
    plt.close(fig)
