"""Report figures.

Figures are written next to the JSON/CSV outputs; nothing here is needed for
the numbers in the report.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}
POS_COLOR = "#c0392b"
NEG_COLOR = "#2e86c1"

# keeps PNG bytes independent of the matplotlib version string
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=_META, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_cluster_composition(report, path) -> Path:
    """Stacked positive/negative case counts per cluster, flagged clusters hatched."""
    flagged = set(report.flagged_cluster_ids)
    ids = [s.cluster_id for s in report.summaries]
    pos = [s.n_pos for s in report.summaries]
    neg = [s.n_neg for s in report.summaries]
    labels = [str(i) for i in ids] + ["res."]
    pos.append(report.residual_pos)
    neg.append(report.residual_neg)
    x = range(len(labels))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.35 * len(labels) + 1.5), 3.2))
        bars_n = ax.bar(x, neg, color=NEG_COLOR, label="sepsis negative (TN)")
        bars_p = ax.bar(x, pos, bottom=neg, color=POS_COLOR, label="sepsis positive (TP)")
        for i, cid in enumerate(ids):
            if cid in flagged:
                for bar in (bars_n[i], bars_p[i]):
                    bar.set_hatch("//")
                    bar.set_edgecolor("black")
        ax.set_xticks(list(x), labels)
        ax.set_xlabel("cluster")
        ax.set_ylabel("cases")
        ax.set_title("Cluster composition (hatched: potential overdiagnosis)")
        ax.legend(frameon=False)
        return _save(fig, Path(path))


def plot_cluster_outcomes(summary, attrs, case_ids, path) -> Path:
    """SOFA distribution and death rate by group for one cluster."""
    pos = [attrs[c] for c in case_ids if attrs[c].y_true == 1]
    neg = [attrs[c] for c in case_ids if attrs[c].y_true == 0]
    with plt.rc_context(STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(6.4, 3.0))
        groups = [[a.sofa_24h for a in g] for g in (pos, neg)]
        labels = [f"positive\n(n={len(pos)})", f"negative\n(n={len(neg)})"]
        present = [(g, lab, col) for g, lab, col in zip(groups, labels, (POS_COLOR, NEG_COLOR)) if g]
        if present:
            bp = ax1.boxplot([p[0] for p in present], patch_artist=True)
            ax1.set_xticks(range(1, len(present) + 1), [p[1] for p in present])
            for patch, (_, _, col) in zip(bp["boxes"], present):
                patch.set_facecolor(col)
                patch.set_alpha(0.6)
        p_sofa = "n/a" if summary.sofa_test is None else f"{summary.sofa_test.p_value:.3g}"
        ax1.set_ylabel("SOFA (first 24 h)")
        ax1.set_title(f"SOFA, Wilcoxon p = {p_sofa}")

        rates = [sum(a.died for a in g) / len(g) if g else 0.0 for g in (pos, neg)]
        ax2.bar([0, 1], rates, color=[POS_COLOR, NEG_COLOR], alpha=0.8)
        ax2.set_xticks([0, 1], labels)
        ax2.set_ylim(0, max(0.05, max(rates) * 1.3))
        ax2.set_ylabel("death rate")
        p_mort = "n/a" if summary.mortality_test is None else f"{summary.mortality_test.p_value:.3g}"
        ax2.set_title(f"Mortality, proportion test p = {p_mort}")
        fig.suptitle(f"Cluster {summary.cluster_id}")
        fig.tight_layout()
        return _save(fig, Path(path))
