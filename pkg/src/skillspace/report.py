"""Report rendering: delimited output, aligned text tables, and figures.

Every evaluation writes three artifacts next to each other: a CSV for
machines, an aligned text table for eyes, and a matplotlib figure. Metadata
(seed, cutoff, exclusion counts) is embedded as `#`-prefixed comment lines so
reports are self-describing and byte-reproducible.
"""

from __future__ import annotations

import csv
import io

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .stats import RegressionResult, TTestResult
from .util import atomic_write


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_table(rows: list[tuple], meta: dict | None = None) -> str:
    """Aligned plain-text table; first row is the header."""
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[c]) for r in cells) for c in range(len(cells[0]))]
    lines = []
    if meta:
        lines.extend(f"# {k}={_fmt(v)}" for k, v in sorted(meta.items()))
    for i, row in enumerate(cells):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_csv(path: str, rows: list[tuple], meta: dict | None = None) -> None:
    with atomic_write(path, "wt") as fh:
        if meta:
            for k, v in sorted(meta.items()):
                fh.write(f"# {k}={_fmt(v)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_text(path: str, rows: list[tuple], meta: dict | None = None) -> None:
    with atomic_write(path, "wt") as fh:
        fh.write(format_table(rows, meta))


def render_csv(rows: list[tuple], meta: dict | None = None) -> str:
    buf = io.StringIO()
    if meta:
        for k, v in sorted(meta.items()):
            buf.write(f"# {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Result-specific table shapes
# ---------------------------------------------------------------------------

def ttest_rows(entries: list[tuple[str, TTestResult]]) -> list[tuple]:
    header = ("label", "n", "mean_diff", "ci_low", "ci_high", "t_stat", "df", "p_value")
    body = [(label, r.n, r.mean_diff, r.ci_low, r.ci_high, r.t_stat, r.df, r.p_value)
            for label, r in entries]
    return [header] + body


def regression_rows(result: RegressionResult) -> list[tuple]:
    header = ("predictor", "coefficient", "std_error", "p_value", "vif")
    body = []
    for j, name in enumerate(result.names):
        v = result.vif.get(name, "") if result.vif else ""
        body.append((name, float(result.coefficients[j]), float(result.std_errors[j]),
                     float(result.p_values[j]), v))
    return [header] + body


def regression_meta(result: RegressionResult) -> dict:
    meta = {"n": result.n}
    if result.r_squared is not None:
        meta["r_squared"] = result.r_squared
    if result.log_likelihood is not None:
        meta["log_likelihood"] = result.log_likelihood
        meta["deviance"] = result.deviance
    if result.n_iterations is not None:
        meta["iterations"] = result.n_iterations
    meta.update(result.meta)
    return meta


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------

def ttest_figure(entries: list[tuple[str, TTestResult]], path: str,
                 title: str = "Estimated difference in means") -> None:
    """Horizontal error-bar chart: mean difference with its 95% interval per row."""
    labels = [label for label, _ in entries]
    means = [r.mean_diff for _, r in entries]
    lows = [r.mean_diff - r.ci_low for _, r in entries]
    highs = [r.ci_high - r.mean_diff for _, r in entries]
    ypos = range(len(entries))
    fig, ax = plt.subplots(figsize=(7, max(2.0, 0.5 * len(entries) + 1.2)))
    ax.errorbar(means, ypos, xerr=[lows, highs], fmt="o", capsize=4, color="#1f4e79")
    ax.axvline(0.0, color="#888888", lw=1, ls="--")
    ax.set_yticks(list(ypos))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("mean difference (95% CI)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def regression_figure(result: RegressionResult, path: str,
                      title: str = "Coefficients") -> None:
    """Forest plot of coefficients with approximate 95% intervals."""
    names = result.names
    coefs = [float(c) for c in result.coefficients]
    halfwidth = [1.96 * float(s) for s in result.std_errors]
    ypos = range(len(names))
    fig, ax = plt.subplots(figsize=(7, max(2.0, 0.4 * len(names) + 1.2)))
    ax.errorbar(coefs, ypos, xerr=halfwidth, fmt="o", capsize=3, color="#7a2048")
    ax.axvline(0.0, color="#888888", lw=1, ls="--")
    ax.set_yticks(list(ypos))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("coefficient (±1.96 SE)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def training_figure(epoch_rows: list[tuple], path: str) -> None:
    """Mean loss per epoch from TrainReport.rows() output."""
    header, body = epoch_rows[0], epoch_rows[1:]
    e_i = header.index("epoch")
    l_i = header.index("mean_loss")
    epochs = [row[e_i] for row in body]
    losses = [row[l_i] for row in body]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, losses, marker="o", color="#1f4e79")
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_title("Training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def neighbor_rows(neighbors) -> list[tuple]:
    header = ("entity", "score")
    return [header] + [(str(nb.entity), nb.score) for nb in neighbors]
