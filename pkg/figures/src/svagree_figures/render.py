"""Figure renderers over the svagree CSV contracts.

Six kinds:

    strata-line   report.csv rows of one numeric stratum family
                  (distance=K / attractors=K) -> error-rate line with
                  95% CI whiskers
    strata-bar    report.csv rows of a categorical family (rc=... or
                  last=...|subject=...) -> bars with CI whiskers
    histogram     attractor_histogram.csv -> corpus counts per attractor
                  bin, log-scale y axis
    pca           pca.csv -> 2-D noun-embedding scatter colored by number
    units         condition_traces.csv -> grid of small multiples, one
                  panel per hidden unit, one curve per condition
    predictions   long_modifier.csv -> word-by-word P(plural) for the
                  PP/RC long-modifier pair

Every renderer reads its input only, writes one image file, and returns the
matplotlib Figure. Missing columns fail with the column name.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

SINGULAR_COLOR = "#c44e52"
PLURAL_COLOR = "#4c72b0"


class ContractError(ValueError):
    """The input CSV does not match the documented contract."""


def read_rows(path: str | Path, required: tuple[str, ...]) -> list[dict]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise ContractError(f"{path}: missing required column {column!r}")
        return list(reader)


def _save(fig, out_path: str | Path):
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return fig


def _percent_axis(ax) -> None:
    ax.set_ylabel("error rate (%)")
    ax.yaxis.set_major_formatter(lambda value, _pos: f"{100 * value:g}")


def _family_rows(rows: list[dict], family: str) -> list[dict]:
    prefix = family + "="
    picked = [r for r in rows if r["key"].startswith(prefix)]
    if not picked:
        raise ContractError(f"no strata rows for family {family!r}")
    return picked


def _whiskers(rows: list[dict]):
    rates = [float(r["rate"]) for r in rows]
    low = [rate - float(r["ci_low"]) for rate, r in zip(rates, rows)]
    high = [float(r["ci_high"]) - rate for rate, r in zip(rates, rows)]
    return rates, [low, high]


def render_strata_line(csv_path, out_path, family: str = "attractors"):
    rows = read_rows(csv_path, ("key", "n", "errors", "rate", "ci_low", "ci_high"))
    rows = _family_rows(rows, family)
    # numeric order; non-numeric bins like "15+" or "0_nointervening" sort last
    def order(row):
        value = row["key"].split("=", 1)[1]
        head = value.rstrip("+")
        return (not head.isdigit(), int(head) if head.isdigit() else 0, value)

    rows = [r for r in rows if "_" not in r["key"].split("=", 1)[1]]
    rows.sort(key=order)
    labels = [r["key"].split("=", 1)[1] for r in rows]
    rates, whiskers = _whiskers(rows)

    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.errorbar(
        range(len(rows)), rates, yerr=whiskers, marker="o", capsize=3, color=PLURAL_COLOR
    )
    ax.set_xticks(range(len(rows)), labels)
    ax.set_xlabel(family.replace("_", " "))
    _percent_axis(ax)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    return _save(fig, out_path)


def render_strata_bar(csv_path, out_path, family: str = "rc"):
    rows = read_rows(csv_path, ("key", "n", "errors", "rate", "ci_low", "ci_high"))
    rows = _family_rows(rows, family)
    rows.sort(key=lambda r: r["key"])
    labels = [r["key"].split("=", 1)[1] for r in rows]
    rates, whiskers = _whiskers(rows)

    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    colors = [
        SINGULAR_COLOR if "SINGULAR" in label else PLURAL_COLOR for label in labels
    ]
    ax.bar(range(len(rows)), rates, yerr=whiskers, capsize=3, color=colors)
    ax.set_xticks(range(len(rows)), labels, rotation=30, ha="right", fontsize=7)
    _percent_axis(ax)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    return _save(fig, out_path)


def render_histogram(csv_path, out_path):
    rows = read_rows(csv_path, ("attractors", "count"))
    rows = [r for r in rows if "_" not in r["attractors"]]
    labels = [r["attractors"] for r in rows]
    counts = [max(int(r["count"]), 0) for r in rows]

    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    ax.bar(range(len(rows)), [max(c, 1e-1) for c in counts], color=PLURAL_COLOR)
    ax.set_yscale("log")
    ax.set_xticks(range(len(rows)), labels)
    ax.set_xlabel("attractors per dependency")
    ax.set_ylabel("count (log scale)")
    fig.tight_layout()
    return _save(fig, out_path)


def render_pca(csv_path, out_path):
    rows = read_rows(csv_path, ("word", "pc1", "pc2", "number"))
    fig, ax = plt.subplots(figsize=(4.0, 4.0))
    for number, color in (("SINGULAR", SINGULAR_COLOR), ("PLURAL", PLURAL_COLOR)):
        xs = [float(r["pc1"]) for r in rows if r["number"] == number]
        ys = [float(r["pc2"]) for r in rows if r["number"] == number]
        ax.scatter(xs, ys, s=8, alpha=0.7, color=color, label=number.lower())
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


def render_units(csv_path, out_path, max_units: int | None = None):
    rows = read_rows(csv_path, ("condition", "position", "p_plural"))
    unit_columns = sorted(
        (c for c in rows[0].keys() if c.startswith("unit_")),
        key=lambda c: int(c.split("_", 1)[1]),
    )
    if not unit_columns:
        raise ContractError(f"{csv_path}: missing required column 'unit_0'")
    if max_units is not None:
        unit_columns = unit_columns[:max_units]

    conditions: dict[str, list[dict]] = {}
    for row in rows:
        conditions.setdefault(row["condition"], []).append(row)
    for series in conditions.values():
        series.sort(key=lambda r: int(r["position"]))

    n = len(unit_columns)
    cols = min(5, n)
    rows_count = (n + cols - 1) // cols
    fig, axes = plt.subplots(
        rows_count, cols, figsize=(2.0 * cols, 1.6 * rows_count), squeeze=False
    )
    for idx, column in enumerate(unit_columns):
        ax = axes[idx // cols][idx % cols]
        for condition, series in sorted(conditions.items()):
            ax.plot(
                [int(r["position"]) for r in series],
                [float(r[column]) for r in series],
                linewidth=0.8,
                label=condition,
            )
        ax.set_title(column, fontsize=7)
        ax.tick_params(labelsize=6)
    for idx in range(n, rows_count * cols):
        axes[idx // cols][idx % cols].axis("off")
    handles, labels = axes[0][0].get_legend_handles_labels()
    fig.legend(handles, labels, loc="lower center", ncol=4, fontsize=6, frameon=False)
    fig.tight_layout(rect=(0, 0.06, 1, 1))
    return _save(fig, out_path)


def render_predictions(csv_path, out_path):
    rows = read_rows(
        csv_path, ("position", "token_pp", "token_rc", "p_plural_pp", "p_plural_rc")
    )
    rows.sort(key=lambda r: int(r["position"]))
    positions = [int(r["position"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.plot(
        positions, [float(r["p_plural_pp"]) for r in rows],
        marker="o", color=PLURAL_COLOR, label="PP (of)",
    )
    ax.plot(
        positions, [float(r["p_plural_rc"]) for r in rows],
        marker="s", color=SINGULAR_COLOR, label="RC (that)",
    )
    ax.axhline(0.5, linewidth=0.6, color="gray", linestyle=":")
    labels = [
        r["token_pp"] if r["token_pp"] == r["token_rc"] else f"{r['token_pp']}/{r['token_rc']}"
        for r in rows
    ]
    ax.set_xticks(positions, labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("P(plural)")
    ax.set_ylim(0, 1)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out_path)


RENDERERS = {
    "strata-line": render_strata_line,
    "strata-bar": render_strata_bar,
    "histogram": render_histogram,
    "pca": render_pca,
    "units": render_units,
    "predictions": render_predictions,
}
