"""Render publication-style figures from gmlab results.csv files.

The CSV schema (fixed header
``experiment,beta,gamma,n,regime,spec,metric,value,stderr,detail,seed``) is
the only interface to the simulation package.  Rendering is a pure function
of (CSV contents, figure spec): fixed style, no timestamps, same layout on
every run.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

EXPECTED_COLUMNS = (
    "experiment",
    "beta",
    "gamma",
    "n",
    "regime",
    "spec",
    "metric",
    "value",
    "stderr",
    "detail",
    "seed",
)

FIGURE_KINDS = ("panel", "decay", "heatmap", "scaling")

PNG_METADATA = {"Software": "gmlab-figures"}

STYLE = {
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.titlesize": 9,
    "legend.fontsize": 8,
}


class SchemaError(ValueError):
    """results.csv does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    input: str
    output: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}; expected one of {FIGURE_KINDS}")


def load_spec(path: str | Path) -> FigureSpec:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    unknown = set(doc) - {"kind", "input", "output", "options"}
    if unknown:
        raise ValueError(f"unknown spec keys {sorted(unknown)}")
    for key in ("kind", "input", "output"):
        if key not in doc:
            raise ValueError(f"figure spec is missing {key!r}")
    return FigureSpec(kind=doc["kind"], input=doc["input"], output=doc["output"], options=doc.get("options", {}))


def read_rows(csv_path: str | Path) -> list[dict]:
    """Read a results.csv, enforcing the schema and parsing numeric fields."""
    with open(csv_path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = tuple(reader.fieldnames or ())
        missing = [c for c in EXPECTED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{csv_path}: missing column(s) {missing}; header was {list(header)}")
        rows = []
        for raw in reader:
            row = dict(raw)
            for key in ("beta", "gamma", "value"):
                row[key] = float(raw[key])
            row["n"] = int(float(raw["n"]))
            row["stderr"] = float(raw["stderr"]) if raw["stderr"] else None
            rows.append(row)
    return rows


def _fitted_slope(ns, values):
    lx, ly = np.log(ns), np.log(values)
    slope, intercept = np.polyfit(lx, ly, 1)
    return float(slope), float(intercept)


def _reference_from_fit_rows(rows, beta, gamma, regime, spec) -> str | None:
    for row in rows:
        if (
            row["metric"] == "fit_slope"
            and row["n"] == 0
            and row["beta"] == beta
            and row["gamma"] == gamma
            and row["regime"] == regime
            and row["spec"] == spec
        ):
            for part in row["detail"].split(";"):
                if part.startswith("reference="):
                    return part.split("=", 1)[1]
    return None


PANEL_METRICS = ("ks_vs_normal", "ks_vs_tempered", "ks_vs_degenerate")
PANEL_LABELS = ("normal", "tempered", "degenerate")


def _render_panel(rows, options):
    """One row of cells per beta, one column per variance regime; each cell
    shows the KS distance of the functional to the three candidate limits."""
    data = [r for r in rows if r["metric"] in PANEL_METRICS]
    if not data:
        raise SchemaError("panel figure needs ks_vs_normal/ks_vs_tempered/ks_vs_degenerate rows")
    betas = sorted({r["beta"] for r in data})
    regimes = sorted({r["regime"] for r in data})
    fig, axes = plt.subplots(
        len(betas),
        len(regimes),
        figsize=(3.2 * len(regimes), 2.2 * len(betas)),
        squeeze=False,
    )
    for i, beta in enumerate(betas):
        for j, regime in enumerate(regimes):
            ax = axes[i][j]
            cell = {
                r["metric"]: r["value"] for r in data if r["beta"] == beta and r["regime"] == regime
            }
            values = [cell.get(m, float("nan")) for m in PANEL_METRICS]
            colors = ["#888888"] * 3
            finite = [v for v in values if not math.isnan(v)]
            if finite:
                colors[values.index(min(finite))] = "#c0392b"
            ax.bar(range(3), values, color=colors)
            ax.set_xticks(range(3))
            ax.set_xticklabels(PANEL_LABELS, rotation=20)
            ax.set_title(f"beta={beta:g}, {regime}")
            if j == 0:
                ax.set_ylabel("KS distance")
    fig.suptitle(options.get("title", "Distance to candidate limit laws"))
    fig.tight_layout(rect=(0, 0, 1, 0.96))
    return fig


def _render_decay(rows, options, metric="ks_decay", xlabel="n"):
    data = [r for r in rows if r["metric"] == metric and r["n"] > 0]
    if not data:
        raise SchemaError(f"decay figure needs {metric!r} rows with n > 0")
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    groups: dict[tuple, list] = {}
    for r in data:
        groups.setdefault((r["beta"], r["gamma"], r["regime"], r["spec"]), []).append(r)
    annotations = []
    for (beta, gamma, regime, spec), members in sorted(groups.items()):
        members.sort(key=lambda r: r["n"])
        ns = np.array([r["n"] for r in members], dtype=float)
        vals = np.array([r["value"] for r in members])
        label = f"beta={beta:g}, gamma={gamma:g}, {regime}, {spec}"
        ax.plot(ns, vals, "o-", label=label)
        if len(members) >= 3 and np.all(vals > 0):
            slope, intercept = _fitted_slope(ns, vals)
            ax.plot(ns, np.exp(intercept) * ns**slope, "--", color="#555555")
            reference = _reference_from_fit_rows(rows, beta, gamma, regime, spec)
            note = f"slope={slope:.3f}" + (f" (ref {reference})" if reference else "")
            annotations.append(note)
    for k, note in enumerate(annotations):
        ax.annotate(note, xy=(0.02, 0.06 + 0.07 * k), xycoords="axes fraction")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(options.get("ylabel", metric))
    ax.set_title(options.get("title", "Distance decay"))
    ax.legend(loc="upper right")
    fig.tight_layout()
    return fig


def _render_heatmap(rows, options):
    metric = options.get("metric", "cov_max_abs_dev")
    x_col = options.get("x_col", "gamma")
    y_col = options.get("y_col", "spec")
    data = [r for r in rows if r["metric"] == metric]
    if not data:
        raise SchemaError(f"heatmap figure needs {metric!r} rows")
    xs = sorted({r[x_col] for r in data})
    ys = sorted({r[y_col] for r in data})
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in data:
        grid[ys.index(r[y_col]), xs.index(r[x_col])] = r["value"]
    fig, ax = plt.subplots(figsize=(1.2 + 1.0 * len(xs), 1.0 + 0.8 * len(ys)))
    mesh = ax.imshow(grid, cmap="viridis", aspect="auto")
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([f"{x:g}" if isinstance(x, float) else str(x) for x in xs])
    ax.set_yticks(range(len(ys)))
    ax.set_yticklabels([f"{y:g}" if isinstance(y, float) else str(y) for y in ys])
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    for i in range(len(ys)):
        for j in range(len(xs)):
            if not math.isnan(grid[i, j]):
                ax.annotate(f"{grid[i, j]:.3g}", xy=(j, i), ha="center", va="center", color="white")
    fig.colorbar(mesh, ax=ax)
    ax.set_title(options.get("title", metric))
    fig.tight_layout()
    return fig


def _render_scaling(rows, options):
    return _render_decay(rows, {**options, "title": options.get("title", "Mixing-time scaling"),
                                "ylabel": options.get("ylabel", "t_mix")}, metric="t_mix")


_RENDERERS = {
    "panel": _render_panel,
    "decay": _render_decay,
    "heatmap": _render_heatmap,
    "scaling": _render_scaling,
}


def render(spec: FigureSpec, in_dir: str | Path, out_dir: str | Path) -> Path:
    """Render the figure described by ``spec`` and return the output path."""
    rows = read_rows(Path(in_dir) / spec.input)
    out_path = Path(out_dir) / spec.output
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(STYLE):
        fig = _RENDERERS[spec.kind](rows, spec.options)
        try:
            fig.savefig(out_path, metadata=PNG_METADATA)
        finally:
            plt.close(fig)
    return out_path


def layout_descriptor(spec: FigureSpec, in_dir: str | Path) -> dict:
    """Structural description of the rendered figure, used for golden comparisons."""
    rows = read_rows(Path(in_dir) / spec.input)
    with plt.rc_context(STYLE):
        fig = _RENDERERS[spec.kind](rows, spec.options)
        try:
            axes = []
            for ax in fig.axes:
                if ax.get_label() == "<colorbar>":
                    axes.append({"colorbar": True})
                    continue
                axes.append(
                    {
                        "title": ax.get_title(),
                        "xlabel": ax.get_xlabel(),
                        "ylabel": ax.get_ylabel(),
                        "xscale": ax.get_xscale(),
                        "yscale": ax.get_yscale(),
                        "n_lines": len(ax.get_lines()),
                        "n_patches": len(ax.patches),
                        "texts": sorted(t.get_text() for t in ax.texts),
                        "legend_entries": sorted(
                            t.get_text() for t in (ax.get_legend().get_texts() if ax.get_legend() else [])
                        ),
                    }
                )
            return {
                "kind": spec.kind,
                "suptitle": fig.get_suptitle() if hasattr(fig, "get_suptitle") else "",
                "axes": axes,
            }
        finally:
            plt.close(fig)
