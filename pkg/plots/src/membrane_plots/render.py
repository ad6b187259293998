"""Deterministic figures from membrane-logistic CSV tables.

Four figure kinds mirror the solver's experiment tables: the bifurcation
diagram (`branch`), eigenfunction or solution profiles across the
membrane (`profile`), penalized-eigenvalue convergence (`alpha`), and
blow-up growth curves (`blowup`).  Rendering is a pure function of the
CSV rows, the optional envelope markers and the pinned style, so a job
re-rendered twice produces the same bytes.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import EmptyInput, MissingColumn  # noqa: E402

KINDS = ("branch", "profile", "alpha", "blowup")

#: Style pinned for byte-identical re-renders.
BASE_STYLE = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 120,
    "savefig.dpi": 120,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "svg.hashsalt": "membrane-plots",
}


@dataclass
class FigureJob:
    """One figure: kind, inputs, output path and style overrides."""

    kind: str
    input_csv: str
    out_path: str
    envelope: Optional[str] = None
    style: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, "
                             f"got {self.kind!r}")


def _read_table(path: str, required: List[str]) -> Dict[str, List]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in required:
            if column not in header:
                raise MissingColumn(column, path)
        columns: Dict[str, List] = {name: [] for name in header}
        for row in reader:
            for name in header:
                value = row[name]
                try:
                    columns[name].append(float(value))
                except ValueError:
                    columns[name].append(value)
    if not columns or not next(iter(columns.values())):
        raise EmptyInput(f"{path} holds no data rows")
    return columns


def _read_envelope(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _marker_value(envelope: dict, *keys):
    node = envelope
    for key in keys:
        if not isinstance(node, dict) or key not in node:
            return None
    # walk again collecting the value
    node = envelope
    for key in keys:
        node = node[key]
    if isinstance(node, (int, float)) and math.isfinite(node):
        return float(node)
    return None


def _draw_branch(ax, table, envelope):
    ax.plot(table["lambda"], table["sup_norm"], marker="o", markersize=3,
            color="#1f77b4")
    ax.set_xlabel("growth rate")
    ax.set_ylabel("sup norm of the steady state")
    ax.set_title("positive steady branch")
    lam_star = _marker_value(envelope, "results", "scalars", "lambda_star")
    if lam_star is not None:
        ax.axvline(lam_star, linestyle="--", color="#555555")
    lam_inf = _marker_value(envelope, "results", "scalars", "lambda_inf")
    if lam_inf is not None:
        ax.axvline(lam_inf, linestyle=":", color="#aa3333")


def _draw_profile(ax, table, envelope):
    sides = table["subdomain"]
    xs = table["x"]
    values = table["value"]
    if "y" in table:
        ys = table["y"]
        mid = sorted(set(ys))[len(set(ys)) // 2]
        keep = [i for i, y in enumerate(ys) if y == mid]
        sides = [sides[i] for i in keep]
        xs = [xs[i] for i in keep]
        values = [values[i] for i in keep]
    x1 = [x for s, x in zip(sides, xs) if s == 1]
    v1 = [v for s, v in zip(sides, values) if s == 1]
    x2 = [x for s, x in zip(sides, xs) if s == 2]
    v2 = [v for s, v in zip(sides, values) if s == 2]
    ax.plot(x1, v1, color="#1f77b4", label="side 1")
    ax.plot(x2, v2, color="#d62728", label="side 2")
    gamma = _marker_value(envelope, "config", "geometry", "gamma")
    if gamma is None and x1:
        gamma = max(x1)
    if gamma is not None:
        ax.axvline(gamma, linestyle="--", color="#555555")
        for x, v, mk in ((x1, v1, "o"), (x2, v2, "s")):
            if x:
                edge = min(range(len(x)), key=lambda i: abs(x[i] - gamma))
                ax.plot([x[edge]], [v[edge]], marker=mk, markersize=6,
                        color="#222222", zorder=5)
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    ax.set_title("profile across the membrane")
    ax.legend(loc="best")


def _draw_alpha(ax, table, envelope):
    ax.semilogx(table["alpha"], table["lambda_alpha"], marker="o",
                markersize=4, color="#1f77b4")
    ax.set_xlabel("crowding penalty strength")
    ax.set_ylabel("principal eigenvalue")
    ax.set_title("penalized eigenvalues approaching the refuge ceiling")
    lam_inf = _marker_value(envelope, "results", "scalars", "lambda_inf")
    if lam_inf is not None:
        ax.axhline(lam_inf, linestyle="--", color="#aa3333")


def _draw_blowup(ax, table, envelope):
    ax.semilogy(table["lambda"], table["max_on_K1"], marker="o",
                markersize=4, label="refuge 1 compact", color="#1f77b4")
    ax.semilogy(table["lambda"], table["max_on_K2"], marker="s",
                markersize=4, label="refuge 2 compact", color="#d62728")
    ax.set_xlabel("growth rate")
    ax.set_ylabel("max of the state on the compact")
    ax.set_title("growth on refuge compacts toward the ceiling")
    ax.legend(loc="best")


_REQUIRED = {
    "branch": ["lambda", "sup_norm"],
    "profile": ["subdomain", "x", "value"],
    "alpha": ["alpha", "lambda_alpha"],
    "blowup": ["lambda", "max_on_K1", "max_on_K2"],
}

_DRAW = {
    "branch": _draw_branch,
    "profile": _draw_profile,
    "alpha": _draw_alpha,
    "blowup": _draw_blowup,
}


def render(job: FigureJob) -> str:
    """Render one figure job to its output path; returns the path."""
    table = _read_table(job.input_csv, _REQUIRED[job.kind])
    envelope = _read_envelope(job.envelope)
    style = dict(BASE_STYLE)
    style.update(job.style)
    with plt.rc_context(style):
        fig, ax = plt.subplots()
        _DRAW[job.kind](ax, table, envelope)
        fig.tight_layout()
        fig.savefig(job.out_path, metadata={"Software": "membrane-plots"})
        plt.close(fig)
    return job.out_path
