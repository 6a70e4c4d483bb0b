"""Figure output for the comparison and profiling reports.

Uses the object-oriented Figure API so no GUI backend is ever selected.
"""

from __future__ import annotations

import os
from typing import Union

from .correlate import ProfileReport
from .model import Timestamp, value_text
from .verify import ComparisonReport, Verdict

PathLike = Union[str, os.PathLike]

VERDICT_COLORS = {
    Verdict.CORRECT: "#4daf4a",
    Verdict.NOT_SUPPORTED: "#bdbdbd",
    Verdict.INCORRECT: "#e41a1c",
}


def _save(fig, path: PathLike) -> None:
    # drop software/date stamps so repeated runs give identical bytes
    ext = os.path.splitext(os.fspath(path))[1].lower()
    meta = {"png": {"Software": None}, "svg": {"Date": None},
            "pdf": {"CreationDate": None, "Producer": None}}.get(ext.lstrip("."))
    fig.savefig(path, metadata=meta)


def _figure(width: float, height: float):
    from matplotlib.figure import Figure

    return Figure(figsize=(width, height), facecolor="w")


def plot_verdict_matrix(report: ComparisonReport, path: PathLike) -> None:
    """Keys down, tools across, one coloured cell per verdict."""
    keys = report.answer_key.keys()
    tools = [r.tool for r in report.results]
    fig = _figure(1.6 + 1.4 * len(tools), 0.9 + 0.45 * len(keys))
    ax = fig.add_subplot(111)
    for j, res in enumerate(report.results):
        for i, cell in enumerate(res.cells):
            ax.add_patch(_rect(j, i, VERDICT_COLORS[cell.verdict]))
            ax.text(j + 0.5, i + 0.5, cell.verdict.glyph, ha="center", va="center",
                    fontsize=12, color="k")
    ax.set_xlim(0, len(tools))
    ax.set_ylim(len(keys), 0)
    ax.set_xticks([j + 0.5 for j in range(len(tools))])
    ax.set_xticklabels([f"{t}\n{r.tally.tp}/{r.tally.ns}/{r.tally.fp}"
                        for t, r in zip(tools, report.results)])
    ax.set_yticks([i + 0.5 for i in range(len(keys))])
    ax.set_yticklabels(keys)
    ax.tick_params(length=0)
    ax.set_title(report.answer_key.artifact or "tool comparison")
    fig.tight_layout()
    _save(fig, path)


def _rect(x: float, y: float, color: str):
    from matplotlib.patches import Rectangle

    return Rectangle((x, y), 1, 1, facecolor=color, edgecolor="w", linewidth=2)


def plot_profile_timeline(report: ProfileReport, path: PathLike) -> None:
    """Subject's timestamped events on a time axis, one row per ``how`` value."""
    dated = [e for e in report.events if isinstance(e.when, Timestamp)]
    hows = list(dict.fromkeys(e.how or "(no how)" for e in dated))
    fig = _figure(8, 1.2 + 0.5 * max(len(hows), 1))
    ax = fig.add_subplot(111)
    for e in dated:
        y = hows.index(e.how or "(no how)")
        x = e.when.instant().replace(tzinfo=None)
        ax.plot([x], [y], "o", color="#377eb8")
        if e.what:
            ax.annotate(value_text(e.what), (x, y), xytext=(4, 6),
                        textcoords="offset points", fontsize=7)
    ax.set_yticks(range(len(hows)))
    ax.set_yticklabels(hows)
    ax.set_ylim(-0.5, max(len(hows), 1) - 0.5)
    ax.set_title(f"{report.subject}: {len(report.events)} events")
    fig.autofmt_xdate()
    fig.tight_layout()
    _save(fig, path)
