"""Figure construction: log-log error scatter with bound overlays.

Markers follow the usual convention, `+` for round-to-nearest rows and
`x` for stochastic rounding, one marker per CSV row.  Each requested
bound id becomes one median curve per experiment that recorded it; a
dashed horizontal line marks the unit roundoff.  Everything plotted is
already in the file: this module never recomputes an error or a bound,
so a figure is a pure function of the CSV bytes and the spec.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .schema import SchemaError, load_csv, merge

__all__ = ["FigureSpec", "PRESETS", "spec_for", "render"]

_MARKERS = {"rtn": "+", "sr": "x"}


@dataclass(frozen=True)
class FigureSpec:
    csv_paths: tuple[str, ...]
    out: str
    bounds: tuple[str, ...] = ()
    u_line: float | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    title: str | None = None

    def __post_init__(self):
        if not self.csv_paths:
            raise ValueError("at least one input CSV required")
        if self.u_line is not None and self.u_line <= 0.0:
            raise ValueError("the unit-roundoff reference must be positive")


# default overlays per figure id; u refers to the producing run's
# working precision, t = 11 for every standard dataset
_U11 = 2.0**-11
PRESETS: dict[str, dict] = {
    "tree": {
        "bounds": ("DET_PARTIAL", "PROB_CLOSED_PARTIAL"),
        "u_line": _U11,
        "title": "tree summation",
    },
    "shifted": {
        "bounds": ("SHIFT_PARTIAL", "SHIFT_INPUTS"),
        "u_line": _U11,
        "title": "shifted summation",
    },
    "compensated": {
        "bounds": ("COMP_DET_PARTIAL", "COMP_PROB_PARTIAL"),
        "u_line": _U11,
        "title": "compensated summation",
    },
    "fabsum": {
        "bounds": ("FABSUM_INPUTS", "MIX_CLOSED_PARTIAL"),
        "u_line": _U11,
        "title": "blocked two-precision summation",
    },
}


def spec_for(figure_id: str, csv_paths: tuple[str, ...], out: str, **overrides) -> FigureSpec:
    """A FigureSpec from a preset id plus explicit overrides."""
    if figure_id not in PRESETS:
        raise ValueError(f"unknown figure id {figure_id!r}, have {sorted(PRESETS)}")
    kwargs = dict(PRESETS[figure_id])
    kwargs.update(overrides)
    return FigureSpec(csv_paths=tuple(csv_paths), out=out, **kwargs)


def render(spec: FigureSpec):
    """Draw and save the figure; returns the matplotlib Figure."""
    data = merge([load_csv(path) for path in spec.csv_paths])
    missing = [b for b in spec.bounds if b not in data.bound_columns]
    if missing:
        raise SchemaError(f"bound ids not in the CSV header: {missing}")

    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.set_xscale("log")
    ax.set_yscale("log")

    # one marker per row, one artist per (experiment, mode) group
    groups: dict[tuple[str, str], list] = {}
    for row in data.rows:
        groups.setdefault((row.experiment, row.mode), []).append(row)
    for experiment, mode in sorted(groups):
        members = groups[(experiment, mode)]
        ax.plot(
            [r.n for r in members],
            [r.rel_error for r in members],
            linestyle="none",
            marker=_MARKERS[mode],
            markersize=5,
            alpha=0.6,
            label=f"{experiment} ({mode})",
        )

    experiments = sorted({row.experiment for row in data.rows})
    for bound in spec.bounds:
        drew = 0
        for experiment in experiments:
            by_n: dict[int, list[float]] = {}
            for row in data.rows:
                if row.experiment == experiment and bound in row.bounds:
                    by_n.setdefault(row.n, []).append(row.bounds[bound])
            if not by_n:
                continue
            ns = sorted(by_n)
            label = bound if len(experiments) == 1 else f"{bound} ({experiment})"
            ax.plot(
                ns,
                [statistics.median(by_n[n]) for n in ns],
                linestyle="-",
                linewidth=1.2,
                label=label,
            )
            drew += 1
        if data.rows and drew == 0:
            raise ValueError(f"bound {bound!r} has no recorded values in the input")

    if spec.u_line is not None:
        ax.axhline(
            spec.u_line, linestyle="--", linewidth=1.0, color="0.4", label="unit roundoff"
        )

    ax.set_xlabel("n")
    ax.set_ylabel("relative error")
    if spec.title:
        ax.set_title(spec.title)
    if spec.xlim:
        ax.set_xlim(*spec.xlim)
    if spec.ylim:
        ax.set_ylim(*spec.ylim)
    if data.rows or spec.u_line is not None:
        ax.legend(fontsize=8)

    fig.savefig(spec.out, dpi=150)
    return fig
