"""Static SVG line charts for the sweep outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# fixed ids and no timestamp keep repeated renders byte-identical
matplotlib.rcParams["svg.hashsalt"] = "snmcache"
matplotlib.rcParams["svg.fonttype"] = "none"


@dataclass
class Series:
    label: str
    x: list
    y: list
    xerr: list | None = None
    yerr: list | None = None
    style: str = "line"  # "line", "dashed", "dotted" or "marker"
    extra: dict = field(default_factory=dict)


_LINESTYLES = {"line": "-", "dashed": "--", "dotted": ":"}


def line_chart(path, series, xlabel: str, ylabel: str, title: str = "", logx: bool = False,
               logy: bool = False, size=(6.0, 4.2)) -> None:
    fig, ax = plt.subplots(figsize=size)
    colors = {}
    for s in series:
        key = s.extra.get("group", s.label)
        color = colors.setdefault(key, f"C{len(colors) % 10}")
        if s.style == "marker":
            ax.errorbar(s.x, s.y, xerr=s.xerr, yerr=s.yerr, fmt="o", ms=4, capsize=2, color=color, label=s.label)
        else:
            ax.plot(s.x, s.y, _LINESTYLES.get(s.style, "-"), color=color, label=s.label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if series:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
