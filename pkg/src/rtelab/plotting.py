"""SVG plots of result tables, with the plotted data embedded as CSV."""
from __future__ import annotations

import re
from pathlib import Path
from xml.sax.saxutils import escape, unescape

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .tables import Table, read_csv  # noqa: E402

DATA_ID = "rtelab-data"

# kind -> (x column, y column, log y)
KINDS = {
    "ballistic-decay": ("inv_kn", "norm_A1", True),
    "ballistic-rest": ("inv_kn", "norm_A_minus_A1", False),
    "lipschitz": ("z", "diff_norm", False),
    "kn-blowup": ("inv_kn", "diff_norm", True),
    "diffusion-limit": ("kn", "err_linf", False),
}


def emit_plot(table: Table, kind: str, path: str | Path) -> Path:
    if not table.rows:
        raise ValueError("cannot plot an empty table")
    xcol, ycol, logy = KINDS[kind]
    xs, ys = table.column(xcol), table.column(ycol)
    plt.rcParams["svg.hashsalt"] = "rtelab"
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(xs, ys, "o-")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xcol)
    ax.set_ylabel(ycol)
    ax.set_title(kind)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    svg = path.read_text()
    block = f'<desc id="{DATA_ID}">{escape(table.to_csv())}</desc>'
    svg = re.sub(r"(<svg[^>]*>)", lambda m: m.group(1) + "\n" + block, svg, count=1)
    path.write_text(svg)
    return path


def read_plot_data(path: str | Path) -> Table:
    """Recover the table embedded by :func:`emit_plot`."""
    m = re.search(rf'<desc id="{DATA_ID}">(.*?)</desc>', Path(path).read_text(), re.S)
    if not m:
        raise ValueError(f"{path} has no embedded data block")
    return read_csv(unescape(m.group(1)))
