"""PNG rendering of plot specs. matplotlib is imported only when a figure is drawn."""
from __future__ import annotations

from pathlib import Path

from .io import read_dat, read_plot_spec


def render(spec_path, out_path=None) -> Path:
    """Draw the plot described by ``spec_path`` (data resolved next to it) to a PNG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec_path = Path(spec_path)
    spec = read_plot_spec(spec_path)
    blocks = read_dat(spec_path.parent / spec["data"])
    out_path = Path(out_path) if out_path else spec_path.with_name(spec_path.name.replace(".plot.json", ".png"))

    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for s in spec["series"]:
        _, _, arr = blocks[s["index"]]
        if arr.size == 0:
            continue
        x, y = arr[:, s["x"] - 1], arr[:, s["y"] - 1]
        marker = "o" if s.get("style") == "linespoints" else None
        ax.plot(x, y, marker=marker, markersize=3, label=s["label"])
    ax.set_xlabel(spec.get("xlabel", ""))
    ax.set_ylabel(spec.get("ylabel", ""))
    ax.set_title(spec.get("title", ""), fontsize=9)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path
