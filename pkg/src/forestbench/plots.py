"""Static figures for sweep tables, rendered with matplotlib to SVG files
alongside the delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .errors import ConfigurationError  # noqa: E402
from .sweeps import AXIS_MIN_LEAF, SweepTable  # noqa: E402

# Stable content hashing so rendered files are identical across runs.
matplotlib.rcParams["svg.hashsalt"] = "forestbench"

_AXIS_LABELS = {
    AXIS_MIN_LEAF: "minimum leaf size",
    "max_depth": "maximum depth",
}

NOISE_MASS_SERIES = "noise-mass"


def render_sweep_svg(table: SweepTable, path, inverse_axis: bool = False) -> None:
    """Line chart of the replicate-mean score of every feature against the
    grid, plus the noise-mass series; one tagged series group per line.

    ``inverse_axis`` plots against 1 / grid value (for leaf-size scaling
    checks).  Output is valid standalone SVG.
    """
    if table.grid.size == 0:
        raise ConfigurationError("sweep table is empty")
    x = 1.0 / table.grid.astype(float) if inverse_axis else table.grid
    fig, ax = plt.subplots(figsize=(7.0, 4.4))
    for j, name in enumerate(table.feature_names):
        (line,) = ax.plot(x, table.mean_scores[:, j], marker="o", markersize=3,
                          linewidth=1.2, label=name)
        line.set_gid(f"series-{name}")
    (mass,) = ax.plot(x, table.noise_mass_mean, color="black", linestyle="--",
                      marker="s", markersize=3, linewidth=1.4, label="noise mass")
    mass.set_gid(f"series-{NOISE_MASS_SERIES}")
    label = _AXIS_LABELS.get(table.axis, table.axis)
    ax.set_xlabel(f"1 / {label}" if inverse_axis else label)
    ax.set_ylabel(f"{table.method} importance")
    ax.legend(fontsize=8, ncol=2)
    ax.set_title(f"{table.method} across {label} ({table.replicates} replicates)")
    fig.tight_layout()
    try:
        fig.savefig(Path(path), format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write figure to {path}: {exc}") from exc
    finally:
        plt.close(fig)
