"""
Timeline figure of a summary: every clip by time and cluster, key clips
highlighted by typicality.
"""
import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from apps.cli.schemas import SummaryManifest, Typicality  # noqa: E402

logger = logging.getLogger(__name__)


def render_timeline(manifest: SummaryManifest, times: Sequence[float], clusters: Sequence[int], path) -> Path:
    """Write an SVG timeline; output is reproducible for fixed inputs."""
    path = Path(path)
    plt.rcParams["svg.hashsalt"] = "msc-timeline"
    fig, ax = plt.subplots(figsize=(10, 3))
    ax.scatter(np.asarray(times), np.asarray(clusters), s=6, c="lightgray", label="clip")
    for typ, colour in ((Typicality.USUAL, "tab:blue"), (Typicality.INTERESTING, "tab:red")):
        picked = [c for c in manifest.clips if c.typicality == typ]
        if picked:
            ax.scatter([c.t for c in picked], [c.cluster for c in picked], s=30, c=colour, label=f"key clip ({typ.value.lower()})")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("cluster")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote timeline to {path}")
    return path
