"""
Result Exporters
Atomic CSV, JSON and SVG output for butterflies, scans and cage reports
"""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src.lattice import GaugeField, Lattice, adjacency_records  # noqa: E402

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PathLike = Union[str, Path]

plt.rcParams["svg.hashsalt"] = "qwcage"


def _atomic_write(path: PathLike, writer: Callable[[str], None]) -> Path:
    """Write through a temporary file in the target directory, then rename."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    os.close(handle)
    try:
        writer(tmp)
        os.replace(tmp, target)
    except Exception:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.info(f"✓ Wrote {target}")
    return target


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    return _atomic_write(path, lambda tmp: frame.to_csv(tmp, index=False, float_format="%.12g"))


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    """JSON with sorted keys; a schema version is added when missing."""
    document = {"schema": SCHEMA_VERSION, **payload}

    def dump(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8") as handle:
            json.dump(document, handle, indent=2, sort_keys=True, default=_json_default)
            handle.write("\n")

    return _atomic_write(path, dump)


def _json_default(value: Any) -> Any:
    if hasattr(value, "model_dump"):
        return value.model_dump(by_alias=True)
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_scatter_svg(
    frame: pd.DataFrame,
    x: str,
    y: str,
    path: PathLike,
    title: Optional[str] = None,
    xlabel: Optional[str] = None,
    ylabel: Optional[str] = None,
    color: Optional[str] = None,
) -> Path:
    """
    Deterministic point-cloud SVG (butterflies, scans).

    Args:
        frame: Data table
        x: Column on the horizontal axis
        y: Column on the vertical axis
        path: Output file
        title: Figure title
        xlabel: Axis label (defaults to the column name)
        ylabel: Axis label (defaults to the column name)
        color: Optional column used as a colour scale

    Returns:
        Written path
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    try:
        if color is not None:
            points = ax.scatter(frame[x], frame[y], c=frame[color], s=1.5, linewidths=0, cmap="viridis")
            fig.colorbar(points, ax=ax, label=color)
        else:
            ax.scatter(frame[x], frame[y], s=1.5, linewidths=0, color="black")
        ax.set_xlabel(xlabel or x)
        ax.set_ylabel(ylabel or y)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _atomic_write(path, lambda tmp: fig.savefig(tmp, format="svg", metadata={"Date": None}))
    finally:
        plt.close(fig)


def write_line_svg(frame: pd.DataFrame, x: str, y: str, path: PathLike, title: Optional[str] = None, log: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    try:
        ax.plot(frame[x], frame[y], color="black", linewidth=1.0)
        if log:
            ax.set_yscale("log")
        ax.set_xlabel(x)
        ax.set_ylabel(y)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _atomic_write(path, lambda tmp: fig.savefig(tmp, format="svg", metadata={"Date": None}))
    finally:
        plt.close(fig)


def write_adjacency_json(lattice: Lattice, path: PathLike, gauge: Optional[GaugeField] = None) -> Path:
    """Edge list of a finite lattice with Peierls phases, one record per direction."""
    payload = {
        "graph": lattice.graph.value,
        "extent": list(lattice.extent),
        "boundary": lattice.boundary.value,
        "gauge": gauge.describe() if gauge is not None else None,
        "dangling": [state.to_dict() for state in lattice.dangling_states()],
        "edges": adjacency_records(lattice, gauge),
    }
    return write_json(payload, path)
