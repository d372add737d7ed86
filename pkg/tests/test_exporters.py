"""
Tests for CSV, JSON, SVG and adjacency exporters
"""

import json

import pandas as pd
import pytest

from src.exporters import write_adjacency_json, write_csv, write_json, write_line_svg, write_scatter_svg
from src.lattice import Boundary, Graph, Lattice, dc_gauge


@pytest.fixture
def frame():
    return pd.DataFrame({"f": [0.0, 0.25, 0.5], "epsilon": [0.1, -0.2, 0.3]})


def test_csv_round_trip(tmp_path, frame):
    path = write_csv(frame, tmp_path / "nested" / "cloud.csv")
    assert path.exists()
    assert pd.read_csv(path).equals(frame)
    assert [p.name for p in path.parent.iterdir()] == ["cloud.csv"]


def test_json_has_schema_and_sorted_keys(tmp_path):
    path = write_json({"zeta": 1, "alpha": complex(1, -2)}, tmp_path / "out.json")
    text = path.read_text()
    document = json.loads(text)
    assert document == {"schema": 1, "zeta": 1, "alpha": [1.0, -2.0]}
    assert text.index('"alpha"') < text.index('"schema"') < text.index('"zeta"')


def test_failed_write_leaves_nothing(tmp_path):
    with pytest.raises(TypeError):
        write_json({"bad": object()}, tmp_path / "bad.json")
    assert list(tmp_path.iterdir()) == []


def test_svg_is_reproducible(tmp_path, frame):
    first = write_scatter_svg(frame, "f", "epsilon", tmp_path / "a.svg", title="cloud").read_bytes()
    second = write_scatter_svg(frame, "f", "epsilon", tmp_path / "b.svg", title="cloud").read_bytes()
    assert first == second
    assert first.lstrip().startswith(b"<?xml")


def test_line_svg(tmp_path, frame):
    path = write_line_svg(frame.assign(epsilon=frame["epsilon"].abs()), "f", "epsilon", tmp_path / "b.svg", log=True)
    assert b"<svg" in path.read_bytes()


def test_adjacency_json(tmp_path):
    lattice = Lattice(Graph.DC, (3,), Boundary.OPEN)
    document = json.loads(write_adjacency_json(lattice, tmp_path / "adj.json", dc_gauge(0.25)).read_text())
    assert document["graph"] == "dc"
    assert document["extent"] == [3]
    assert len(document["edges"]) == 20
    assert len(document["dangling"]) == 4
    phases = {}
    for edge in document["edges"]:
        key = (json.dumps(edge["from"], sort_keys=True), json.dumps(edge["to"], sort_keys=True))
        phases[key] = edge["phase"]
    for (a, b), phase in phases.items():
        assert phases[(b, a)] == pytest.approx(-phase)
