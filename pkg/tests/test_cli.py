"""
Tests for the command-line front end
"""

import json

import pandas as pd
import pytest

from src.cli import ExperimentConfig, main, parse_flux_spec, parse_init_spec
from src.errors import ConfigError
from src.lattice import BasisState, Graph, SiteKind


class TestParsers:
    def test_flux_specs(self):
        assert parse_flux_spec("1/2") == [0.5]
        assert parse_flux_spec("0:1:5") == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert len(parse_flux_spec("q<=3")) == 5
        for bad in ("", "0:1", "0:1:0", "q<=0"):
            with pytest.raises(ConfigError):
                parse_flux_spec(bad)

    def test_init_specs(self):
        assert parse_init_spec("0,A,3", Graph.DC) == BasisState((0,), SiteKind.HUB_A, 3)
        assert parse_init_spec("1,-1,c,2", Graph.T3) == BasisState((1, -1), SiteKind.RIM_C, 2)
        assert parse_init_spec("all", Graph.DC) is None
        with pytest.raises(ConfigError):
            parse_init_spec("0,A,0", Graph.T3)

    def test_defaults_follow_the_command(self):
        assert ExperimentConfig(command="butterfly").flux == "q<=30"
        assert ExperimentConfig(command="bands").flux == "0:1:513"
        assert ExperimentConfig(command="arnoldi", graph="t3").coin_a == "G6"
        assert ExperimentConfig(command="appendix-e").flux == "0"


class TestConfiguration:
    def test_flags_override_the_config_file(self, tmp_path, capsys):
        recipe = tmp_path / "recipe.json"
        recipe.write_text(json.dumps({"command": "evolve", "steps": 5, "flux": "0.3", "cells": 30}))
        assert main(["evolve", "--config", str(recipe), "--steps", "7", "--print-config"]) == 0
        resolved = json.loads(capsys.readouterr().out)
        assert resolved["steps"] == 7
        assert resolved["flux"] == "0.3"
        assert resolved["cells"] == 30
        assert resolved["coin_a"] == "G4"

    def test_unreadable_config(self, tmp_path):
        recipe = tmp_path / "broken.json"
        recipe.write_text("{not json")
        assert main(["bands", "--config", str(recipe)]) == 2

    @pytest.mark.parametrize(
        "argv",
        [
            ["bands", "--coin-a", "Q4"],
            ["bands", "--coin-a", "G6"],
            ["arnoldi", "--flux", "0:1"],
            ["evolve", "--steps", "-1"],
            ["superlattice", "--graph", "t3", "--layout", "HHGHH"],
            ["superlattice"],
            ["butterfly"],
            ["butterfly", "--graph", "dc", "--flux", "0:1:11"],
            ["butterfly", "--graph", "t3", "--flux", "0:1:5"],
        ],
    )
    def test_usage_errors_exit_two(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path / "x")]) == 2

    def test_superlattice_needs_a_critical_flux(self, tmp_path):
        out = tmp_path / "walls.json"
        assert main(["superlattice", "--layout", "HHGHH", "--flux", "0.27", "--out", str(out)]) == 2
        assert not out.exists()


class TestCommands:
    def test_bands_do_not_depend_on_thread_count(self, tmp_path):
        outputs = []
        for threads in ("1", "4"):
            out = tmp_path / f"bands{threads}.csv"
            assert main(["bands", "--flux", "0:1:5", "--k", "8", "--threads", threads, "--out", str(out)]) == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        frame = pd.read_csv(tmp_path / "bands1.csv")
        assert list(frame.columns) == ["f", "k", "epsilon"]
        assert len(frame) == 5 * 8 * 8

    def test_diamond_chain_bands_with_svg(self, tmp_path, capsys):
        out = tmp_path / "fly.csv"
        assert main(["bands", "--flux", "0:1:11", "--k", "12", "--svg", "--out", str(out)]) == 0
        assert out.with_suffix(".svg").exists()
        assert "pinch detected at f = 0.5" in capsys.readouterr().out

    def test_t3_butterfly(self, tmp_path, capsys):
        out = tmp_path / "t3.csv"
        assert main(["butterfly", "--graph", "t3", "--flux", "q<=2", "--k", "4", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert sorted(frame["f"].unique()) == [0.0, 0.5, 1.0]
        assert "pinch detected at f = 0.5" in capsys.readouterr().out

    def test_evolve_returns_after_eight_steps(self, tmp_path, capsys):
        out = tmp_path / "dyn.csv"
        adjacency = tmp_path / "adj.json"
        assert main(["evolve", "--steps", "10", "--out", str(out), "--adjacency", str(adjacency)]) == 0
        assert "returns to the initial state at T = 8" in capsys.readouterr().out
        frame = pd.read_csv(out)
        assert sorted(frame["step"].unique()) == list(range(11))
        assert json.loads(adjacency.read_text())["graph"] == "dc"

    def test_evolve_writes_slot_amplitudes(self, tmp_path):
        out = tmp_path / "dyn.csv"
        assert main(["evolve", "--steps", "6", "--out", str(out)]) == 0
        slots = pd.read_csv(tmp_path / "dyn_slots.csv")
        assert list(slots.columns) == ["step", "cell", "kind", "slot", "re", "im", "prob"]
        assert sorted(slots["step"].unique()) == list(range(7))
        totals = slots.groupby("step")["prob"].sum()
        assert totals.to_numpy() == pytest.approx(1.0, abs=1e-9)
        assert (slots["re"] ** 2 + slots["im"] ** 2).to_numpy() == pytest.approx(slots["prob"].to_numpy(), abs=1e-9)
        sites = pd.read_csv(out)
        merged = slots.groupby(["step", "cell", "kind"])["prob"].sum()
        assert merged.sum() == pytest.approx(sites["prob"].sum())

    def test_evolve_zero_steps(self, tmp_path, capsys):
        out = tmp_path / "dyn.csv"
        assert main(["evolve", "--steps", "0", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 1
        assert frame["prob"].iloc[0] == pytest.approx(1.0)
        assert "no return within 0 steps" in capsys.readouterr().out

    def test_arnoldi_report(self, tmp_path):
        out = tmp_path / "cage.json"
        assert main(["arnoldi", "--out", str(out)]) == 0
        document = json.loads(out.read_text())
        assert document["schema"] == 1
        assert document["report"]["caged"] is True
        assert document["report"]["period"] == 8
        assert document["report"]["initial"] is not None

    def test_arnoldi_scan(self, tmp_path, capsys):
        out = tmp_path / "scan.csv"
        assert main(["arnoldi", "--flux", "0:1:21", "--coefficient", "8", "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["f", "b8"]
        assert frame["b8"].iloc[10] < 1e-8
        assert "minimum" in capsys.readouterr().out

    @pytest.mark.parametrize("command", ["appendix-e", "commensurate"])
    def test_commensurate_angles(self, command, tmp_path):
        out = tmp_path / "angles.json"
        assert main([command, "--q1-max", "10", "--q2-max", "10", "--out", str(out)]) == 0
        solutions = json.loads(out.read_text())["solutions"]
        found = [(s["p1"], s["q1"], s["p2"], s["q2"], s["period"]) for s in solutions]
        assert found == [(0, 1, 0, 1, 4), (2, 3, 1, 3, 12)]

    def test_superlattice(self, tmp_path, capsys):
        out = tmp_path / "walls.json"
        assert main(["superlattice", "--layout", "HHHHGGHGGHHHH", "--out", str(out)]) == 0
        document = json.loads(out.read_text())
        centre = next(v for v in document["verdicts"] if v["cell"] == 6 and v["kind"] == "A")
        assert (centre["predicted_left"], centre["predicted_right"]) == (4, 8)
        assert centre["agrees"] and centre["caged"]
        assert "predictions confirmed" in capsys.readouterr().out
