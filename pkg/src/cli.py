"""
Quantum Walk Cage CLI
Command-line front end for spectra, butterflies, Arnoldi cage detection,
dynamics, superlattice walls and the commensurability search
"""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.caging import (
    CAGE_COEFFICIENT,
    commensurate_angle_search,
    cage_lattice,
    centered_state,
    coefficient_surface,
    critical_flux_scan,
    detect_cage,
    hub_slot_cages,
)
from src.coins import create_coin_assignment, evaluate_expression, parse_coin
from src.errors import CoinError, ConfigError, GaugeError, LatticeError, QuantumWalkError
from src.exporters import write_adjacency_json, write_csv, write_json, write_line_svg, write_scatter_svg
from src.lattice import CELL_DIMENSION, BasisState, Boundary, Graph, SiteKind, create_gauge
from src.sim_config import get_simulation_config
from src.spectrum import butterfly, detect_pinch, rational_fluxes
from src.superlattice import (
    LAYOUT_COINS,
    normalize_layout,
    predict_superlattice_cage,
    verify_superlattice_cage,
)
from src.walk import (
    create_lattice,
    create_walk,
    equal_up_to_phase,
    evolve_series,
    localized_state,
    rms_spread,
    site_frame,
    snapshot_frame,
)

logger = logging.getLogger(__name__)

COMMANDS = ("bands", "butterfly", "arnoldi", "evolve", "superlattice", "appendix-e", "commensurate")
USAGE_ERRORS = (ConfigError, CoinError, GaugeError, LatticeError, ValidationError)

DEFAULT_COINS = {
    Graph.DC: ("G4", "U2:pi/4,pi,0,0"),
    Graph.T3: ("G6", "R3:2*pi/3,asin(1/sqrt(3))"),
}
DEFAULT_FLUX = {
    "arnoldi": "1/2",
    "evolve": "1/2",
    "superlattice": "1/2",
    "appendix-e": "0",
    "commensurate": "0",
}

FluxValue = Union[float, Fraction]


def parse_flux_spec(text: str) -> List[FluxValue]:
    """
    Parse a flux specification.

    Args:
        text: A single value ("1/2"), a grid "a:b:n" or rationals "q<=Q"

    Returns:
        Flux values (Fractions for the rational form)
    """
    text = text.strip().replace(" ", "")
    if not text:
        raise ConfigError("empty flux specification")
    if text.lower().startswith("q<="):
        q_max = int(text[3:])
        if q_max < 1:
            raise ConfigError(f"empty flux grid: q_max = {q_max}")
        return list(rational_fluxes(q_max))
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"flux grid must read a:b:n, got {text!r}")
        start, stop = evaluate_expression(parts[0]), evaluate_expression(parts[1])
        count = int(parts[2])
        if count < 1:
            raise ConfigError(f"empty flux grid {text!r}")
        return [float(f) for f in np.linspace(start, stop, count)]
    return [evaluate_expression(text)]


def parse_sweep_spec(text: str) -> List[float]:
    parts = text.split(":")
    if len(parts) != 3 or int(parts[2]) < 1:
        raise ConfigError(f"sweep must read a:b:n with n >= 1, got {text!r}")
    return [float(x) for x in np.linspace(evaluate_expression(parts[0]), evaluate_expression(parts[1]), int(parts[2]))]


def parse_init_spec(text: str, graph: Graph) -> Optional[BasisState]:
    """"cell,kind,slot" relative to the lattice centre, or "all" for every hub slot."""
    if text.strip().lower() == "all":
        return None
    parts = [p.strip() for p in text.split(",")]
    dimension = CELL_DIMENSION[graph]
    if len(parts) != dimension + 2:
        raise ConfigError(f"initial state for {graph.value} reads {'n,' * dimension}kind,slot; got {text!r}")
    try:
        cell = tuple(int(p) for p in parts[:dimension])
        kind = SiteKind(parts[dimension].upper())
        slot = int(parts[dimension + 1])
    except ValueError as exc:
        raise ConfigError(f"cannot parse initial state {text!r}: {exc}") from exc
    return BasisState(cell, kind, slot)


class ExperimentConfig(BaseModel):
    """One CLI experiment; flags override a JSON config file, which overrides these defaults."""

    command: Optional[str] = None
    graph: Graph = Graph.DC
    coin_a: Optional[str] = None
    coin_b: Optional[str] = None
    coin_c: Optional[str] = None
    flux: Optional[str] = None
    k: Optional[int] = Field(default=None, ge=1)
    init: str = "0,A,0"
    steps: int = Field(default=16, ge=0)
    tol: float = Field(default=1e-8, gt=0)
    cells: Optional[int] = Field(default=None, ge=1)
    coefficient: Optional[int] = Field(default=None, ge=1)
    sweep: Optional[str] = None
    layout: Optional[str] = None
    q1_max: int = Field(default=100, ge=1)
    q2_max: int = Field(default=100, ge=1)
    out: Optional[str] = None
    adjacency: Optional[str] = None
    svg: bool = False
    threads: int = Field(default=1, ge=1)

    @field_validator("command")
    @classmethod
    def known_command(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in COMMANDS:
            raise ValueError(f"unknown command {value!r}")
        return value

    @model_validator(mode="after")
    def fill_defaults(self) -> "ExperimentConfig":
        hub, rim = DEFAULT_COINS[self.graph]
        self.coin_a = self.coin_a or hub
        self.coin_b = self.coin_b or rim
        settings = get_simulation_config()
        if self.k is None:
            self.k = settings.dc_k_points if self.graph is Graph.DC else settings.t3_k_points
        if self.flux is None:
            if self.command == "butterfly" or (self.command == "bands" and self.graph is Graph.T3):
                self.flux = f"q<={settings.t3_q_max}"
            elif self.command == "bands":
                self.flux = f"0:1:{settings.dc_flux_points + 1}"
            else:
                self.flux = DEFAULT_FLUX.get(self.command, "1/2")
        return self

    def variables(self, x: float = 0.0) -> Dict[str, float]:
        return {"x": x}

    def coins(self) -> Tuple[str, str, Optional[str]]:
        return self.coin_a, self.coin_b, self.coin_c

    def validate_inputs(self) -> None:
        """Parse every spec once so failures surface before any computation."""
        for spec in (self.coin_a, self.coin_b, self.coin_c):
            if spec is not None:
                parse_coin(spec, self.variables())
        create_coin_assignment(*self.coins(), variables=self.variables()).validate(self.graph)
        parse_flux_spec(self.flux)
        parse_init_spec(self.init, self.graph)
        if self.sweep:
            parse_sweep_spec(self.sweep)
        if self.command == "superlattice":
            if self.graph is not Graph.DC:
                raise ConfigError("superlattices are defined on the diamond chain")
            if not self.layout:
                raise ConfigError("superlattice needs --layout")
            if len(normalize_layout(self.layout)) < 3:
                raise ConfigError("layout needs at least 3 cells")
        if self.command == "butterfly":
            if self.graph is not Graph.T3:
                raise ConfigError("butterfly is the T3 rational-flux sweep; use bands for the diamond chain")
            if not self.flux.strip().startswith("q<="):
                raise ConfigError(f"butterfly takes a q<=N flux spec, got {self.flux!r}")


def _output_path(config: ExperimentConfig, suffix: str) -> Path:
    if config.out:
        return Path(config.out)
    return Path("results") / f"{config.command}{suffix}"


def _svg_path(path: Path) -> Path:
    return path.with_suffix(".svg")


def _single_flux(config: ExperimentConfig) -> float:
    fluxes = parse_flux_spec(config.flux)
    if len(fluxes) != 1:
        raise ConfigError(f"{config.command} takes a single flux value, got {len(fluxes)}")
    return float(fluxes[0])


def cmd_bands(config: ExperimentConfig) -> int:
    """Quasi-energy point cloud (f, k, epsilon) and pinch summary."""
    assignment = create_coin_assignment(*config.coins(), variables=config.variables())
    fluxes = parse_flux_spec(config.flux)
    if config.graph is Graph.DC:
        fluxes = [float(f) for f in fluxes]
    cloud = butterfly(config.graph, assignment, fluxes, config.k, config.threads)
    frame = cloud.to_frame()
    path = write_csv(frame, _output_path(config, ".csv"))
    if config.svg:
        write_scatter_svg(frame, "f", "epsilon", _svg_path(path), title=f"{config.graph.value} quasi-energies")
    pinch = detect_pinch(cloud)
    if pinch.pinched:
        print(f"pinch detected at f = {pinch.flux:.6g} (dispersion {pinch.dispersion:.2e})")
    else:
        print(f"no pinch; minimum dispersion {pinch.dispersion:.2e} at f = {pinch.flux:.6g}")
    return 0


def cmd_butterfly(config: ExperimentConfig) -> int:
    """T3 butterfly over every rational flux p/q with q <= q_max."""
    return cmd_bands(config)


def _arnoldi_report(config: ExperimentConfig, f: float) -> Dict[str, Any]:
    coefficient = config.coefficient or CAGE_COEFFICIENT[config.graph]
    lattice = cage_lattice(config.graph, max(coefficient, 2 * CAGE_COEFFICIENT[config.graph]))
    assignment = create_coin_assignment(*config.coins(), variables=config.variables())
    walk = create_walk(lattice, create_gauge(config.graph, f), assignment)
    initial = parse_init_spec(config.init, config.graph)
    max_iter = max(coefficient, 2 * CAGE_COEFFICIENT[config.graph])
    if initial is None:
        reports = hub_slot_cages(walk, tol=config.tol, max_iter=max_iter)
        return {
            "flux": f,
            "reports": {name: report.model_dump(by_alias=True) for name, report in reports.items()},
        }
    state = centered_state(lattice, initial)
    report = detect_cage(walk, localized_state(lattice, state), tol=config.tol, max_iter=max_iter)
    report.initial = state.label()
    if report.caged:
        print(f"caged: n_c = {report.n_c}, radius = {report.radius}, period = {report.period}")
    else:
        print(f"not caged within {len(report.b)} Arnoldi steps")
    return {"flux": f, "report": report.model_dump(by_alias=True)}


def cmd_arnoldi(config: ExperimentConfig) -> int:
    """Cage report at one flux, b_n(f) scan over a grid, or b_n(f, x) surface with --sweep."""
    fluxes = [float(f) for f in parse_flux_spec(config.flux)]
    if len(fluxes) == 1 and not config.sweep:
        write_json(_arnoldi_report(config, fluxes[0]), _output_path(config, ".json"))
        return 0

    initial = parse_init_spec(config.init, config.graph) or BasisState(
        (0,) * CELL_DIMENSION[config.graph], SiteKind.HUB_A, 0
    )
    if config.sweep:
        frame = coefficient_surface(
            config.graph, config.coins(), initial, fluxes, parse_sweep_spec(config.sweep),
            config.coefficient, config.threads,
        )
        path = write_csv(frame, _output_path(config, ".csv"))
        if config.svg:
            write_scatter_svg(frame, "f", "x", _svg_path(path), color=frame.columns[-1])
        return 0

    scan = critical_flux_scan(config.graph, config.coins(), initial, fluxes, config.coefficient, config.threads)
    path = write_csv(scan.to_frame(), _output_path(config, ".csv"))
    if config.svg:
        write_line_svg(scan.to_frame(), "f", f"b{scan.coefficient}", _svg_path(path), log=True)
    if scan.minima:
        f_min, b_min = scan.minima[0]
        print(f"deepest b_{scan.coefficient} minimum {b_min:.2e} at f = {f_min:.6g}")
    return 0


def cmd_evolve(config: ExperimentConfig) -> int:
    """Per-site probabilities over time, with the first return to the initial state."""
    f = _single_flux(config)
    needed = 2 * config.steps + 4 if config.graph is Graph.DC else config.steps + 4
    cells = config.cells or needed + 1
    if cells < needed:
        logger.warning(f"⚠ {cells} cells may let the wavefront reach the boundary within {config.steps} steps")
    lattice = create_lattice(config.graph, cells, Boundary.OPEN)
    assignment = create_coin_assignment(*config.coins(), variables=config.variables())
    walk = create_walk(lattice, create_gauge(config.graph, f), assignment)
    initial = parse_init_spec(config.init, config.graph)
    if initial is None:
        raise ConfigError("evolve needs a single initial state")
    if config.adjacency:
        write_adjacency_json(lattice, config.adjacency, walk.gauge)
    state = centered_state(lattice, initial)
    psi0 = localized_state(lattice, state)

    states = list(evolve_series(walk, psi0, config.steps))
    slots = snapshot_frame(lattice, iter(states))
    path = _output_path(config, ".csv")
    write_csv(site_frame(slots), path)
    write_csv(slots, path.with_name(f"{path.stem}_slots{path.suffix}"))

    period = next((step for step, psi in states[1:] if equal_up_to_phase(psi, psi0)), None)
    spread = rms_spread(lattice, states[-1][1], state.cell)
    if period is not None:
        print(f"returns to the initial state at T = {period}")
    else:
        print(f"no return within {config.steps} steps; rms spread {spread:.3f} cells")
    return 0


def cmd_superlattice(config: ExperimentConfig) -> int:
    """Predicted walls and brute-force verdicts for every interior starting site."""
    f = _single_flux(config)
    layout = normalize_layout(config.layout)
    verdicts, skipped = [], 0
    for cell in range(len(layout)):
        for kind in (SiteKind.HUB_A, SiteKind.RIM_B, SiteKind.RIM_C):
            if kind is not SiteKind.HUB_A and cell == len(layout) - 1:
                continue
            try:
                walls = predict_superlattice_cage(layout, cell, f, kind)
                verdicts.append(verify_superlattice_cage(layout, cell, kind, f, predicted=walls))
            except LatticeError:
                skipped += 1
    confirmed = sum(v.agrees for v in verdicts)
    caged = sum(v.caged for v in verdicts)
    write_json(
        {
            "layout": layout,
            "flux": f,
            "coins": {c: c + "4" for c in LAYOUT_COINS},
            "verdicts": [v.model_dump() for v in verdicts],
            "skipped": skipped,
        },
        _output_path(config, ".json"),
    )
    print(f"{confirmed}/{len(verdicts)} predictions confirmed, {caged} caged, {skipped} skipped near the chain ends")
    return 0


def cmd_commensurate(config: ExperimentConfig) -> int:
    """Commensurate rotation angles for periodic T3 cages."""
    solutions = commensurate_angle_search(config.q1_max, config.q2_max)
    write_json(
        {"q1_max": config.q1_max, "q2_max": config.q2_max, "solutions": [s.model_dump() for s in solutions]},
        _output_path(config, ".json"),
    )
    for s in solutions:
        tag = " (trivial)" if s.trivial else ""
        print(f"alpha = {s.p1}pi/{s.q1}: pinch at {s.p2}pi/{s.q2}, period {s.period}{tag}")
    return 0


HANDLERS = {
    "bands": cmd_bands,
    "butterfly": cmd_butterfly,
    "arnoldi": cmd_arnoldi,
    "evolve": cmd_evolve,
    "superlattice": cmd_superlattice,
    "appendix-e": cmd_commensurate,
    "commensurate": cmd_commensurate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qwcage",
        description="Discrete-time quantum walks on the diamond chain and T3 lattice in a magnetic field",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON experiment file; flags override its values")
    parser.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--graph", choices=[g.value for g in Graph])
    parser.add_argument("--coin-a", dest="coin_a", help="hub coin spec, e.g. G4, H4, G6")
    parser.add_argument("--coin-b", dest="coin_b", help="b rim coin spec, e.g. U2:pi/4,pi,0,0")
    parser.add_argument("--coin-c", dest="coin_c", help="c rim coin spec (defaults to the b coin)")
    parser.add_argument("--flux", help="value, a:b:n grid or q<=Q rationals")
    parser.add_argument("--k", type=int, help="wave vectors per flux")
    parser.add_argument("--init", help="cell,kind,slot relative to the lattice centre, or 'all'")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--cells", type=int)
    parser.add_argument("--coefficient", type=int, help="Arnoldi index n* scanned by arnoldi")
    parser.add_argument("--sweep", help="a:b:n grid for the free name x in coin specs")
    parser.add_argument("--layout", help="superlattice hub coins, e.g. HHHHGHHHHG")
    parser.add_argument("--q1-max", dest="q1_max", type=int)
    parser.add_argument("--q2-max", dest="q2_max", type=int)
    parser.add_argument("--out")
    parser.add_argument("--adjacency", help="evolve: also write the lattice edge list with Peierls phases")
    parser.add_argument("--svg", action="store_true", default=None)
    parser.add_argument("--threads", type=int)
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Defaults < JSON config file < command-line flags."""
    values: Dict[str, Any] = {}
    if args.config:
        try:
            values.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    flags = {
        key: value
        for key, value in vars(args).items()
        if key not in {"config", "print_config", "verbose"} and value is not None
    }
    values.update(flags)
    if "threads" not in values:
        values["threads"] = get_simulation_config().threads
    return ExperimentConfig(**values)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = "DEBUG" if args.verbose else get_simulation_config().log_level
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO), format="%(levelname)s %(name)s: %(message)s")

    try:
        config = load_config(args)
        config.validate_inputs()
    except (ValueError, ValidationError) as exc:
        logger.error(f"✗ Invalid configuration: {exc}")
        return 2

    if args.print_config:
        print(config.model_dump_json(indent=2))
        return 0

    try:
        return HANDLERS[config.command](config)
    except USAGE_ERRORS as exc:
        logger.error(f"✗ {config.command}: {exc}")
        return 2
    except QuantumWalkError as exc:
        logger.error(f"✗ {config.command} failed: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
