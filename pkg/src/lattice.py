"""
Lattice Geometry
Diamond chain (DC) and T3 (dice) graphs, Hilbert-space basis enumeration
and Peierls gauge fields on their edges

A basis state is a pair (site, directed edge leaving the site). Hub sites `a`
sit on the lattice points, rim site `b` lies below and rim site `c` above the
hub row. Slot numbering:

    DC hub     0 right-up (c_n), 1 left-up (c_{n-1}),
               2 left-down (b_{n-1}), 3 right-down (b_n)
    DC rim     0 right, 1 left
    T3 hub     anticlockwise from 30 degrees: 0 c, 1 b, 2 c, 3 b, 4 c, 5 b
    T3 rim     0 right edge, 1 vertical edge, 2 left edge
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

from src.errors import (
    DanglingEdgeError,
    GaugeError,
    LatticeError,
    NonAdjacentError,
)

logger = logging.getLogger(__name__)

Cell = Tuple[int, ...]


class Graph(str, Enum):
    """Supported graphs."""

    DC = "dc"
    T3 = "t3"


class SiteKind(str, Enum):
    """Site sublattices; the value is the one-letter label used in files."""

    HUB_A = "A"
    RIM_B = "B"
    RIM_C = "C"


class Boundary(str, Enum):
    PERIODIC = "periodic"
    OPEN = "open"


class GaugeVariant(str, Enum):
    DC_SINGLE_EDGE = "dc-single-edge"
    T3_LANDAU = "t3-landau"
    T3_PERIODIC_THIRD = "t3-periodic-third"


KIND_ORDER = (SiteKind.HUB_A, SiteKind.RIM_B, SiteKind.RIM_C)
RIM_KINDS = (SiteKind.RIM_B, SiteKind.RIM_C)

COORDINATION = {
    Graph.DC: {SiteKind.HUB_A: 4, SiteKind.RIM_B: 2, SiteKind.RIM_C: 2},
    Graph.T3: {SiteKind.HUB_A: 6, SiteKind.RIM_B: 3, SiteKind.RIM_C: 3},
}

CELL_DIMENSION = {Graph.DC: 1, Graph.T3: 2}

# (rim kind, rim slot) -> (hub cell relative to the rim cell, hub slot)
RIM_BONDS: Dict[Graph, Dict[Tuple[SiteKind, int], Tuple[Cell, int]]] = {
    Graph.DC: {
        (SiteKind.RIM_B, 0): ((1,), 2),
        (SiteKind.RIM_B, 1): ((0,), 3),
        (SiteKind.RIM_C, 0): ((1,), 1),
        (SiteKind.RIM_C, 1): ((0,), 0),
    },
    Graph.T3: {
        (SiteKind.RIM_B, 0): ((1, 0), 3),
        (SiteKind.RIM_B, 1): ((1, -1), 1),
        (SiteKind.RIM_B, 2): ((0, 0), 5),
        (SiteKind.RIM_C, 0): ((1, 0), 2),
        (SiteKind.RIM_C, 1): ((0, 1), 4),
        (SiteKind.RIM_C, 2): ((0, 0), 0),
    },
}

# hub slot -> (rim kind, rim cell relative to the hub cell, rim slot)
HUB_BONDS: Dict[Graph, Dict[int, Tuple[SiteKind, Cell, int]]] = {
    graph: {
        hub_slot: (kind, tuple(-d for d in offset), rim_slot)
        for (kind, rim_slot), (offset, hub_slot) in table.items()
    }
    for graph, table in RIM_BONDS.items()
}

# Site positions inside a cell: DC in (x, y), T3 in oblique (u, v)
SITE_OFFSETS = {
    Graph.DC: {
        SiteKind.HUB_A: (0.0, 0.0),
        SiteKind.RIM_B: (0.5, -0.5),
        SiteKind.RIM_C: (0.5, 0.5),
    },
    Graph.T3: {
        SiteKind.HUB_A: (0.0, 0.0),
        SiteKind.RIM_B: (2.0 / 3.0, -1.0 / 3.0),
        SiteKind.RIM_C: (1.0 / 3.0, 1.0 / 3.0),
    },
}

# Anticlockwise plaquette loops attached to a cell, as (cell offset, kind)
PLAQUETTE_LOOPS: Dict[Graph, List[List[Tuple[Cell, SiteKind]]]] = {
    Graph.DC: [
        [((0,), SiteKind.HUB_A), ((0,), SiteKind.RIM_B),
         ((1,), SiteKind.HUB_A), ((0,), SiteKind.RIM_C)],
    ],
    Graph.T3: [
        [((0, 0), SiteKind.HUB_A), ((0, 0), SiteKind.RIM_B),
         ((1, 0), SiteKind.HUB_A), ((0, 0), SiteKind.RIM_C)],
        [((0, 0), SiteKind.HUB_A), ((0, 0), SiteKind.RIM_C),
         ((0, 1), SiteKind.HUB_A), ((-1, 1), SiteKind.RIM_B)],
        [((0, 0), SiteKind.HUB_A), ((-1, 1), SiteKind.RIM_B),
         ((-1, 1), SiteKind.HUB_A), ((-1, 0), SiteKind.RIM_C)],
    ],
}

# Hub -> b phases per b slot for the periodic gauge at f = -1/3
_PERIODIC_THIRD_B_PHASES = (0.0, 2.0 * math.pi / 3.0, -2.0 * math.pi / 3.0)


def _add(a: Cell, b: Cell) -> Cell:
    return tuple(x + y for x, y in zip(a, b))


def _sub(a: Cell, b: Cell) -> Cell:
    return tuple(x - y for x, y in zip(a, b))


def reduce_flux(value: float) -> float:
    """Reduce a flux (in flux quanta) to the interval (-1/2, 1/2]."""
    value = round(value, 12)
    return 0.5 - ((0.5 - value) % 1.0)


@dataclass(frozen=True, order=True)
class BasisState:
    """One Hilbert-space basis vector: a site and one of its edge slots."""

    cell: Cell
    kind: SiteKind
    slot: int

    def site(self) -> Tuple[Cell, SiteKind]:
        return self.cell, self.kind

    def label(self) -> str:
        return f"{','.join(str(c) for c in self.cell)},{self.kind.value},{self.slot}"

    def to_dict(self) -> Dict[str, Any]:
        return {"cell": list(self.cell), "kind": self.kind.value, "slot": self.slot}


def coordination(graph: Graph, kind: SiteKind) -> int:
    return COORDINATION[graph][kind]


def validate_state(graph: Graph, state: BasisState) -> None:
    """Raise LatticeError unless the state is well formed for the graph."""
    if len(state.cell) != CELL_DIMENSION[graph]:
        raise LatticeError(f"{graph.value} cells have {CELL_DIMENSION[graph]} coordinates, got {state.cell}")
    if not 0 <= state.slot < COORDINATION[graph][state.kind]:
        raise LatticeError(f"slot {state.slot} out of range for {state.kind.value} on {graph.value}")


def infinite_partner(graph: Graph, state: BasisState) -> BasisState:
    """Partner state across the edge on the infinite graph."""
    validate_state(graph, state)
    if state.kind is SiteKind.HUB_A:
        kind, rim_offset, rim_slot = HUB_BONDS[graph][state.slot]
        return BasisState(_add(state.cell, rim_offset), kind, rim_slot)
    hub_offset, hub_slot = RIM_BONDS[graph][(state.kind, state.slot)]
    return BasisState(_add(state.cell, hub_offset), SiteKind.HUB_A, hub_slot)


def site_position(graph: Graph, cell: Cell, kind: SiteKind) -> Tuple[float, float]:
    """Cartesian position of a site (unit lattice spacing between hubs)."""
    du, dv = SITE_OFFSETS[graph][kind]
    if graph is Graph.DC:
        return cell[0] + du, dv
    u, v = cell[0] + du, cell[1] + dv
    return u + 0.5 * v, v * math.sqrt(3.0) / 2.0


def oblique_coordinates(cell: Cell, kind: SiteKind) -> Tuple[float, float]:
    """T3 site position in the (a1, a2) lattice basis."""
    du, dv = SITE_OFFSETS[Graph.T3][kind]
    return cell[0] + du, cell[1] + dv


def cell_distance(graph: Graph, a: Cell, b: Cell) -> int:
    """Number of hub-to-hub hops separating two cells."""
    d = _sub(a, b)
    if graph is Graph.DC:
        return abs(d[0])
    return max(abs(d[0]), abs(d[1]), abs(d[0] + d[1]))


@dataclass(frozen=True)
class GaugeField:
    """
    Peierls phases on the edges of a graph.

    Phases are stored implicitly: `rim_phase` returns the phase acquired when
    hopping from the hub into the rim across a given rim slot; the reverse
    hop carries the opposite phase.
    """

    graph: Graph
    flux: float
    variant: GaugeVariant
    p: Optional[int] = None
    q: Optional[int] = None

    def rim_phase(self, rim_cell: Cell, rim_kind: SiteKind, rim_slot: int) -> float:
        """
        Phase of the hub -> rim hop on the edge at (rim_cell, rim_kind, rim_slot).

        Args:
            rim_cell: Cell of the rim site (hub position is derived from it)
            rim_kind: RIM_B or RIM_C
            rim_slot: Slot of the rim site carrying the edge

        Returns:
            Phase in radians
        """
        if self.variant is GaugeVariant.DC_SINGLE_EDGE:
            # marked edge c_n -> a_n carries +2 pi f
            if rim_kind is SiteKind.RIM_C and rim_slot == 1:
                return -2.0 * math.pi * self.flux
            return 0.0

        if self.variant is GaugeVariant.T3_PERIODIC_THIRD:
            if rim_kind is SiteKind.RIM_C:
                return 0.0
            return -3.0 * self.flux * _PERIODIC_THIRD_B_PHASES[rim_slot]

        hub_offset, _ = RIM_BONDS[Graph.T3][(rim_kind, rim_slot)]
        u_hub, v_hub = oblique_coordinates(_add(rim_cell, hub_offset), SiteKind.HUB_A)
        u_rim, v_rim = oblique_coordinates(rim_cell, rim_kind)
        kappa = 6.0 * math.pi * self.flux
        return kappa * 0.5 * (u_hub + u_rim) * (v_rim - v_hub)

    def describe(self) -> str:
        if self.p is not None:
            return f"{self.variant.value}(f={self.p}/{self.q})"
        return f"{self.variant.value}(f={self.flux:.6g})"


def dc_gauge(flux: float) -> GaugeField:
    """Single marked edge per diamond."""
    return GaugeField(Graph.DC, float(flux), GaugeVariant.DC_SINGLE_EDGE)


def t3_landau_gauge(p: int, q: int) -> GaugeField:
    """Landau gauge at rational flux p/q, periodic with q cells along a1."""
    if q < 1:
        raise GaugeError(f"denominator must be positive, got {q}")
    if math.gcd(p, q) != 1:
        raise GaugeError(f"flux {p}/{q} is not in lowest terms")
    return GaugeField(Graph.T3, p / q, GaugeVariant.T3_LANDAU, p, q)


def t3_periodic_third_gauge(flux: float) -> GaugeField:
    """Gauge sharing the T3 tiling periodicity; exists only for f = +-1/3."""
    if abs(abs(flux) - 1.0 / 3.0) > 1e-12:
        raise GaugeError(f"periodic gauge requires f = +-1/3, got {flux}")
    sign = 1 if flux > 0 else -1
    return GaugeField(Graph.T3, sign / 3.0, GaugeVariant.T3_PERIODIC_THIRD, sign, 3)


def create_gauge(graph: Graph, flux: float, variant: Optional[GaugeVariant] = None) -> GaugeField:
    """
    Build the default gauge for a graph.

    Args:
        graph: DC or T3
        flux: Reduced flux per plaquette
        variant: Force a T3 variant; Landau is the default

    Returns:
        GaugeField
    """
    graph = Graph(graph)
    if graph is Graph.DC:
        return dc_gauge(flux)
    if variant is GaugeVariant.T3_PERIODIC_THIRD:
        return t3_periodic_third_gauge(flux)
    fraction = Fraction(flux).limit_denominator(10_000)
    if abs(float(fraction) - flux) < 1e-12:
        return t3_landau_gauge(fraction.numerator, fraction.denominator)
    # irrational-looking flux: fine for open lattices, not for Bloch blocks
    return GaugeField(Graph.T3, float(flux), GaugeVariant.T3_LANDAU)


def _edge_between(graph: Graph, hub_cell: Cell, rim_cell: Cell, rim_kind: SiteKind) -> Tuple[int, int]:
    for (kind, rim_slot), (offset, hub_slot) in RIM_BONDS[graph].items():
        if kind is rim_kind and _add(rim_cell, offset) == hub_cell:
            return rim_slot, hub_slot
    raise NonAdjacentError(f"no edge between hub {hub_cell} and {rim_kind.value}{rim_cell}")


def peierls_phase(gauge: GaugeField, from_state: BasisState, to_state: BasisState) -> float:
    """
    Phase acquired hopping from `from_state` to the opposite state `to_state`.

    Raises:
        NonAdjacentError: if the two states are not the two ends of one edge
    """
    if infinite_partner(gauge.graph, from_state) != to_state:
        raise NonAdjacentError(f"{from_state.label()} and {to_state.label()} are not opposite edge states")
    if from_state.kind is SiteKind.HUB_A:
        return gauge.rim_phase(to_state.cell, to_state.kind, to_state.slot)
    return -gauge.rim_phase(from_state.cell, from_state.kind, from_state.slot)


def plaquettes_per_cell(graph: Graph) -> int:
    return len(PLAQUETTE_LOOPS[graph])


def plaquette_sites(graph: Graph, plaquette: Tuple[Cell, int]) -> List[Tuple[Cell, SiteKind]]:
    """Anticlockwise site loop of plaquette (cell, index)."""
    cell, index = plaquette
    loops = PLAQUETTE_LOOPS[graph]
    if len(cell) != CELL_DIMENSION[graph] or not 0 <= index < len(loops):
        raise LatticeError(f"unknown plaquette {plaquette} on {graph.value}")
    return [(_add(cell, offset), kind) for offset, kind in loops[index]]


def plaquette_flux(gauge: GaugeField, plaquette: Tuple[Cell, int]) -> float:
    """
    Oriented phase sum around a plaquette divided by 2 pi.

    Args:
        gauge: Gauge field
        plaquette: (cell, index) with index < plaquettes_per_cell(graph)

    Returns:
        Reduced flux in (-1/2, 1/2]
    """
    loop = plaquette_sites(gauge.graph, plaquette)
    total = 0.0
    for (cell_a, kind_a), (cell_b, kind_b) in zip(loop, loop[1:] + loop[:1]):
        if kind_a is SiteKind.HUB_A:
            rim_slot, _ = _edge_between(gauge.graph, cell_a, cell_b, kind_b)
            total += gauge.rim_phase(cell_b, kind_b, rim_slot)
        else:
            rim_slot, _ = _edge_between(gauge.graph, cell_b, cell_a, kind_a)
            total -= gauge.rim_phase(cell_a, kind_a, rim_slot)
    return reduce_flux(total / (2.0 * math.pi))


@dataclass(frozen=True)
class Bond:
    """One undirected edge of a finite lattice, stored by basis indices."""

    hub: int
    rim: int
    phase: float  # hub -> rim
    wrap: Cell  # hub cell minus rim cell, in units of the lattice extent


@dataclass(frozen=True)
class Lattice:
    """
    Finite piece of a graph: `extent` cells per direction with periodic or
    open boundaries. Periodic lattices double as Bloch supercells.
    """

    graph: Graph
    extent: Cell
    boundary: Boundary = Boundary.OPEN

    def __post_init__(self):
        object.__setattr__(self, "graph", Graph(self.graph))
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "extent", tuple(int(n) for n in self.extent))
        if len(self.extent) != CELL_DIMENSION[self.graph]:
            raise LatticeError(
                f"{self.graph.value} needs {CELL_DIMENSION[self.graph]} extent values, got {self.extent}"
            )
        if any(n < 1 for n in self.extent):
            raise LatticeError(f"extent must be at least one cell per direction, got {self.extent}")

    @property
    def states_per_cell(self) -> int:
        return sum(COORDINATION[self.graph].values())

    @property
    def num_cells(self) -> int:
        return math.prod(self.extent)

    @property
    def dimension(self) -> int:
        return self.num_cells * self.states_per_cell

    def cells(self) -> Iterator[Cell]:
        """Cells in cell-major (row-major) order."""
        return product(*(range(n) for n in self.extent))

    def center_cell(self) -> Cell:
        return tuple(n // 2 for n in self.extent)

    @cached_property
    def basis(self) -> List[BasisState]:
        states = []
        for cell in self.cells():
            for kind in KIND_ORDER:
                for slot in range(COORDINATION[self.graph][kind]):
                    states.append(BasisState(cell, kind, slot))
        return states

    @cached_property
    def index(self) -> Dict[BasisState, int]:
        return {state: i for i, state in enumerate(self.basis)}

    @cached_property
    def hub_mask(self) -> List[bool]:
        return [state.kind is SiteKind.HUB_A for state in self.basis]

    def contains(self, cell: Cell) -> bool:
        return all(0 <= c < n for c, n in zip(cell, self.extent))

    def wrap(self, cell: Cell) -> Optional[Tuple[Cell, Cell]]:
        """Canonical cell and wrap vector, or None outside an open lattice."""
        if self.boundary is Boundary.OPEN:
            return (cell, (0,) * len(cell)) if self.contains(cell) else None
        canonical = tuple(c % n for c, n in zip(cell, self.extent))
        shift = tuple(c // n for c, n in zip(cell, self.extent))
        return canonical, shift

    def opposite(self, state: BasisState) -> BasisState:
        """
        Partner state across the edge of `state` on this lattice.

        Raises:
            DanglingEdgeError: for open-boundary edges leaving the lattice
        """
        if state not in self.index:
            raise LatticeError(f"{state.label()} is not on this lattice")
        partner = infinite_partner(self.graph, state)
        wrapped = self.wrap(partner.cell)
        if wrapped is None:
            raise DanglingEdgeError(f"{state.label()} has no partner inside the open lattice")
        return BasisState(wrapped[0], partner.kind, partner.slot)

    def bonds(self, gauge: Optional[GaugeField] = None) -> List[Bond]:
        """
        Enumerate edges rim-first so every undirected edge appears once.

        Args:
            gauge: Gauge field for the phases (zero field if omitted)

        Returns:
            List of Bond
        """
        if gauge is not None and gauge.graph is not self.graph:
            raise GaugeError(f"gauge for {gauge.graph.value} used on a {self.graph.value} lattice")
        index = self.index
        result = []
        for cell in self.cells():
            for kind in RIM_KINDS:
                for slot in range(COORDINATION[self.graph][kind]):
                    offset, hub_slot = RIM_BONDS[self.graph][(kind, slot)]
                    wrapped = self.wrap(_add(cell, offset))
                    if wrapped is None:
                        continue
                    hub_cell, shift = wrapped
                    phase = gauge.rim_phase(cell, kind, slot) if gauge is not None else 0.0
                    result.append(Bond(
                        hub=index[BasisState(hub_cell, SiteKind.HUB_A, hub_slot)],
                        rim=index[BasisState(cell, kind, slot)],
                        phase=phase,
                        wrap=shift,
                    ))
        return result

    def dangling_states(self) -> List[BasisState]:
        covered = set()
        for bond in self.bonds():
            covered.add(bond.hub)
            covered.add(bond.rim)
        return [state for i, state in enumerate(self.basis) if i not in covered]

    def plaquettes(self) -> List[Tuple[Cell, int]]:
        return [(cell, i) for cell in self.cells() for i in range(plaquettes_per_cell(self.graph))]

    def site_of(self, index: int) -> Tuple[Cell, SiteKind]:
        return self.basis[index].site()


def enumerate_basis(graph: Union[Graph, str], extent: Union[int, Cell]) -> List[BasisState]:
    """
    Ordered basis of a lattice piece: cell-major, then kind A, B, C, then slot.

    Args:
        graph: "dc" or "t3"
        extent: Number of cells (int for DC) or per-direction tuple

    Returns:
        List of BasisState, whose positions define matrix indices everywhere
    """
    graph = Graph(graph)
    if isinstance(extent, int):
        extent = (extent,) * CELL_DIMENSION[graph]
    return Lattice(graph, tuple(extent)).basis


def opposite(state: BasisState, lattice: Lattice) -> BasisState:
    """Module-level alias of Lattice.opposite."""
    return lattice.opposite(state)


def adjacency_records(lattice: Lattice, gauge: Optional[GaugeField] = None) -> List[Dict[str, Any]]:
    """Both directions of every edge as {from, to, phase} records."""
    records = []
    for bond in lattice.bonds(gauge):
        hub = lattice.basis[bond.hub].to_dict()
        rim = lattice.basis[bond.rim].to_dict()
        records.append({"from": hub, "to": rim, "phase": bond.phase})
        records.append({"from": rim, "to": hub, "phase": -bond.phase})
    return records
