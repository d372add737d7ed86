"""
Walk Operator
Shift operator with Peierls phases, walk operator W = S C and real-space
evolution of walker states
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import sparse

from src.coins import CoinAssignment, assemble_coin_operator
from src.errors import CoinError, LatticeError, NotUnitaryError
from src.lattice import (
    COORDINATION,
    KIND_ORDER,
    BasisState,
    Boundary,
    Cell,
    GaugeField,
    Graph,
    Lattice,
    SiteKind,
    cell_distance,
)

logger = logging.getLogger(__name__)

WALK_UNITARITY_TOL = 1e-10


def sparse_unitarity_defect(matrix: sparse.spmatrix) -> float:
    product = (matrix.conj().T @ matrix) - sparse.identity(matrix.shape[0], dtype=complex, format="csr")
    return float(abs(product).max()) if product.nnz else 0.0


@dataclass(frozen=True, eq=False)
class WalkOperator:
    """W = S C on a finite lattice, with the gauge and coins it was built from."""

    lattice: Lattice
    matrix: sparse.csr_matrix
    gauge: Optional[GaugeField] = None
    coins: Optional[CoinAssignment] = None

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other):
        return self.matrix @ other

    def apply(self, psi: np.ndarray) -> np.ndarray:
        return self.matrix @ psi

    def unitarity_defect(self) -> float:
        return sparse_unitarity_defect(self.matrix)


def shift_operator(lattice: Lattice, gauge: Optional[GaugeField] = None) -> sparse.csr_matrix:
    """
    Hermitian shift S swapping the two states of every edge.

    Args:
        lattice: Finite lattice (periodic or open)
        gauge: Peierls phases; zero field if omitted

    Returns:
        Sparse matrix with S @ S = I; dangling open-boundary states map to themselves
    """
    rows, cols, values = [], [], []
    for bond in lattice.bonds(gauge):
        hop = np.exp(1j * bond.phase)
        rows += [bond.rim, bond.hub]
        cols += [bond.hub, bond.rim]
        values += [hop, np.conj(hop)]
    for state in lattice.dangling_states():
        i = lattice.index[state]
        rows.append(i)
        cols.append(i)
        values.append(1.0 + 0.0j)
    n = lattice.dimension
    return sparse.csr_matrix((values, (rows, cols)), shape=(n, n), dtype=complex)


def walk_operator(
    shift: sparse.spmatrix,
    coin: sparse.spmatrix,
    lattice: Lattice,
    gauge: Optional[GaugeField] = None,
    coins: Optional[CoinAssignment] = None,
) -> WalkOperator:
    """
    Compose W = S C.

    Raises:
        CoinError: if S and C dimensions differ
        NotUnitaryError: if the product fails the unitarity check
    """
    if shift.shape != coin.shape:
        raise CoinError(f"shift {shift.shape} and coin {coin.shape} dimensions differ")
    matrix = sparse.csr_matrix(shift @ coin)
    defect = sparse_unitarity_defect(matrix)
    if defect > WALK_UNITARITY_TOL:
        raise NotUnitaryError(f"walk operator unitarity defect {defect:.2e}")
    return WalkOperator(lattice, matrix, gauge, coins)


def create_walk(lattice: Lattice, gauge: GaugeField, assignment: CoinAssignment) -> WalkOperator:
    """
    Build the walk operator of a lattice in one call.

    Args:
        lattice: Finite lattice
        gauge: Gauge field for the flux
        assignment: Coins per site

    Returns:
        WalkOperator
    """
    shift = shift_operator(lattice, gauge)
    coin = assemble_coin_operator(assignment, lattice)
    walk = walk_operator(shift, coin, lattice, gauge, assignment)
    logger.debug(f"Built walk on {lattice.graph.value} {lattice.extent} ({walk.dimension} states), {gauge.describe()}")
    return walk


def create_lattice(graph: Union[Graph, str], cells: int, boundary: Boundary = Boundary.OPEN) -> Lattice:
    """Chain of `cells` cells (DC) or a cells x cells patch (T3)."""
    graph = Graph(graph)
    extent = (cells,) if graph is Graph.DC else (cells, cells)
    return Lattice(graph, extent, boundary)


def localized_state(lattice: Lattice, state: BasisState) -> np.ndarray:
    """Unit vector on a single basis state."""
    if state not in lattice.index:
        raise LatticeError(f"{state.label()} is not on this lattice")
    psi = np.zeros(lattice.dimension, dtype=complex)
    psi[lattice.index[state]] = 1.0
    return psi


def site_state(lattice: Lattice, cell: Cell, kind: SiteKind, amplitudes: Sequence[complex]) -> np.ndarray:
    """Normalized state supported on the slots of one site."""
    n = COORDINATION[lattice.graph][kind]
    if len(amplitudes) != n:
        raise LatticeError(f"{kind.value} site has {n} slots, got {len(amplitudes)} amplitudes")
    psi = np.zeros(lattice.dimension, dtype=complex)
    for slot, amplitude in enumerate(amplitudes):
        psi[lattice.index[BasisState(tuple(cell), kind, slot)]] = amplitude
    norm = np.linalg.norm(psi)
    if norm == 0.0:
        raise LatticeError("site state has zero norm")
    return psi / norm


def evolve(walk: Union[WalkOperator, sparse.spmatrix], psi0: np.ndarray, steps: int) -> np.ndarray:
    """
    Apply W `steps` times.

    Args:
        walk: Walk operator
        psi0: Initial state
        steps: Number of steps (>= 0)

    Returns:
        Evolved state
    """
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    psi = np.array(psi0, dtype=complex)
    for _ in range(steps):
        psi = walk @ psi
    return psi


def evolve_series(walk: Union[WalkOperator, sparse.spmatrix], psi0: np.ndarray, steps: int) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (step, state) for step = 0 .. steps."""
    if steps < 0:
        raise ValueError(f"steps must be non-negative, got {steps}")
    psi = np.array(psi0, dtype=complex)
    yield 0, psi
    for step in range(1, steps + 1):
        psi = walk @ psi
        yield step, psi


def _site_slices(graph: Graph) -> List[Tuple[SiteKind, slice]]:
    slices, start = [], 0
    for kind in KIND_ORDER:
        n = COORDINATION[graph][kind]
        slices.append((kind, slice(start, start + n)))
        start += n
    return slices


def slot_probabilities(psi: np.ndarray) -> np.ndarray:
    return np.abs(psi) ** 2


def site_probabilities(lattice: Lattice, psi: np.ndarray) -> Dict[Tuple[Cell, SiteKind], float]:
    """
    Probability per site, summed over its slots.

    Returns:
        {(cell, kind): probability} in basis order; values sum to |psi|^2
    """
    per_cell = slot_probabilities(psi).reshape(lattice.num_cells, lattice.states_per_cell)
    slices = _site_slices(lattice.graph)
    result = {}
    for row, cell in zip(per_cell, lattice.cells()):
        for kind, part in slices:
            result[(cell, kind)] = float(row[part].sum())
    return result


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """|<a|b>| > 1 - tol for the normalized vectors."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return False
    return abs(np.vdot(a, b)) / (na * nb) > 1.0 - tol


def support_radius(lattice: Lattice, psi: np.ndarray, origin: Cell, floor: float = 1e-12) -> int:
    """Largest cell distance from `origin` carrying probability above `floor`."""
    radius = 0
    for (cell, _), p in site_probabilities(lattice, psi).items():
        if p > floor:
            radius = max(radius, cell_distance(lattice.graph, cell, origin))
    return radius


def rms_spread(lattice: Lattice, psi: np.ndarray, origin: Cell) -> float:
    """Probability-weighted RMS cell distance from `origin`."""
    total = 0.0
    for (cell, _), p in site_probabilities(lattice, psi).items():
        total += p * cell_distance(lattice.graph, cell, origin) ** 2
    return math.sqrt(total)


def snapshot_frame(lattice: Lattice, series: Iterator[Tuple[int, np.ndarray]], floor: float = 0.0) -> pd.DataFrame:
    """
    Per-slot dynamics table with columns step, cell, kind, slot, re, im, prob.

    Rows with probability not above `floor` are dropped.
    """
    labels = [",".join(str(c) for c in state.cell) for state in lattice.basis]
    kinds = [state.kind.value for state in lattice.basis]
    slots = [state.slot for state in lattice.basis]
    frames = []
    for step, psi in series:
        prob = slot_probabilities(psi)
        keep = np.flatnonzero(prob > floor)
        frames.append(pd.DataFrame({
            "step": step,
            "cell": [labels[i] for i in keep],
            "kind": [kinds[i] for i in keep],
            "slot": [slots[i] for i in keep],
            "re": psi.real[keep],
            "im": psi.imag[keep],
            "prob": prob[keep],
        }))
    if not frames:
        return pd.DataFrame(columns=["step", "cell", "kind", "slot", "re", "im", "prob"])
    return pd.concat(frames, ignore_index=True)


def site_frame(slot_frame: pd.DataFrame) -> pd.DataFrame:
    """Aggregate a per-slot table to (step, cell, kind, prob)."""
    grouped = slot_frame.groupby(["step", "cell", "kind"], sort=False, as_index=False)["prob"].sum()
    return grouped[["step", "cell", "kind", "prob"]]
