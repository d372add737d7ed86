"""
Diamond-Chain Superlattices
Hub coin layouts mixing H4 and G4, the right/left (RL) basis action of coins
and rim operators, cage-wall prediction and its verification by evolution
"""

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from src.coins import CoinParamsU2, as_coin, create_coin_assignment, grover, hadamard, identity
from src.errors import ConfigError, GaugeError, LatticeTooSmallError, NoOutChannelError
from src.lattice import BasisState, Boundary, Graph, Lattice, SiteKind, dc_gauge, reduce_flux
from src.sim_config import get_simulation_config
from src.walk import create_walk, evolve_series, site_state

logger = logging.getLogger(__name__)

RL_LABELS = ("R+", "R-", "L+", "L-")
LAYOUT_COINS = {"H": hadamard(4), "G": grover(4)}

# Generic hub and rim amplitudes with every RL component populated
GENERIC_HUB = (0.62, 0.35 + 0.41j, -0.28 + 0.2j, 0.47 - 0.1j)
GENERIC_RIM = (0.6, 0.3 + 0.74j)

RimCoin = Union[CoinParamsU2, np.ndarray, str]


def rl_transform() -> np.ndarray:
    """Columns R+, R-, L+, L- in hub slot order (right-up, left-up, left-down, right-down)."""
    s = 1.0 / math.sqrt(2.0)
    return np.array([
        [s, s, 0.0, 0.0],
        [0.0, 0.0, s, s],
        [0.0, 0.0, s, -s],
        [s, -s, 0.0, 0.0],
    ])


def to_rl(vector: np.ndarray) -> np.ndarray:
    return rl_transform().T @ vector


def _rim_matrix(coin: RimCoin) -> np.ndarray:
    if isinstance(coin, CoinParamsU2):
        return coin.matrix()
    return as_coin(coin)


def _dominant(coords: np.ndarray, tol: float = 1e-9) -> Optional[Tuple[str, complex]]:
    norm = np.linalg.norm(coords)
    i = int(np.argmax(np.abs(coords)))
    if norm == 0.0 or abs(coords[i]) / norm < 1.0 - tol:
        return None
    return RL_LABELS[i], complex(coords[i])


def coin_action_table(coin: np.ndarray) -> Dict[str, Optional[Tuple[str, complex]]]:
    """
    Image of each RL vector under a 4x4 hub coin.

    Returns:
        {source label: (target label, factor)}, or None where the image mixes RL vectors
    """
    transform = rl_transform()
    in_rl = transform.T @ np.asarray(coin, dtype=complex) @ transform
    return {label: _dominant(in_rl[:, j]) for j, label in enumerate(RL_LABELS)}


@dataclass(frozen=True)
class RimImage:
    """Part of S C_rim S applied to one RL vector that lands on a given hub."""

    shift: int
    amplitudes: np.ndarray

    @property
    def target(self) -> Optional[str]:
        dominant = _dominant(self.amplitudes)
        return dominant[0] if dominant else None

    @property
    def weight(self) -> float:
        return float(np.linalg.norm(self.amplitudes) ** 2)


def _rim_operator_images(rim_coin: RimCoin, f: float) -> Dict[str, Dict[int, np.ndarray]]:
    chain = Lattice(Graph.DC, (3,), Boundary.OPEN)
    rim = _rim_matrix(rim_coin)
    walk = create_walk(chain, dc_gauge(f), create_coin_assignment(identity(4), rim))
    hub_index = {
        n: [chain.index[BasisState((n,), SiteKind.HUB_A, slot)] for slot in range(4)] for n in range(3)
    }
    transform = rl_transform()
    images = {}
    for j, label in enumerate(RL_LABELS):
        psi = np.zeros(chain.dimension, dtype=complex)
        psi[hub_index[1]] = transform[:, j]
        out = walk @ (walk @ psi)
        images[label] = {n - 1: transform.T @ out[hub_index[n]] for n in range(3)}
    return images


def k_out_action(rim_coin: RimCoin, f: float, tol: float = 1e-12) -> Dict[str, RimImage]:
    """
    Transmitted part of S C_rim S: R vectors move one hub right, L vectors one hub left.

    Raises:
        NoOutChannelError: if the rim coin transmits nothing
    """
    result = {}
    for label, parts in _rim_operator_images(rim_coin, f).items():
        shift = 1 if label.startswith("R") else -1
        image = RimImage(shift, parts[shift])
        if image.weight < tol:
            raise NoOutChannelError(f"rim coin has no transmitted channel for {label}")
        result[label] = image
    return result


def k_in_action(rim_coin: RimCoin, f: float) -> Dict[str, RimImage]:
    """Reflected part of S C_rim S, staying on the same hub."""
    return {label: RimImage(0, parts[0]) for label, parts in _rim_operator_images(rim_coin, f).items()}


def _substitution_coin(f: float) -> str:
    reduced = reduce_flux(f)
    if abs(abs(reduced) - 0.5) < 1e-12:
        return "G"
    if abs(reduced) < 1e-12:
        return "H"
    raise GaugeError(f"superlattice walls are only predicted at f = 0 or 1/2, got f = {f}")


def normalize_layout(layout: Union[str, Sequence[str]]) -> str:
    text = "".join(layout).upper().replace("4", "")
    invalid = set(text) - set(LAYOUT_COINS)
    if not text or invalid:
        raise ConfigError(f"layout must be a non-empty string of H and G, got {layout!r}")
    return text


@dataclass(frozen=True)
class CageWalls:
    """Outermost hub cells reachable by the walker; None means it reaches the chain end."""

    left: Optional[int]
    right: Optional[int]

    @property
    def bounded(self) -> bool:
        return self.left is not None and self.right is not None


def rule_walls(layout: Union[str, Sequence[str]], initial_cell: int, f: float) -> CageWalls:
    """
    Walls for a hub start from the substitution rules.

    The walker moving right stops one cell past the first substitution coin
    at n0 + 1 or beyond. Moving left, the nearest neighbour is irrelevant and
    the walker stops on the first substitution coin at n0 - 2 or beyond.
    The substitution coin is G4 at f = 1/2 and H4 at f = 0.
    """
    layout = normalize_layout(layout)
    substitution = _substitution_coin(f)
    right = next((m + 1 for m in range(initial_cell + 1, len(layout)) if layout[m] == substitution), None)
    left = next((m for m in range(initial_cell - 2, -1, -1) if layout[m] == substitution), None)
    if right is not None and right > len(layout) - 1:
        right = None
    return CageWalls(left, right)


def _initial_labels(initial_cell: int, kind: SiteKind, cells: int) -> List[Tuple[int, int]]:
    if kind is SiteKind.HUB_A:
        return [(initial_cell, j) for j in range(4)]
    # a rim site feeds the right slots of hub n and the left slots of hub n + 1
    starts = [(initial_cell, 0), (initial_cell, 1), (initial_cell + 1, 2), (initial_cell + 1, 3)]
    return [(n, j) for n, j in starts if n < cells]


def predict_superlattice_cage(
    layout: Union[str, Sequence[str]],
    initial_cell: int,
    f: float,
    kind: SiteKind = SiteKind.HUB_A,
    rim_coin: RimCoin = "H2",
    tol: float = 1e-9,
) -> CageWalls:
    """
    Predict cage walls for a walker starting on one site of a superlattice chain.

    Follows RL labels hub to hub: the hub coin maps labels through its RL
    table, then S C_rim S sends them back to the same hub or on to a
    neighbour. A rim start splits onto its two hubs. For hub starts the
    result reproduces `rule_walls`.

    Args:
        layout: Hub coin per cell, e.g. "HHGHH"
        initial_cell: Cell of the initial site
        f: Flux, 0 or 1/2 modulo 1
        kind: Initial site kind
        rim_coin: Coin on every rim site
        tol: Amplitude below which a transition is treated as absent

    Returns:
        CageWalls
    """
    layout = normalize_layout(layout)
    kind = SiteKind(kind)
    if not 0 <= initial_cell < len(layout):
        raise LatticeTooSmallError(f"initial cell {initial_cell} outside layout of {len(layout)} cells")
    _substitution_coin(f)

    transform = rl_transform()
    coin_rl = {c: transform.T @ LAYOUT_COINS[c] @ transform for c in set(layout)}
    images = _rim_operator_images(rim_coin, f)

    seen = set(_initial_labels(initial_cell, kind, len(layout)))
    frontier = deque(seen)
    while frontier:
        cell, label = frontier.popleft()
        coin = coin_rl[layout[cell]]
        for coined in np.flatnonzero(np.abs(coin[:, label]) > tol):
            for shift, amplitudes in images[RL_LABELS[coined]].items():
                target = cell + shift
                if not 0 <= target < len(layout):
                    continue
                for landed in np.flatnonzero(np.abs(amplitudes) > tol):
                    state = (target, int(landed))
                    if state not in seen:
                        seen.add(state)
                        frontier.append(state)

    reached = [cell for cell, _ in seen]
    left, right = min(reached), max(reached)
    return CageWalls(None if left == 0 else left, None if right == len(layout) - 1 else right)


class SuperlatticeVerdict(BaseModel):
    layout: str
    cell: int
    kind: str
    flux: float
    predicted_left: Optional[int] = None
    predicted_right: Optional[int] = None
    measured_left: int
    measured_right: int
    leak: float
    caged: bool
    agrees: bool


def superlattice_walk(layout: str, f: float, rim_coin: RimCoin = "H2"):
    chain = Lattice(Graph.DC, (len(layout),), Boundary.OPEN)
    overrides = {(n,): LAYOUT_COINS[c] for n, c in enumerate(layout)}
    assignment = create_coin_assignment(identity(4), _rim_matrix(rim_coin), hub_overrides=overrides)
    return create_walk(chain, dc_gauge(f), assignment)


def _outside(state: BasisState, walls: CageWalls) -> bool:
    n = state.cell[0]
    if state.kind is SiteKind.HUB_A:
        return (walls.left is not None and n < walls.left) or (walls.right is not None and n > walls.right)
    return (walls.left is not None and n < walls.left) or (walls.right is not None and n >= walls.right)


def verify_superlattice_cage(
    layout: Union[str, Sequence[str]],
    initial_cell: int,
    kind: SiteKind,
    f: float,
    steps: Optional[int] = None,
    predicted: Optional[CageWalls] = None,
    rim_coin: RimCoin = "H2",
) -> SuperlatticeVerdict:
    """
    Evolve a generic internal state and compare its reach with the predicted walls.

    Raises:
        LatticeTooSmallError: if a predicted wall touches the chain ends
    """
    layout = normalize_layout(layout)
    kind = SiteKind(kind)
    predicted = predicted or predict_superlattice_cage(layout, initial_cell, f, kind, rim_coin)
    for wall in (predicted.left, predicted.right):
        if wall is not None and not 1 <= wall <= len(layout) - 2:
            raise LatticeTooSmallError(f"predicted wall at cell {wall} is not interior to {len(layout)} cells")
    if steps is None:
        steps = 8 * len(layout) + 20

    walk = superlattice_walk(layout, f, rim_coin)
    chain = walk.lattice
    amplitudes = GENERIC_HUB if kind is SiteKind.HUB_A else GENERIC_RIM
    psi0 = site_state(chain, (initial_cell,), kind, amplitudes)

    floor = get_simulation_config().leak_tol
    outside = np.array([_outside(state, predicted) for state in chain.basis])
    hub_cells = np.array([s.cell[0] if s.kind is SiteKind.HUB_A else -1 for s in chain.basis])
    reached = np.zeros(chain.dimension)
    leak = 0.0
    for _, psi in evolve_series(walk, psi0, steps):
        prob = np.abs(psi) ** 2
        reached = np.maximum(reached, prob)
        leak = max(leak, float(prob[outside].sum()))

    visited = hub_cells[(hub_cells >= 0) & (reached > floor)]
    measured_left, measured_right = int(visited.min()), int(visited.max())
    caged = predicted.bounded and leak < floor
    # an unbounded side must reach the chain end
    expected = (
        0 if predicted.left is None else predicted.left,
        len(layout) - 1 if predicted.right is None else predicted.right,
    )
    agrees = leak < floor and (measured_left, measured_right) == expected
    verdict = SuperlatticeVerdict(
        layout=layout,
        cell=initial_cell,
        kind=kind.value,
        flux=float(f),
        predicted_left=predicted.left,
        predicted_right=predicted.right,
        measured_left=measured_left,
        measured_right=measured_right,
        leak=leak,
        caged=caged,
        agrees=agrees,
    )
    marker = "✓" if agrees else "✗"
    logger.info(
        f"{marker} {layout} from {kind.value}{initial_cell}: predicted [{predicted.left}, {predicted.right}], "
        f"measured [{measured_left}, {measured_right}], leak {leak:.1e}"
    )
    return verdict


@dataclass(frozen=True)
class SuperlatticeCase:
    layout: str
    cell: int
    kind: SiteKind
    f: float


def periodic_layout(period: int, repeats: int, offset: int = 0, f: float = 0.5, padding: int = 4) -> str:
    """Chain with one substitution coin every `period` cells in the background coin."""
    substitution = _substitution_coin(f)
    background = "H" if substitution == "G" else "G"
    cells = period * repeats + 2 * padding
    return "".join(substitution if (n - offset) % period == 0 else background for n in range(cells))


def superlattice_corpus(periods: Sequence[int] = range(2, 9), f: float = 0.5) -> List[SuperlatticeCase]:
    """Every hub and rim start across one period in the middle of periodic layouts."""
    cases = []
    for period in periods:
        layout = periodic_layout(period, 3, offset=period // 2, f=f)
        start = len(layout) // 2 - period // 2
        for cell in range(start, start + period):
            for kind in (SiteKind.HUB_A, SiteKind.RIM_B, SiteKind.RIM_C):
                cases.append(SuperlatticeCase(layout, cell, kind, f))
    return cases


def verify_corpus(cases: Sequence[SuperlatticeCase], threads: int = 1, steps: Optional[int] = None) -> List[SuperlatticeVerdict]:
    """Verify many cases, results in input order."""

    def run(case: SuperlatticeCase) -> SuperlatticeVerdict:
        return verify_superlattice_cage(case.layout, case.cell, case.kind, case.f, steps)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            verdicts = list(pool.map(run, cases))
    else:
        verdicts = [run(case) for case in cases]
    agreed = sum(v.agrees for v in verdicts)
    logger.info(f"Superlattice corpus: {agreed}/{len(verdicts)} predictions confirmed")
    return verdicts
