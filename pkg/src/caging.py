"""
Aharonov-Bohm Caging
Arnoldi detection of quantum-walk cages, cage support and dynamics period,
critical-flux scans and the commensurability search for periodic T3 cages
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, PrivateAttr
from scipy import linalg, sparse

from src.coins import create_coin_assignment
from src.errors import LatticeTooSmallError, NotCagedError, QuantumWalkError
from src.lattice import (
    BasisState,
    COORDINATION,
    Boundary,
    Cell,
    Graph,
    Lattice,
    SiteKind,
    cell_distance,
    create_gauge,
)
from src.sim_config import get_simulation_config
from src.walk import WalkOperator, create_lattice, create_walk, evolve_series, localized_state

logger = logging.getLogger(__name__)

# Arnoldi index at which cages terminate
CAGE_COEFFICIENT = {Graph.DC: 8, Graph.T3: 12}

Operator = Union[WalkOperator, sparse.spmatrix, np.ndarray]


def _matrix(walk: Operator):
    return walk.matrix if isinstance(walk, WalkOperator) else walk


@dataclass(frozen=True, eq=False)
class ArnoldiResult:
    """
    Krylov basis |0>, |1>, ... (columns), coefficients b_1..b_m and the
    Hessenberg matrix of W in that basis.
    """

    basis: np.ndarray
    b: np.ndarray
    hessenberg: np.ndarray
    n_c: Optional[int]

    @property
    def terminated(self) -> bool:
        return self.n_c is not None

    def coefficient(self, n: int) -> float:
        """b_n (1-based); zero past an early termination."""
        if n < 1:
            raise QuantumWalkError(f"Arnoldi coefficients start at b_1, got b_{n}")
        if n <= len(self.b):
            return float(self.b[n - 1])
        if self.terminated:
            return 0.0
        raise QuantumWalkError(f"b_{n} not computed (only {len(self.b)} iterations)")


def arnoldi(walk: Operator, psi0: np.ndarray, max_iter: int, tol: Optional[float] = None) -> ArnoldiResult:
    """
    Arnoldi recursion b_{n+1}|n+1> = W|n> - sum_{m<=n} <m|W|n>|m> with
    two-pass Gram-Schmidt.

    Args:
        walk: Walk operator or matrix
        psi0: Initial state
        max_iter: Maximum number of W applications (<= dimension)
        tol: Relative vanishing threshold for b_{n+1} / max(b_1..b_n)

    Returns:
        ArnoldiResult
    """
    tol = tol if tol is not None else get_simulation_config().arnoldi_tol
    operator = _matrix(walk)
    dim = operator.shape[0]
    if max_iter < 1 or max_iter > dim:
        raise QuantumWalkError(f"max_iter must lie in [1, {dim}], got {max_iter}")
    norm = np.linalg.norm(psi0)
    if norm == 0.0:
        raise QuantumWalkError("Arnoldi needs a non-zero initial vector")

    vectors = np.zeros((dim, max_iter + 1), dtype=complex)
    hessenberg = np.zeros((max_iter + 1, max_iter), dtype=complex)
    vectors[:, 0] = np.asarray(psi0, dtype=complex) / norm
    b: List[float] = []
    n_c = None

    for n in range(max_iter):
        w = operator @ vectors[:, n]
        known = vectors[:, : n + 1]
        for _ in range(2):
            overlaps = known.conj().T @ w
            w = w - known @ overlaps
            hessenberg[: n + 1, n] += overlaps
        beta = float(np.linalg.norm(w))
        scale = max(b) if b else 1.0
        b.append(beta)
        hessenberg[n + 1, n] = beta
        logger.debug(f"b_{n + 1} = {beta:.3e}")
        if beta < tol * scale:
            n_c = n + 1
            break
        vectors[:, n + 1] = w / beta

    if n_c is not None:
        return ArnoldiResult(vectors[:, :n_c], np.array(b), hessenberg[:n_c, :n_c], n_c)
    m = len(b)
    return ArnoldiResult(vectors[:, : m + 1], np.array(b), hessenberg[: m + 1, :m], None)


class SupportSite(BaseModel):
    cell: List[int]
    kind: str


class CageReport(BaseModel):
    """Outcome of a cage detection run, serialized as JSON."""

    schema_version: int = Field(default=1, serialization_alias="schema")
    caged: bool
    n_c: Optional[int] = None
    b: List[float]
    support: List[SupportSite]
    radius: int
    period: Optional[Union[int, str]] = None
    chi: Optional[float] = None
    leak: Optional[float] = None
    initial: Optional[str] = None

    _arnoldi: Optional[ArnoldiResult] = PrivateAttr(default=None)
    _lattice: Optional[Lattice] = PrivateAttr(default=None)

    @property
    def arnoldi(self) -> Optional[ArnoldiResult]:
        return self._arnoldi

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


@dataclass(frozen=True)
class PeriodResult:
    period: Optional[int]
    chi: Optional[float]

    @property
    def quasiperiodic(self) -> bool:
        return self.period is None

    def label(self) -> Union[int, str]:
        return "quasiperiodic" if self.period is None else self.period


def _support_indices(result: ArnoldiResult, floor: float) -> np.ndarray:
    return np.flatnonzero(np.max(np.abs(result.basis), axis=1) > floor)


def _origin_cell(lattice: Lattice, psi0: np.ndarray) -> Cell:
    return lattice.basis[int(np.argmax(np.abs(psi0)))].cell


def detect_cage(
    walk: WalkOperator,
    psi0: np.ndarray,
    tol: Optional[float] = None,
    verify_steps: Optional[int] = None,
    max_iter: Optional[int] = None,
    max_period: Optional[int] = None,
) -> CageReport:
    """
    Run Arnoldi from psi0 and describe the cage, if any.

    Args:
        walk: Walk operator on a finite lattice
        psi0: Initial state
        tol: Arnoldi vanishing threshold
        verify_steps: Evolution steps used to measure the leak out of the support
        max_iter: Arnoldi iteration cap (default: two unit cells worth of states)
        max_period: Period search cap for caged walks

    Returns:
        CageReport
    """
    config = get_simulation_config()
    verify_steps = config.verify_steps if verify_steps is None else verify_steps
    lattice = walk.lattice
    if max_iter is None:
        max_iter = min(walk.dimension, 2 * lattice.states_per_cell)

    result = arnoldi(walk, psi0, max_iter, tol)
    support_idx = _support_indices(result, config.amplitude_floor)
    sites = sorted({lattice.basis[i].site() for i in support_idx})
    origin = _origin_cell(lattice, psi0)
    radius = max((cell_distance(lattice.graph, cell, origin) for cell, _ in sites), default=0)

    inside = np.zeros(walk.dimension, dtype=bool)
    site_set = set(sites)
    for i, state in enumerate(lattice.basis):
        inside[i] = state.site() in site_set
    leak = 0.0
    for _, psi in evolve_series(walk, psi0 / np.linalg.norm(psi0), verify_steps):
        leak = max(leak, float(np.sum(np.abs(psi[~inside]) ** 2)))

    report = CageReport(
        caged=result.terminated,
        n_c=result.n_c,
        b=[float(x) for x in result.b],
        support=[SupportSite(cell=list(cell), kind=kind.value) for cell, kind in sites],
        radius=radius,
        leak=leak,
    )
    report._arnoldi = result
    report._lattice = lattice

    if result.terminated:
        period = dynamics_period(walk, report, max_period)
        report.period = period.label()
        report.chi = period.chi
        logger.info(f"✓ Cage detected: n_c={result.n_c}, radius={radius}, period={report.period}, leak={leak:.1e}")
    else:
        logger.info(f"No cage within {len(result.b)} Arnoldi steps (b_last={result.b[-1]:.3e})")
    return report


def dynamics_period(
    walk: Operator,
    cage: CageReport,
    max_period: Optional[int] = None,
    tol: Optional[float] = None,
) -> PeriodResult:
    """
    Smallest P with W^P v = e^{i chi} v for every Krylov vector v of the cage.

    Raises:
        NotCagedError: if the report is not a cage
    """
    config = get_simulation_config()
    max_period = max_period or config.max_period
    tol = tol if tol is not None else config.period_tol
    if not cage.caged or cage.arnoldi is None:
        raise NotCagedError("period requested for an uncaged walk")

    operator = _matrix(walk)
    basis = cage.arnoldi.basis
    current = basis.copy()
    for p in range(1, max_period + 1):
        current = operator @ current
        overlap = np.trace(basis.conj().T @ current) / basis.shape[1]
        chi = float(np.angle(overlap))
        residual = np.max(np.linalg.norm(current - np.exp(1j * chi) * basis, axis=0))
        if residual < tol:
            return PeriodResult(p, chi)
    return PeriodResult(None, None)


def hessenberg_period(hessenberg: np.ndarray, max_period: int = 200, tol: float = 1e-8) -> Optional[int]:
    """Smallest P making all eigenphase differences of the cage matrix multiples of 2 pi / P."""
    phases = np.angle(linalg.eigvals(hessenberg))
    differences = phases - phases[0]
    for p in range(1, max_period + 1):
        if np.all(np.abs(np.angle(np.exp(1j * p * differences))) < tol * p):
            return p
    return None


def centered_state(lattice: Lattice, relative: BasisState) -> BasisState:
    """Translate a state given relative to the lattice centre onto the lattice."""
    center = lattice.center_cell()
    cell = tuple(c + r for c, r in zip(center, relative.cell))
    state = BasisState(cell, relative.kind, relative.slot)
    if state not in lattice.index:
        raise LatticeTooSmallError(f"initial state {state.label()} lies outside the lattice")
    return state


def cage_lattice(graph: Graph, coefficient: int) -> Lattice:
    """Open lattice wide enough that n Arnoldi steps never reach its edge."""
    cells = 2 * coefficient + 5 if graph is Graph.DC else coefficient + 5
    return create_lattice(graph, cells, Boundary.OPEN)


@dataclass(frozen=True)
class FluxScan:
    coefficient: int
    fluxes: np.ndarray
    values: np.ndarray
    minima: Tuple[Tuple[float, float], ...]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"f": self.fluxes, f"b{self.coefficient}": self.values})


def _refine_minimum(x: np.ndarray, y: np.ndarray, i: int) -> Tuple[float, float]:
    if i == 0 or i == len(x) - 1:
        return float(x[i]), float(y[i])
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denominator = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denominator
    b = (x2 ** 2 * (y0 - y1) + x1 ** 2 * (y2 - y0) + x0 ** 2 * (y1 - y2)) / denominator
    if a <= 0:
        return float(x1), float(y1)
    vertex = float(np.clip(-b / (2 * a), x0, x2))
    return vertex, float(y1)


def _local_minima(x: np.ndarray, y: np.ndarray) -> Tuple[Tuple[float, float], ...]:
    minima = []
    for i in range(len(x)):
        left = y[i - 1] if i > 0 else np.inf
        right = y[i + 1] if i < len(x) - 1 else np.inf
        if y[i] <= left and y[i] <= right and not (left == np.inf and right == np.inf):
            minima.append(_refine_minimum(x, y, i))
    if len(x) == 1:
        minima.append((float(x[0]), float(y[0])))
    return tuple(sorted(minima, key=lambda item: item[1]))


def _scan_point(args) -> float:
    graph, hub, rim_b, rim_c, relative, coefficient, f, lattice, variables = args
    assignment = create_coin_assignment(hub, rim_b, rim_c, variables=variables)
    walk = create_walk(lattice, create_gauge(graph, f), assignment)
    psi0 = localized_state(lattice, centered_state(lattice, relative))
    return arnoldi(walk, psi0, coefficient).coefficient(coefficient)


def critical_flux_scan(
    graph: Union[Graph, str],
    coins: Tuple[str, str, Optional[str]],
    initial: BasisState,
    fluxes: Sequence[float],
    coefficient: Optional[int] = None,
    threads: int = 1,
    variables: Optional[Dict[str, float]] = None,
) -> FluxScan:
    """
    b_{n*}(f) along a flux grid and its minima.

    Args:
        graph: DC or T3
        coins: (hub, rim_b, rim_c) coin specs or matrices
        initial: Initial basis state relative to the lattice centre
        fluxes: Flux grid
        coefficient: n* (8 for DC, 12 for T3 by default)
        threads: Worker threads
        variables: Values for free names in coin specs

    Returns:
        FluxScan with minima sorted by depth
    """
    graph = Graph(graph)
    if len(fluxes) == 0:
        raise QuantumWalkError("empty flux grid")
    coefficient = coefficient or CAGE_COEFFICIENT[graph]
    lattice = cage_lattice(graph, coefficient)
    hub, rim_b, rim_c = coins
    tasks = [(graph, hub, rim_b, rim_c, initial, coefficient, float(f), lattice, variables) for f in fluxes]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(_scan_point, tasks))
    else:
        values = [_scan_point(task) for task in tasks]
    x, y = np.asarray(fluxes, dtype=float), np.asarray(values)
    minima = _local_minima(x, y)
    if minima:
        logger.info(f"✓ Deepest b_{coefficient} minimum {minima[0][1]:.2e} at f = {minima[0][0]:.6g}")
    return FluxScan(coefficient, x, y, minima)


def coefficient_surface(
    graph: Union[Graph, str],
    coins: Tuple[str, str, Optional[str]],
    initial: BasisState,
    fluxes: Sequence[float],
    parameters: Sequence[float],
    coefficient: Optional[int] = None,
    threads: int = 1,
) -> pd.DataFrame:
    """b_{n*} over a (f, x) grid, x being the free name in the coin specs."""
    frames = []
    for x in parameters:
        scan = critical_flux_scan(graph, coins, initial, fluxes, coefficient, threads, {"x": float(x)})
        frame = scan.to_frame()
        frame.insert(1, "x", float(x))
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


class CommensurateSolution(BaseModel):
    """arccos((2 + cos(pi p1/q1)) / 3) = pi p2/q2."""

    p1: int
    q1: int
    p2: int
    q2: int
    period: int
    trivial: bool


def commensurate_angle_search(q1_max: int, q2_max: int, tol: float = 1e-12) -> List[CommensurateSolution]:
    """
    Rotation angles alpha = pi p1/q1 in [0, pi] for which the T3 pinch levels
    are commensurate with pi, giving a periodic walk of period 4 LCM(q1, q2).

    Args:
        q1_max: Largest denominator of alpha / pi
        q2_max: Largest denominator accepted for the matched rational
        tol: Rational-recognition tolerance

    Returns:
        Solutions ordered by (q1, p1)
    """
    if q1_max < 1 or q2_max < 1:
        raise QuantumWalkError(f"search bounds must be at least 1, got ({q1_max}, {q2_max})")
    pairs = [(p1, q1) for q1 in range(1, q1_max + 1) for p1 in range(0, q1 + 1) if math.gcd(p1, q1) == 1]
    p1s = np.array([p for p, _ in pairs], dtype=float)
    q1s = np.array([q for _, q in pairs], dtype=float)
    ratio = np.arccos(np.clip((2.0 + np.cos(np.pi * p1s / q1s)) / 3.0, -1.0, 1.0)) / np.pi

    matched = np.zeros(len(pairs), dtype=int)
    for q2 in range(1, q2_max + 1):
        p2 = np.rint(ratio * q2)
        hit = (matched == 0) & (np.abs(ratio - p2 / q2) < tol)
        matched[hit] = q2

    solutions = []
    for i in np.flatnonzero(matched):
        p1, q1 = pairs[i]
        q2 = int(matched[i])
        p2 = int(round(ratio[i] * q2))
        solutions.append(CommensurateSolution(
            p1=p1, q1=q1, p2=p2, q2=q2,
            period=4 * math.lcm(q1, q2),
            trivial=(p1 == 0),
        ))
    logger.info(f"✓ Commensurability search up to ({q1_max}, {q2_max}): {len(solutions)} solution(s)")
    return solutions


def hub_slot_cages(walk: WalkOperator, relative_cell: Optional[Cell] = None, **kwargs) -> Dict[str, CageReport]:
    """Cage reports for every slot of one hub plus their support union."""
    lattice = walk.lattice
    relative_cell = tuple(relative_cell) if relative_cell is not None else (0,) * len(lattice.extent)
    reports: Dict[str, CageReport] = {}
    union = set()
    for slot in range(COORDINATION[lattice.graph][SiteKind.HUB_A]):
        state = centered_state(lattice, BasisState(tuple(relative_cell), SiteKind.HUB_A, slot))
        report = detect_cage(walk, localized_state(lattice, state), **kwargs)
        report.initial = state.label()
        reports[f"slot{slot}"] = report
        union.update((tuple(s.cell), s.kind) for s in report.support)
    origin = centered_state(lattice, BasisState(tuple(relative_cell), SiteKind.HUB_A, 0)).cell
    sites = sorted(union)
    reports["union"] = CageReport(
        caged=all(r.caged for r in reports.values()),
        b=[],
        support=[SupportSite(cell=list(cell), kind=kind) for cell, kind in sites],
        radius=max((cell_distance(lattice.graph, cell, origin) for cell, _ in sites), default=0),
    )
    return reports
