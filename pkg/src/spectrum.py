"""
Quasi-Energy Spectra
Bloch reduction of the walk operator, quasi-energies, closed-form diamond
chain bands and pinch levels, Floquet-Hofstadter butterflies and spectral
symmetry checks
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg
from scipy.optimize import linear_sum_assignment

from src.coins import CoinAssignment, assemble_coin_operator, unitarity_defect
from src.errors import CoinError, FormulaDomainError, NotUnitaryError, QuantumWalkError
from src.lattice import (
    Boundary,
    GaugeField,
    Graph,
    Lattice,
    dc_gauge,
    t3_landau_gauge,
    t3_periodic_third_gauge,
)
from src.sim_config import get_simulation_config
from src.walk import create_walk

logger = logging.getLogger(__name__)

ACOS_TOL = 1e-12

KVector = Tuple[float, ...]


def wrap_phase(values: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Map phases to (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(values, dtype=float), 2.0 * np.pi)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def circular_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.abs(np.angle(np.exp(1j * (np.asarray(a) - np.asarray(b)))))


def multiset_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """
    Largest phase mismatch under the optimal pairing of two phase multisets.

    Args:
        a: Phases
        b: Phases, same count as a

    Returns:
        Max circular distance over the optimal assignment
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise QuantumWalkError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0
    cost = circular_distance(a[:, None], b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def fold_to_half_period(values: np.ndarray) -> np.ndarray:
    """Fold quasi-energies into [0, pi) using the epsilon -> epsilon + pi symmetry."""
    return np.mod(values, np.pi)


def _acos(x: float, tol: float = ACOS_TOL) -> float:
    if abs(x) > 1.0 + tol:
        raise FormulaDomainError(f"arccos argument {x:.15g} outside [-1, 1]")
    return math.acos(min(1.0, max(-1.0, x)))


# ---------------------------------------------------------------------------
# Bloch blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BlochBlock:
    """W(k) on one (magnetic) unit cell."""

    matrix: np.ndarray
    k: KVector
    flux: float
    hub_mask: np.ndarray

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def unitarity_defect(self) -> float:
        return unitarity_defect(self.matrix)


@dataclass(frozen=True, eq=False)
class QuasiEnergySpectrum:
    """Sorted eigenphases in (-pi, pi] with provenance."""

    values: np.ndarray
    flux: Optional[float] = None
    k: KVector = ()
    degeneracy: int = 1

    def __len__(self) -> int:
        return len(self.values)


class BlochSystem:
    """
    Precomputed edge table of a periodic supercell; `block(k)` fills in the
    Bloch phases.

    Args:
        lattice: Periodic lattice acting as the (magnetic) unit cell
        gauge: Gauge field periodic on that cell
        assignment: Coins
    """

    def __init__(self, lattice: Lattice, gauge: GaugeField, assignment: CoinAssignment):
        if lattice.boundary is not Boundary.PERIODIC:
            raise QuantumWalkError("Bloch reduction needs a periodic lattice")
        self.lattice = lattice
        self.gauge = gauge
        bonds = lattice.bonds(gauge)
        self._hub = np.array([b.hub for b in bonds], dtype=int)
        self._rim = np.array([b.rim for b in bonds], dtype=int)
        self._phase = np.array([b.phase for b in bonds], dtype=float)
        self._wrap = np.array([b.wrap for b in bonds], dtype=float)
        self._coin = assemble_coin_operator(assignment, lattice).toarray()
        self.hub_mask = np.array(lattice.hub_mask, dtype=bool)

    def block(self, k: Union[float, Sequence[float]]) -> BlochBlock:
        k_vec = tuple(float(x) for x in np.atleast_1d(k))
        if len(k_vec) != self._wrap.shape[1]:
            raise QuantumWalkError(f"expected {self._wrap.shape[1]} wave-vector components, got {k_vec}")
        n = self.lattice.dimension
        hop = np.exp(1j * (self._phase + self._wrap @ np.array(k_vec)))
        shift = np.zeros((n, n), dtype=complex)
        shift[self._rim, self._hub] = hop
        shift[self._hub, self._rim] = hop.conj()
        return BlochBlock(shift @ self._coin, k_vec, self.gauge.flux, self.hub_mask)


def _check_coins(assignment: CoinAssignment, graph: Graph) -> None:
    try:
        assignment.validate(graph)
    except CoinError as e:
        logger.error(f"✗ Coin assignment rejected: {e}")
        raise


def dc_system(assignment: CoinAssignment, f: float) -> BlochSystem:
    _check_coins(assignment, Graph.DC)
    return BlochSystem(Lattice(Graph.DC, (1,), Boundary.PERIODIC), dc_gauge(f), assignment)


def t3_landau_system(assignment: CoinAssignment, p: int, q: int) -> BlochSystem:
    _check_coins(assignment, Graph.T3)
    gauge = t3_landau_gauge(p, q)
    return BlochSystem(Lattice(Graph.T3, (q, 1), Boundary.PERIODIC), gauge, assignment)


def t3_third_system(assignment: CoinAssignment, flux: float = -1.0 / 3.0) -> BlochSystem:
    _check_coins(assignment, Graph.T3)
    gauge = t3_periodic_third_gauge(flux)
    return BlochSystem(Lattice(Graph.T3, (1, 1), Boundary.PERIODIC), gauge, assignment)


def bloch_block_dc(assignment: CoinAssignment, f: float, k: float) -> BlochBlock:
    """8x8 diamond chain block W(k) at flux f (psi(n) = e^{ikn} u)."""
    return dc_system(assignment, f).block(k)


def bloch_block_t3_landau(assignment: CoinAssignment, p: int, q: int, k: Sequence[float]) -> BlochBlock:
    """12q x 12q T3 block at flux p/q; k = (K1, K2) per magnetic cell."""
    return t3_landau_system(assignment, p, q).block(k)


def bloch_block_t3_third(assignment: CoinAssignment, kx: float, ky: float, flux: float = -1.0 / 3.0) -> BlochBlock:
    """12x12 T3 block in the gauge sharing the tiling periodicity (f = +-1/3)."""
    return t3_third_system(assignment, flux).block((kx, ky))


def w2_subblock_spectra(block: BlochBlock) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenphases E of the hub and rim diagonal blocks of W^2."""
    w2 = block.matrix @ block.matrix
    hub, rim = block.hub_mask, ~block.hub_mask
    e_hub = np.sort(np.angle(linalg.eigvals(w2[np.ix_(hub, hub)])))
    e_rim = np.sort(np.angle(linalg.eigvals(w2[np.ix_(rim, rim)])))
    return e_hub, e_rim


def quasi_energies(block: BlochBlock, fast: bool = False, tol: Optional[float] = None) -> QuasiEnergySpectrum:
    """
    Eigenphases of a Bloch block.

    Args:
        block: Unitary Bloch block
        fast: Diagonalize only the hub block of W^2 and take E/2, E/2 + pi
        tol: Unitarity tolerance (settings default)

    Returns:
        QuasiEnergySpectrum sorted ascending in (-pi, pi]
    """
    tol = tol if tol is not None else get_simulation_config().unitarity_tol
    defect = block.unitarity_defect()
    if defect > tol:
        raise NotUnitaryError(f"Bloch block unitarity defect {defect:.2e}")
    if fast:
        e_hub, _ = w2_subblock_spectra(block)
        values = np.concatenate([e_hub / 2.0, wrap_phase(e_hub / 2.0 + np.pi)])
    else:
        values = np.angle(linalg.eigvals(block.matrix))
    return QuasiEnergySpectrum(np.sort(wrap_phase(values)), block.flux, block.k)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalyticBands:
    dispersive: np.ndarray
    flat: np.ndarray

    @property
    def values(self) -> np.ndarray:
        return np.sort(np.concatenate([self.dispersive, self.flat]))


def dc_bands_analytic(theta: float, phi: float, omega: float, beta: float, f: float, k: float) -> AnalyticBands:
    """
    Diamond chain bands for C_a = G4, C_b = U2(theta, phi, 0, beta), C_c = U2(theta, phi, omega, beta).

    Returns:
        Four dispersive and four flat quasi-energies, reduced to (-pi, pi]
    """
    shifted = math.pi * f - omega / 2.0
    half = 0.5 * _acos(math.sin(theta) * math.cos(shifted) * math.cos(shifted + k + (math.pi - phi) / 2.0))
    half_flat = 0.5 * _acos(math.cos(beta - phi / 2.0) * math.cos(theta))
    signs = [(s1, s2) for s1 in (1, -1) for s2 in (1, -1)]
    dispersive = [(phi + math.pi) / 4.0 + s1 * half + s2 * math.pi / 2.0 for s1, s2 in signs]
    flat = [s1 * math.pi / 2.0 + phi / 4.0 + s2 * half_flat for s1, s2 in signs]
    return AnalyticBands(np.sort(wrap_phase(np.array(dispersive))), np.sort(wrap_phase(np.array(flat))))


def dc_pinch_energies_h4(theta: float, phi: float, beta: float) -> QuasiEnergySpectrum:
    """Eight k-independent quasi-energies of the H4 diamond chain at f_c = omega / 2 pi."""
    d = beta - phi / 2.0
    root = math.sqrt(2.0 * math.sin(theta) ** 2 + math.cos(theta) ** 2 * math.sin(d) ** 2)
    values = []
    for s_root in (1, -1):
        half = 0.5 * _acos((math.sin(d) * math.cos(theta) + s_root * root) / 2.0)
        for s1 in (1, -1):
            for s2 in (1, -1):
                values.append(math.pi / 4.0 + s1 * math.pi / 2.0 + phi / 4.0 + s2 * half)
    return QuasiEnergySpectrum(np.sort(wrap_phase(np.array(values))))


def t3_pinch_energies(alpha: float) -> QuasiEnergySpectrum:
    """Twelve doubly degenerate pinch levels of T3 with G6 hubs and R3(alpha, gamma) rims at f = 1/2."""
    half_alpha = alpha / 2.0
    a = 0.5 * _acos((2.0 + math.cos(alpha)) / 3.0)
    values = [0.0, math.pi / 2.0, -math.pi / 2.0, math.pi]
    for center in (math.pi / 2.0, -math.pi / 2.0):
        values += [center + half_alpha, center - half_alpha, center + a, center - a]
    return QuasiEnergySpectrum(np.sort(wrap_phase(np.array(values))), flux=0.5, degeneracy=2)


# ---------------------------------------------------------------------------
# Butterflies and pinch detection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumSample:
    flux: float
    k: KVector
    values: np.ndarray = field(compare=False)


@dataclass(frozen=True, eq=False)
class Butterfly:
    """Quasi-energies over a flux sampling, one SpectrumSample per (f, k)."""

    graph: Graph
    samples: Tuple[SpectrumSample, ...]
    sampling: Dict[str, Any]

    def fluxes(self) -> List[float]:
        seen: Dict[float, None] = {}
        for sample in self.samples:
            seen.setdefault(sample.flux, None)
        return list(seen)

    def spectra_at(self, flux: float) -> List[np.ndarray]:
        return [s.values for s in self.samples if s.flux == flux]

    def to_frame(self) -> pd.DataFrame:
        """Point cloud with columns f, k, epsilon (k blank for aggregated T3 rows)."""
        rows_f, rows_k, rows_e = [], [], []
        for sample in self.samples:
            k_value = sample.k[0] if self.graph is Graph.DC else np.nan
            rows_f.extend([sample.flux] * len(sample.values))
            rows_k.extend([k_value] * len(sample.values))
            rows_e.extend(sample.values.tolist())
        return pd.DataFrame({"f": rows_f, "k": rows_k, "epsilon": rows_e})


def dc_k_grid(points: int) -> np.ndarray:
    """Uniform grid over [-pi, pi)."""
    if points < 1:
        raise QuantumWalkError("k sampling needs at least one point")
    return -np.pi + 2.0 * np.pi * np.arange(points) / points


def t3_k_grid(points: int) -> List[KVector]:
    """About `points` wave vectors on a square grid of the magnetic Brillouin zone."""
    if points < 1:
        raise QuantumWalkError("k sampling needs at least one point")
    m = math.ceil(math.sqrt(points))
    axis = 2.0 * np.pi * np.arange(m) / m
    return [(float(k1), float(k2)) for k1 in axis for k2 in axis]


def rational_fluxes(q_max: int) -> List[Fraction]:
    """All p/q in [0, 1] in lowest terms with q <= q_max, sorted by value."""
    if q_max < 1:
        raise QuantumWalkError(f"q_max must be at least 1, got {q_max}")
    values = {Fraction(p, q) for q in range(1, q_max + 1) for p in range(0, q + 1)}
    return sorted(values)


def _dc_task(args: Tuple[CoinAssignment, float, np.ndarray]) -> List[SpectrumSample]:
    assignment, f, ks = args
    system = dc_system(assignment, f)
    return [SpectrumSample(f, (float(k),), quasi_energies(system.block(k)).values) for k in ks]


def _t3_task(args: Tuple[CoinAssignment, Fraction, List[KVector]]) -> List[SpectrumSample]:
    assignment, flux, ks = args
    system = t3_landau_system(assignment, flux.numerator, flux.denominator)
    return [SpectrumSample(float(flux), k, quasi_energies(system.block(k)).values) for k in ks]


def butterfly(
    graph: Union[Graph, str],
    assignment: CoinAssignment,
    fluxes: Sequence[Union[float, Fraction]],
    k_points: int,
    threads: int = 1,
) -> Butterfly:
    """
    Quasi-energy point cloud versus flux.

    Args:
        graph: DC (any real flux grid) or T3 (rational fluxes)
        assignment: Coins
        fluxes: Flux values; Fractions for T3
        k_points: Wave vectors sampled per flux
        threads: Worker threads; results are merged by flux index

    Returns:
        Butterfly
    """
    graph = Graph(graph)
    if len(fluxes) == 0:
        raise QuantumWalkError("empty flux sampling")
    if graph is Graph.DC:
        ks = dc_k_grid(k_points)
        tasks = [(assignment, float(f), ks) for f in fluxes]
        worker = _dc_task
        sampling = {"fluxes": len(fluxes), "k_points": int(k_points)}
    else:
        ks = t3_k_grid(k_points)
        tasks = [(assignment, Fraction(f).limit_denominator(10_000), ks) for f in fluxes]
        worker = _t3_task
        sampling = {"q_max": max(t[1].denominator for t in tasks), "k_points": len(ks)}

    logger.info(f"Computing {graph.value} butterfly: {len(tasks)} fluxes x {len(ks)} k-points")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(worker, tasks))
    else:
        chunks = [worker(task) for task in tasks]
    samples = tuple(sample for chunk in chunks for sample in chunk)
    logger.info(f"✓ Butterfly done: {sum(len(s.values) for s in samples)} points")
    return Butterfly(graph, samples, sampling)


def band_dispersion(spectra: Sequence[np.ndarray]) -> float:
    """
    Sum over bands of (max_k - min_k) of the quasi-energy, bands being
    followed by optimal matching to the first spectrum.
    """
    reference = np.asarray(spectra[0])
    deviations = []
    for values in spectra:
        cost = circular_distance(reference[:, None], np.asarray(values)[None, :])
        rows, cols = linear_sum_assignment(cost)
        order = cols[np.argsort(rows)]
        deviations.append(np.angle(np.exp(1j * (np.asarray(values)[order] - reference))))
    stacked = np.array(deviations)
    return float(np.sum(stacked.max(axis=0) - stacked.min(axis=0)))


@dataclass(frozen=True)
class PinchResult:
    flux: float
    dispersion: float
    pinched: bool
    curve: Tuple[Tuple[float, float], ...]


def detect_pinch(spectrum_cloud: Butterfly, tol: Optional[float] = None) -> PinchResult:
    """
    Flux minimizing the total band dispersion; pinched when below `tol`.

    Args:
        spectrum_cloud: Butterfly with several k samples per flux
        tol: Pinch threshold (settings default)

    Returns:
        PinchResult
    """
    tol = tol if tol is not None else get_simulation_config().pinch_tol
    curve = tuple((f, band_dispersion(spectrum_cloud.spectra_at(f))) for f in spectrum_cloud.fluxes())
    best_flux, best = min(curve, key=lambda item: item[1])
    pinched = best < tol
    if pinched:
        logger.info(f"✓ Pinch at f = {best_flux:.6g} (dispersion {best:.2e})")
    else:
        logger.info(f"No pinch below {tol:g}; minimum dispersion {best:.2e} at f = {best_flux:.6g}")
    return PinchResult(best_flux, best, pinched, curve)


# ---------------------------------------------------------------------------
# Symmetries
# ---------------------------------------------------------------------------

class Symmetry(str, Enum):
    FLUX_TRANSLATION = "flux-translation"
    ENERGY_TRANSLATION = "energy-translation"
    FLUX_MIRROR = "flux-mirror"
    ENERGY_MIRROR = "energy-mirror"


BandFunction = Callable[[float, float], np.ndarray]


def dc_band_function(assignment: CoinAssignment) -> BandFunction:
    """(f, k) -> sorted quasi-energies of the diamond chain."""
    def bands(f: float, k: float) -> np.ndarray:
        return quasi_energies(bloch_block_dc(assignment, f, k)).values
    return bands


def _image(bands: BandFunction, symmetry: Symmetry, f: float, k: float, phi: float, omega: float) -> np.ndarray:
    if symmetry is Symmetry.FLUX_TRANSLATION:
        return bands(f + 1.0, k)
    if symmetry is Symmetry.ENERGY_TRANSLATION:
        return bands(f, k) + np.pi
    if symmetry is Symmetry.FLUX_MIRROR:
        return bands(-f + omega / np.pi, -k - np.pi + phi)
    return -bands(f, k + np.pi) + phi / 2.0


def symmetry_residual(
    source: Union[BandFunction, Butterfly],
    symmetry: Union[Symmetry, str],
    samples: Optional[Sequence[Tuple[float, float]]] = None,
    phi: float = 0.0,
    omega: float = 0.0,
) -> float:
    """
    Largest multiset distance between spectra and their symmetry images.

    Args:
        source: Band function (f, k) -> quasi-energies, or a Butterfly
        symmetry: One of Symmetry
        samples: (f, k) points for a band function
        phi: U2 phi entering the mirror maps
        omega: U2 omega entering the flux mirror

    Returns:
        Max residual over samples
    """
    try:
        symmetry = Symmetry(symmetry)
    except ValueError as e:
        raise QuantumWalkError(f"unknown symmetry '{symmetry}'") from e

    if isinstance(source, Butterfly):
        if symmetry is Symmetry.ENERGY_TRANSLATION:
            return max(multiset_distance(s.values, s.values + np.pi) for s in source.samples)
        if symmetry is Symmetry.FLUX_TRANSLATION:
            lookup = {(round(s.flux, 12), s.k): s.values for s in source.samples}
            pairs = [
                (s.values, lookup[(round(s.flux + 1.0, 12), s.k)])
                for s in source.samples if (round(s.flux + 1.0, 12), s.k) in lookup
            ]
            if not pairs:
                raise QuantumWalkError("butterfly has no flux pairs one period apart")
            return max(multiset_distance(a, b) for a, b in pairs)
        raise QuantumWalkError(f"{symmetry.value} needs a band function, not a sampled butterfly")

    if not samples:
        raise QuantumWalkError("band-function residual needs (f, k) samples")
    return max(
        multiset_distance(source(f, k), _image(source, symmetry, f, k, phi, omega))
        for f, k in samples
    )


def dc_ring_spectrum(assignment: CoinAssignment, f: float, cells: int) -> np.ndarray:
    """Eigenphases of the full periodic ring of `cells` diamonds (dense)."""
    ring = Lattice(Graph.DC, (cells,), Boundary.PERIODIC)
    walk = create_walk(ring, dc_gauge(f), assignment)
    return np.sort(np.angle(linalg.eigvals(walk.matrix.toarray())))
