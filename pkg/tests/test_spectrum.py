"""
Tests for Bloch blocks, quasi-energy spectra, closed forms and butterflies
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from src.coins import create_coin_assignment, grover, hadamard, r3, r3_tilde, u2
from src.errors import NotUnitaryError, QuantumWalkError
from src.spectrum import (
    BlochBlock,
    Symmetry,
    band_dispersion,
    bloch_block_dc,
    bloch_block_t3_landau,
    bloch_block_t3_third,
    butterfly,
    dc_band_function,
    dc_bands_analytic,
    dc_k_grid,
    dc_pinch_energies_h4,
    dc_ring_spectrum,
    detect_pinch,
    multiset_distance,
    quasi_energies,
    rational_fluxes,
    symmetry_residual,
    t3_pinch_energies,
    w2_subblock_spectra,
    wrap_phase,
)

GAMMA_SYMMETRIC = math.asin(1.0 / math.sqrt(3.0))


def t3_coins(alpha, gamma=GAMMA_SYMMETRIC, omega=0.0):
    return create_coin_assignment(grover(6), r3(alpha, gamma), r3_tilde(alpha, gamma, omega))


class TestHelpers:
    def test_wrap_phase_range(self):
        assert wrap_phase(math.pi) == pytest.approx(math.pi)
        assert wrap_phase(-math.pi) == pytest.approx(math.pi)
        assert wrap_phase(3 * math.pi / 2) == pytest.approx(-math.pi / 2)

    def test_multiset_distance_is_circular(self):
        assert multiset_distance([math.pi - 1e-12, 0.1], [0.1, -math.pi + 1e-12]) < 1e-11
        assert multiset_distance([0.0, 1.0], [1.0, 0.2]) == pytest.approx(0.2)
        with pytest.raises(QuantumWalkError):
            multiset_distance([0.0], [0.0, 1.0])

    def test_rational_fluxes(self):
        assert rational_fluxes(3) == [Fraction(0), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), Fraction(1)]
        with pytest.raises(QuantumWalkError):
            rational_fluxes(0)

    def test_k_grid(self):
        grid = dc_k_grid(4)
        assert np.allclose(grid, [-math.pi, -math.pi / 2, 0.0, math.pi / 2])
        with pytest.raises(QuantumWalkError):
            dc_k_grid(0)

    def test_non_unitary_block_rejected(self):
        block = BlochBlock(2.0 * np.eye(2), (0.0,), 0.0, np.array([True, False]))
        with pytest.raises(NotUnitaryError):
            quasi_energies(block)

    def test_identity_block(self):
        block = BlochBlock(np.eye(4, dtype=complex), (0.0,), 0.0, np.array([True, True, False, False]))
        assert np.allclose(quasi_energies(block).values, 0.0)


class TestDiamondChain:
    def test_block_is_bipartite_and_unitary(self, grover_cage_coins):
        block = bloch_block_dc(grover_cage_coins, 0.3, 0.7)
        assert block.dimension == 8
        assert block.unitarity_defect() < 1e-12
        hub = block.hub_mask
        assert np.allclose(block.matrix[np.ix_(hub, hub)], 0.0)
        assert np.allclose(block.matrix[np.ix_(~hub, ~hub)], 0.0)

    def test_analytic_bands_match_numeric(self, rng, dc_coins):
        for _ in range(100):
            theta, phi, omega, beta = rng.uniform(-math.pi, math.pi, 4)
            f, k = rng.uniform(0.0, 1.0), rng.uniform(-math.pi, math.pi)
            numeric = quasi_energies(bloch_block_dc(dc_coins(grover(4), theta, phi, omega, beta), f, k))
            analytic = dc_bands_analytic(theta, phi, omega, beta, f, k)
            assert len(numeric) == 8
            assert multiset_distance(numeric.values, analytic.values) < 1e-9

    def test_flat_bands_do_not_depend_on_k_or_flux(self, dc_coins):
        theta, phi, omega, beta = 0.4, 1.1, 0.3, -0.2
        assignment = dc_coins(grover(4), theta, phi, omega, beta)
        flat = dc_bands_analytic(theta, phi, omega, beta, 0.0, 0.0).flat
        nearest = []
        for f in np.linspace(0.0, 1.0, 64):
            for k in dc_k_grid(64):
                values = quasi_energies(bloch_block_dc(assignment, f, k)).values
                gaps = np.abs(wrap_phase(values[:, None] - flat[None, :]))
                nearest.append(values[np.argmin(gaps, axis=0)])
                assert gaps.min(axis=0).max() < 1e-10
        nearest = np.array(nearest)
        assert np.abs(wrap_phase(nearest - nearest[0])).max() < 1e-10

    @pytest.mark.parametrize("offset", [math.pi / 2, -math.pi / 2])
    def test_flat_bands_do_not_depend_on_theta(self, dc_coins, offset):
        phi, omega = 0.8, 0.3
        beta = phi / 2 + offset
        thetas = np.linspace(-math.pi, math.pi, 32)
        flats = np.array([dc_bands_analytic(theta, phi, omega, beta, 0.2, 0.9).flat for theta in thetas])
        assert np.abs(flats - flats[0]).max() < 1e-12
        for theta in (0.3, 1.2, 2.5):
            values = quasi_energies(bloch_block_dc(dc_coins(grover(4), theta, phi, omega, beta), 0.2, 0.9)).values
            assert np.abs(wrap_phase(values[:, None] - flats[0][None, :])).min(axis=0).max() < 1e-9

    def test_dispersive_bands_flatten_at_critical_flux(self, rng, dc_coins):
        for omega in (0.0, 0.4 * math.pi, -0.6 * math.pi):
            theta = rng.uniform(0.3, 1.3)
            phi, beta = rng.uniform(-math.pi, math.pi, 2)
            assignment = dc_coins(grover(4), theta, phi, omega, beta)
            f_c = 0.5 + omega / (2 * math.pi)
            spectra = [quasi_energies(bloch_block_dc(assignment, f_c, k)).values for k in dc_k_grid(16)]
            assert band_dispersion(spectra) < 1e-9
            off = [quasi_energies(bloch_block_dc(assignment, f_c + 0.1, k)).values for k in dc_k_grid(16)]
            assert band_dispersion(off) > 1e-3

    def test_h4_pinch_energies(self, rng, dc_coins):
        for _ in range(20):
            theta, phi, omega, beta = rng.uniform(-math.pi, math.pi, 4)
            assignment = dc_coins(hadamard(4), theta, phi, omega, beta)
            expected = dc_pinch_energies_h4(theta, phi, beta).values
            for k in rng.uniform(-math.pi, math.pi, 10):
                values = quasi_energies(bloch_block_dc(assignment, omega / (2 * math.pi), k)).values
                assert multiset_distance(values, expected) < 1e-9

    def test_w2_subblocks_are_isospectral(self, rng, dc_coins):
        for i in range(50):
            theta, phi, omega, beta = rng.uniform(-math.pi, math.pi, 4)
            hub = hadamard(4) if i % 2 else grover(4)
            block = bloch_block_dc(dc_coins(hub, theta, phi, omega, beta), rng.uniform(), rng.uniform(-3, 3))
            e_hub, e_rim = w2_subblock_spectra(block)
            assert multiset_distance(e_hub, e_rim) < 1e-9
            fast = quasi_energies(block, fast=True).values
            full = quasi_energies(block).values
            assert multiset_distance(fast, full) < 1e-9

    def test_ring_is_the_union_of_bloch_blocks(self, grover_cage_coins):
        cells = 6
        ring = dc_ring_spectrum(grover_cage_coins, 0.23, cells)
        blocks = np.concatenate([
            quasi_energies(bloch_block_dc(grover_cage_coins, 0.23, 2 * math.pi * j / cells)).values
            for j in range(cells)
        ])
        assert multiset_distance(ring, blocks) < 1e-9


class TestSymmetries:
    @pytest.mark.parametrize("symmetry", list(Symmetry))
    def test_band_function_symmetries(self, rng, dc_coins, symmetry):
        for _ in range(16):
            theta, phi, omega, beta = rng.uniform(-math.pi, math.pi, 4)
            bands = dc_band_function(dc_coins(grover(4), theta, phi, omega, beta))
            samples = [(rng.uniform(), rng.uniform(-math.pi, math.pi)) for _ in range(3)]
            assert symmetry_residual(bands, symmetry, samples, phi=phi, omega=omega) < 1e-9

    def test_butterfly_symmetries(self, grover_cage_coins):
        cloud = butterfly("dc", grover_cage_coins, [0.0, 0.25, 1.0, 1.25], k_points=8)
        assert symmetry_residual(cloud, Symmetry.ENERGY_TRANSLATION) < 1e-9
        assert symmetry_residual(cloud, "flux-translation") < 1e-9
        with pytest.raises(QuantumWalkError):
            symmetry_residual(cloud, Symmetry.FLUX_MIRROR)
        with pytest.raises(QuantumWalkError):
            symmetry_residual(cloud, "rotation")

    def test_band_function_needs_samples(self, grover_cage_coins):
        with pytest.raises(QuantumWalkError):
            symmetry_residual(dc_band_function(grover_cage_coins), Symmetry.FLUX_TRANSLATION)


class TestButterflies:
    def test_frame_layout(self, grover_cage_coins):
        frame = butterfly("dc", grover_cage_coins, [0.0, 0.5], k_points=4).to_frame()
        assert list(frame.columns) == ["f", "k", "epsilon"]
        assert len(frame) == 2 * 4 * 8
        assert frame["epsilon"].between(-math.pi, math.pi).all()

    def test_thread_count_does_not_change_results(self, grover_cage_coins):
        fluxes = np.linspace(0.0, 1.0, 9)
        single = butterfly("dc", grover_cage_coins, fluxes, k_points=6, threads=1).to_frame()
        pooled = butterfly("dc", grover_cage_coins, fluxes, k_points=6, threads=4).to_frame()
        assert single.equals(pooled)

    def test_empty_sampling(self, grover_cage_coins):
        with pytest.raises(QuantumWalkError):
            butterfly("dc", grover_cage_coins, [], k_points=4)

    def test_g4_pinch_at_one_half(self, grover_cage_coins):
        result = detect_pinch(butterfly("dc", grover_cage_coins, np.linspace(0.0, 1.0, 11), k_points=12))
        assert result.pinched
        assert result.flux == pytest.approx(0.5)
        assert len(result.curve) == 11

    def test_h4_pinch_at_zero_flux(self):
        assignment = create_coin_assignment(hadamard(4), u2(math.pi / 4, math.pi))
        result = detect_pinch(butterfly("dc", assignment, np.linspace(0.0, 0.9, 10), k_points=12))
        assert result.pinched
        assert result.flux == pytest.approx(0.0)

    def test_generic_rims_without_pinch_threshold(self, grover_cage_coins):
        result = detect_pinch(butterfly("dc", grover_cage_coins, [0.1, 0.2, 0.3], k_points=8))
        assert not result.pinched
        assert result.flux == pytest.approx(0.3)

    def test_t3_minimal_butterfly(self):
        cloud = butterfly("t3", t3_coins(2 * math.pi / 3), rational_fluxes(1), k_points=4)
        frame = cloud.to_frame()
        assert cloud.fluxes() == [0.0, 1.0]
        assert frame["k"].isna().all()
        assert len(frame) == 2 * 4 * 12
        assert symmetry_residual(cloud, Symmetry.ENERGY_TRANSLATION) < 1e-9


class TestT3:
    @pytest.mark.parametrize("alpha", [2 * math.pi / 3, 1.1])
    def test_pinch_energies_at_one_half(self, rng, alpha):
        assignment = t3_coins(alpha)
        expected = t3_pinch_energies(alpha)
        assert len(expected) == 12 and expected.degeneracy == 2
        for _ in range(4):
            k = tuple(rng.uniform(-math.pi, math.pi, 2))
            values = quasi_energies(bloch_block_t3_landau(assignment, 1, 2, k)).values
            assert multiset_distance(values, np.repeat(expected.values, 2)) < 1e-9

    def test_pinch_levels_are_flat_for_any_rotation_axis(self, rng):
        for gamma in rng.uniform(-math.pi / 2, math.pi / 2, 5):
            assignment = t3_coins(2 * math.pi / 3, gamma)
            spectra = [
                quasi_energies(bloch_block_t3_landau(assignment, 1, 2, tuple(rng.uniform(-math.pi, math.pi, 2)))).values
                for _ in range(5)
            ]
            for values in spectra[1:]:
                assert multiset_distance(values, spectra[0]) < 1e-9

    def test_w2_subblocks_are_isospectral(self, rng):
        for i in range(20):
            alpha, gamma = rng.uniform(-math.pi, math.pi), rng.uniform(-math.pi / 2, math.pi / 2)
            omega = 0.0 if i % 2 else -2 * math.pi / 3
            p, q = [(1, 2), (1, 3), (2, 3), (1, 4), (3, 4)][i % 5]
            block = bloch_block_t3_landau(t3_coins(alpha, gamma, omega), p, q, tuple(rng.uniform(-math.pi, math.pi, 2)))
            assert block.dimension == 12 * q
            e_hub, e_rim = w2_subblock_spectra(block)
            assert multiset_distance(e_hub, e_rim) < 1e-9
            assert multiset_distance(quasi_energies(block, fast=True).values, quasi_energies(block).values) < 1e-9

    def test_landau_and_periodic_gauges_agree_at_minus_one_third(self):
        assignment = t3_coins(2 * math.pi / 3, 0.4, -2 * math.pi / 3)
        landau = np.concatenate([
            quasi_energies(bloch_block_t3_landau(assignment, -1, 3, (k1, 2 * math.pi * m / 6))).values
            for k1 in (0.0, math.pi)
            for m in range(6)
        ])
        periodic = np.concatenate([
            quasi_energies(bloch_block_t3_third(assignment, 2 * math.pi * j / 6, 2 * math.pi * m / 6)).values
            for j in range(6)
            for m in range(6)
        ])
        assert landau.size == periodic.size == 432
        assert multiset_distance(landau, periodic) < 1e-9

    def test_twisted_coin_moves_the_pinch_to_one_sixth(self):
        assignment = t3_coins(2 * math.pi / 3, omega=-2 * math.pi / 3)
        result = detect_pinch(butterfly("t3", assignment, rational_fluxes(6), k_points=4))
        curve = dict(result.curve)
        assert curve[float(Fraction(1, 6))] < 1e-6
