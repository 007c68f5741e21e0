import numpy as np
import pytest

from lovsim.analysis import (
    IntensityMap,
    azimuthal_harmonics,
    find_cell_center,
    find_component_zeros,
    intensity_from_field,
    lattice_period,
    oam_spectrum,
    phase_difference_map,
    quadrupole_fidelity,
    visibility,
    winding_number,
)
from lovsim.beamline import ideal_lov_state
from lovsim.core import SPIN_DOWN, SPIN_UP, SU2Map, Spinor, apply, make_grid, uniform_state
from lovsim.elements import EnsembleMember, SpinFilter, quadrupole_state, spin_filter
from lovsim.errors import IllConditionedError, NoLatticeError, ResolutionError

A = 5.0
GRID = make_grid(25.0, 25.0, 0.1)


@pytest.fixture(scope="module")
def lov1():
    return ideal_lov_state(GRID, A, 1)


@pytest.fixture(scope="module")
def lov2():
    return ideal_lov_state(GRID, A, 2)


@pytest.fixture(scope="module")
def quad():
    return quadrupole_state(GRID, A)


class TestPhaseDifference:
    def test_quadrupole_azimuthal_ramp(self, quad):
        pmap = phase_difference_map(quad)
        xm, ym = GRID.mesh()
        expected = np.pi / 2 - np.arctan2(ym, xm)
        wrapped = np.angle(np.exp(1j * (pmap.values - expected)))
        # stay inside r < a/2 where both amplitudes keep their sign
        inner_region = pmap.mask & (np.hypot(xm, ym) < 2.0)
        assert np.max(np.abs(wrapped[inner_region])) < 1e-9

    def test_equal_phases_give_zero(self):
        s = Spinor(1 / np.sqrt(2), 1 / np.sqrt(2))
        pmap = phase_difference_map(uniform_state(GRID, s))
        assert np.all(pmap.mask)
        assert np.max(np.abs(pmap.values)) < 1e-12

    def test_masking_at_amplitude_zero(self):
        pmap = phase_difference_map(uniform_state(GRID, SPIN_UP))
        assert not np.any(pmap.mask)

    def test_z_rotation_shifts_by_constant(self, lov2):
        alpha = 0.7
        rotated = apply(SU2Map.rotation((0, 0, 1), alpha), lov2)
        p0 = phase_difference_map(lov2)
        p1 = phase_difference_map(rotated)
        both = p0.mask & p1.mask
        delta = np.angle(np.exp(1j * (p1.values - p0.values)))[both]
        assert np.max(np.abs(delta - delta.flat[0])) < 1e-9


class TestWinding:
    def test_anti_vortex_at_origin(self, lov1):
        assert winding_number(lov1, "down", (0.0, 0.0), A / 8) == -1

    def test_vortex_at_half_cell(self, lov1):
        assert winding_number(lov1, "down", (A / 2, A / 2), A / 8) == 1

    def test_no_winding_in_up_component(self, quad):
        assert winding_number(quad, "up", (0.0, 0.0), A / 8) == 0

    def test_loop_through_zero_rejected(self, lov1):
        # radius a/2 passes through the neighboring down-zeros
        with pytest.raises(IllConditionedError):
            winding_number(lov1, "down", (0.0, 0.0), A * np.sqrt(2) / 2)

    def test_winding_sum_over_unit_cell(self, lov1):
        zeros = find_component_zeros(lov1, "down", A, A / 4, A / 8)
        assert zeros
        assert all(w in (-1, 1) for _, _, w in zeros)
        # weight boundary zeros by their cell share over the 2a x 2a window
        total = 0.0
        for x, y, w in zeros:
            share = 1.0
            for u in (x, y):
                if abs(abs(u) - A) < 0.1:
                    share *= 0.5
            total += share * w
        assert total == pytest.approx(0.0, abs=1e-9)


class TestOamSpectrum:
    def test_quadrupole_down_single_harmonic(self, quad):
        spec = oam_spectrum(quad, (0.0, 0.0), "down", A / 8)
        assert spec.weights[-1] >= 0.99

    def test_quadrupole_up_no_harmonic(self, quad):
        spec = oam_spectrum(quad, (0.0, 0.0), "up", A / 8)
        assert spec.weights[0] >= 0.99

    def test_double_pair_spin_orbit(self, lov2):
        center = find_cell_center(lov2, (0.0, 0.0), A / 4)
        down = oam_spectrum(lov2, center, "down", A / 8)
        up = oam_spectrum(lov2, center, "up", A / 8)
        assert down.dominant == -1
        assert up.dominant == 0
        assert up.dominant - down.dominant == 1

    def test_global_phase_invariance(self, quad):
        from dataclasses import replace

        phased = replace(quad, up=quad.up * np.exp(1j * 0.9), down=quad.down * np.exp(1j * 0.9))
        w0 = oam_spectrum(quad, (0.0, 0.0), "down", A / 8).weights
        w1 = oam_spectrum(phased, (0.0, 0.0), "down", A / 8).weights
        assert all(abs(w0[l] - w1[l]) < 1e-12 for l in w0)

    def test_insufficient_resolution(self, quad):
        with pytest.raises(ResolutionError):
            oam_spectrum(quad, (0.0, 0.0), "down", 0.3)


class TestLatticePeriod:
    def test_synthetic_fringes(self):
        xm, ym = GRID.mesh()
        fringes = IntensityMap(GRID, np.cos(np.pi * ym / 3.82) ** 2)
        assert lattice_period(fringes, axis="y") == pytest.approx(3.82, abs=0.05)

    def test_checkerboard_diagonal_fundamental(self, lov1):
        m = intensity_from_field(lov1, "down")
        assert lattice_period(m) == pytest.approx(A / np.sqrt(2), abs=0.05)
        assert lattice_period(m, axis="x") == pytest.approx(A, abs=0.05)

    def test_flat_intensity_rejected(self):
        with pytest.raises(NoLatticeError):
            lattice_period(IntensityMap(GRID, np.ones(GRID.shape)))


class TestVisibility:
    def test_full_modulation(self):
        xm, ym = GRID.mesh()
        m = IntensityMap(GRID, np.cos(np.pi * xm / 3.82) ** 2)
        assert visibility(m, "x") == pytest.approx(1.0, abs=1e-3)

    def test_flat_with_noise(self):
        rng = np.random.default_rng(8)
        m = IntensityMap(GRID, 1.0 + 0.01 * rng.random(GRID.shape))
        assert visibility(m, "x", period_mm=3.82) < 0.05

    def test_too_few_periods(self):
        xm, _ = GRID.mesh()
        m = IntensityMap(GRID, np.cos(np.pi * xm / 30.0) ** 2)
        with pytest.raises(NoLatticeError):
            visibility(m, "x", period_mm=30.0)


class TestQuadrupoleFidelity:
    def test_self_fidelity(self, quad):
        assert quadrupole_fidelity(quad, (0.0, 0.0), A, A / 8) == pytest.approx(1.0, abs=1e-9)

    def test_single_pair_approximates_quadrupole(self, lov1):
        center = find_cell_center(lov1, (0.0, 0.0), A / 4)
        assert quadrupole_fidelity(lov1, center, A, A / 8) > 0.95

    def test_orthogonal_state_scores_low(self):
        f = uniform_state(GRID, SPIN_DOWN)
        assert quadrupole_fidelity(f, (0.0, 0.0), A, A / 8) < 0.1


class TestFilterMixing:
    def test_z_postselections_are_complementary(self, lov2):
        members = [EnsembleMember(1.0, lov2)]
        plus = spin_filter(members, SpinFilter(9.0, "+z", 1.0))
        minus = spin_filter(members, SpinFilter(9.0, "-z", 1.0))
        assert np.max(np.abs(plus + minus - 1.0)) < 1e-12

    def test_transverse_postselection_varies_azimuthally(self, lov2):
        members = [EnsembleMember(1.0, lov2)]
        mixed = spin_filter(members, SpinFilter(9.0, "+x", 1.0))
        h = azimuthal_harmonics(IntensityMap(GRID, mixed), (0.0, 0.0), A / 8)
        assert h[1] > 5 * h[2]
        assert h[1] > 0.01
