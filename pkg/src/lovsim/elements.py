"""Beamline element catalog and physics calibration.

The central element is the triangular-coil prism that imprints a linear
spin-rotation phase ramp across the beam; a perpendicular pair of them
("prism pair") builds one lattice of spin-orbit vortices.  Also here:
guide-field rotations, residual-field gradients, slits, spin filters,
the quadrupole reference state, and the wavelength/field -> lattice
period calibration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.constants import h as PLANCK_H, m_n as NEUTRON_MASS, physical_constants

from .core import Grid, SU2Map, Spinor, SpinorField, spinor_along, uniform_state
from .errors import ConfigurationError, PhysicsDomainError

# rad s^-1 T^-1 (CODATA)
GAMMA_NEUTRON = physical_constants["neutron gyromag. ratio"][0]

# Inner field of one triangular coil per amp of drive current; anchored to
# ~0.014 T at 10 A.  Linear over the 2.5-10 A operating range.
DEFAULT_B_PER_AMP = 0.0014

# The incline angle is not independently measured; tan(60 deg) reproduces
# both the ~3.8 mm period at 5 mT and the ~1.5pi rad/mm gradient at 14 mT.
DEFAULT_INCLINE_DEG = 60.0

DEFAULT_WAVELENGTH_NM = 0.41
DEFAULT_POLARIZATION = 0.94

FILTER_DIRECTIONS = {
    "+x": (1.0, 0.0, 0.0),
    "-x": (-1.0, 0.0, 0.0),
    "+y": (0.0, 1.0, 0.0),
    "-y": (0.0, -1.0, 0.0),
    "+z": (0.0, 0.0, 1.0),
    "-z": (0.0, 0.0, -1.0),
}


def velocity_from_wavelength(lambda_nm):
    """Longitudinal speed in m/s from the de Broglie wavelength in nm."""
    if lambda_nm <= 0:
        raise ConfigurationError(f"wavelength must be positive, got {lambda_nm} nm")
    return PLANCK_H / (NEUTRON_MASS * lambda_nm * 1e-9)


@dataclass(frozen=True)
class PhysicsParams:
    """Beam and coil constants used to calibrate prism maps."""

    wavelength_nm: float = DEFAULT_WAVELENGTH_NM
    incline_angle_deg: float = DEFAULT_INCLINE_DEG
    b_per_amp: float = DEFAULT_B_PER_AMP
    gamma_n: float = GAMMA_NEUTRON
    v_z: Optional[float] = None  # m/s; derived from wavelength when omitted

    def __post_init__(self):
        if not 0 < self.incline_angle_deg < 90:
            raise ConfigurationError(
                f"incline angle must be in (0, 90) deg, got {self.incline_angle_deg}"
            )
        derived = velocity_from_wavelength(self.wavelength_nm)
        if self.v_z is not None:
            if self.v_z <= 0:
                raise ConfigurationError(f"v_z must be positive, got {self.v_z}")
            if abs(self.v_z - derived) / derived > 1e-3:
                raise ConfigurationError(
                    f"v_z = {self.v_z} m/s inconsistent with wavelength "
                    f"{self.wavelength_nm} nm (expected {derived:.1f} m/s)"
                )

    @property
    def velocity(self):
        return self.v_z if self.v_z is not None else velocity_from_wavelength(self.wavelength_nm)


def period_from_physics(b_tesla, params: PhysicsParams):
    """Lattice period a in mm: 2*pi*v_z / (gamma_n |B| tan(theta))."""
    if b_tesla <= 0:
        raise PhysicsDomainError(f"period undefined for B = {b_tesla} T")
    theta = np.radians(params.incline_angle_deg)
    a_m = 2 * np.pi * params.velocity / (params.gamma_n * b_tesla * np.tan(theta))
    return a_m * 1e3


@dataclass(frozen=True)
class LovPrism:
    """Triangular coil imprinting a linear phase ramp along one transverse axis.

    gradient_axis "y": rotation about x-hat by 2*pi*(y - offset)/a.
    gradient_axis "x": rotation about y-hat by 2*pi*(x - offset)/a.
    """

    z_m: float
    gradient_axis: str  # "x" or "y"
    current_a: float = 0.0
    offset_mm: float = 0.0
    period_override_mm: Optional[float] = None

    kind = "lov_prism"

    def __post_init__(self):
        if self.gradient_axis not in ("x", "y"):
            raise ConfigurationError(f"gradient_axis must be 'x' or 'y', got {self.gradient_axis!r}")
        if not np.isfinite(self.current_a):
            raise ConfigurationError("prism current must be finite")
        if self.period_override_mm is not None and self.period_override_mm <= 0:
            raise ConfigurationError("period override must be positive")


@dataclass(frozen=True)
class GuideRotation:
    """Uniform precession about a fixed axis (guide-field coil segment)."""

    z_m: float
    axis: Tuple[float, float, float]
    angle_rad: float

    kind = "guide_rotation"


@dataclass(frozen=True)
class ResidualField:
    """Imperfectly shielded region: rotation angle linear in one transverse coordinate."""

    z_m: float
    axis: Tuple[float, float, float]
    gradient_rad_per_mm: float
    gradient_axis: str = "y"  # transverse coordinate the angle ramps along

    kind = "residual_field"

    def __post_init__(self):
        if self.gradient_axis not in ("x", "y"):
            raise ConfigurationError(f"gradient_axis must be 'x' or 'y', got {self.gradient_axis!r}")


@dataclass(frozen=True)
class Slit:
    """Rectangular transmission aperture centered on the beam axis."""

    z_m: float
    width_x_mm: float
    width_y_mm: float

    kind = "slit"

    def __post_init__(self):
        if self.width_x_mm <= 0 or self.width_y_mm <= 0:
            raise ConfigurationError("slit widths must be positive")


@dataclass(frozen=True)
class SpinFilter:
    """Polarization analyzer with analyzing power p along a +-xyz direction."""

    z_m: float
    direction: str
    analyzing_power: float = DEFAULT_POLARIZATION

    kind = "spin_filter"

    def __post_init__(self):
        if self.direction not in FILTER_DIRECTIONS:
            raise ConfigurationError(
                f"filter direction {self.direction!r} not one of {sorted(FILTER_DIRECTIONS)}"
            )
        if not 0 <= self.analyzing_power <= 1:
            raise ConfigurationError(
                f"analyzing power must be in [0, 1], got {self.analyzing_power}"
            )


def resolve_period(prism: LovPrism, params: PhysicsParams):
    """Lattice period in mm for a prism, from override or from B(I) calibration."""
    if prism.period_override_mm is not None:
        return prism.period_override_mm
    b = prism.current_a * params.b_per_amp
    if b <= 0:
        raise ConfigurationError(
            f"prism period unresolvable: current {prism.current_a} A gives B = {b} T "
            "and no period override is set"
        )
    return period_from_physics(b, params)


def lov_prism_map(prism: LovPrism, params: PhysicsParams) -> SU2Map:
    """SU(2) map of one prism: exp(-i*(pi/a)*(u - offset)*sigma), u the gradient coordinate."""
    a = resolve_period(prism, params)
    offset = prism.offset_mm
    if prism.gradient_axis == "y":
        axis = (1.0, 0.0, 0.0)

        def angle(x, y):
            return 2 * np.pi * (y - offset) / a

    else:
        axis = (0.0, 1.0, 0.0)

        def angle(x, y):
            return 2 * np.pi * (x - offset) / a

    return SU2Map.rotation(axis, angle)


def element_map(element, params: PhysicsParams) -> SU2Map:
    """SU(2) map of any rotation-type element (prism, guide, residual field)."""
    if isinstance(element, LovPrism):
        if element.period_override_mm is None and element.current_a == 0:
            return SU2Map.identity()  # coil switched off
        return lov_prism_map(element, params)
    if isinstance(element, GuideRotation):
        return SU2Map.rotation(element.axis, element.angle_rad)
    if isinstance(element, ResidualField):
        g = element.gradient_rad_per_mm
        if element.gradient_axis == "y":
            return SU2Map.rotation(element.axis, lambda x, y: g * y)
        return SU2Map.rotation(element.axis, lambda x, y: g * x)
    raise ConfigurationError(f"element kind {element.kind!r} has no SU(2) map")


def quadrupole_state(grid: Grid, a_mm) -> SpinorField:
    """Reference spin-orbit state of an ideal quadrupole about the grid center.

    cos(pi*r/a)|up> + i e^{-i phi} sin(pi*r/a)|down>, unit norm per cell.
    """
    if a_mm <= 0:
        raise ConfigurationError(f"period must be positive, got {a_mm}")
    xm, ym = grid.mesh()
    r = np.hypot(xm, ym)
    phi = np.arctan2(ym, xm)
    up = np.cos(np.pi * r / a_mm).astype(complex)
    down = 1j * np.exp(-1j * phi) * np.sin(np.pi * r / a_mm)
    return SpinorField(grid, up, down)


@dataclass(frozen=True)
class EnsembleMember:
    """One pure state of a statistical mixture, with its weight."""

    weight: float
    field: SpinorField


def polarizer_ensemble(grid: Grid, direction: Sequence[float], polarization) -> list:
    """Two-member mixture produced by an imperfect polarizer.

    Pure states along +-direction with weights (1+P)/2 and (1-P)/2; members
    evolve independently and only intensities are ever summed.
    """
    if not 0 <= polarization <= 1:
        raise ConfigurationError(f"polarization must be in [0, 1], got {polarization}")
    direction = np.asarray(direction, dtype=float)
    plus = spinor_along(direction)
    minus = spinor_along(-direction)
    w_plus = (1 + polarization) / 2
    w_minus = (1 - polarization) / 2
    members = [EnsembleMember(w_plus, uniform_state(grid, plus))]
    if w_minus > 0:
        members.append(EnsembleMember(w_minus, uniform_state(grid, minus)))
    return members


def projection_intensity(up, down, direction: Sequence[float]):
    """|<n|psi>|^2 for the spin-up eigenstate along direction, elementwise."""
    s = spinor_along(direction)
    amp = np.conj(s.up) * up + np.conj(s.down) * down
    return np.abs(amp) ** 2


def spin_filter(members, filt: SpinFilter):
    """Intensity transmitted by a spin filter, summed over ensemble members.

    I = (1+p)/2 * |<n+|psi>|^2 + (1-p)/2 * |<n-|psi>|^2 per cell.
    Returns a plain (ny, nx) array; wrap in analysis.IntensityMap as needed.
    """
    n_plus = np.asarray(FILTER_DIRECTIONS[filt.direction], dtype=float)
    t_plus = (1 + filt.analyzing_power) / 2
    t_minus = (1 - filt.analyzing_power) / 2
    total = None
    for member in members:
        f = member.field
        i_plus = projection_intensity(f.up, f.down, n_plus)
        i_minus = projection_intensity(f.up, f.down, -n_plus)
        contrib = member.weight * (t_plus * i_plus + t_minus * i_minus)
        total = contrib if total is None else total + contrib
    return total
