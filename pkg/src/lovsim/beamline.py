"""Source model, element composition, and Monte Carlo ray transport.

Rays are sampled at the slit, travel in straight lines between element
planes, pick up the local SU(2) rotation at each rotation element, and
are binned into camera cells by weight.  Rays add in intensity only: the
transverse coherence (~0.4 um) is far below the lattice period (mm).

The "ideal path" is the zero-divergence, uniformly illuminated field
obtained by composing every rotation element on the camera grid; all
closed-form structure (checkerboards, vortices, rings) lives there.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.stats import norm as gaussian

from .core import Grid, SPIN_UP, SU2Map, Spinor, SpinorField, apply, spinor_along, uniform_state
from .elements import (
    EnsembleMember,
    FILTER_DIRECTIONS,
    LovPrism,
    PhysicsParams,
    Slit,
    SpinFilter,
    element_map,
    projection_intensity,
)
from .errors import ConfigurationError, NumericalError, PhysicsDomainError

FWHM_TO_SIGMA = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def coherence_sigma(lambda_nm, l1_m, slit_mm):
    """Transverse coherence length lambda*L1/s at the first prism, in um."""
    if lambda_nm <= 0 or l1_m <= 0:
        raise ConfigurationError("wavelength and distance must be positive")
    if slit_mm <= 0:
        raise PhysicsDomainError(f"coherence undefined for slit width {slit_mm} mm")
    sigma_m = lambda_nm * 1e-9 * l1_m / (slit_mm * 1e-3)
    return sigma_m * 1e6


@dataclass(frozen=True)
class SourceModel:
    """Slit geometry and angular distribution of the incoming beam."""

    slit_width_x_mm: float = 1.0
    slit_width_y_mm: float = 1.0
    divergence_fwhm_x_deg: float = 1.0
    divergence_fwhm_y_deg: float = 1.0
    distance_to_first_prism_m: float = 0.965
    n_rays: int = 100_000
    angular_distribution: str = "gaussian"

    def __post_init__(self):
        if self.n_rays < 1:
            raise ConfigurationError(f"n_rays must be >= 1, got {self.n_rays}")
        if self.slit_width_x_mm < 0 or self.slit_width_y_mm < 0:
            raise ConfigurationError("slit widths must be non-negative")
        if self.divergence_fwhm_x_deg < 0 or self.divergence_fwhm_y_deg < 0:
            raise ConfigurationError("divergences must be non-negative")
        if self.angular_distribution not in ("gaussian", "uniform"):
            raise ConfigurationError(
                f"angular distribution must be 'gaussian' or 'uniform', got {self.angular_distribution!r}"
            )


@dataclass(frozen=True)
class BeamlineConfig:
    """Ordered beamline: source, physics constants, elements, camera."""

    source: SourceModel
    physics: PhysicsParams
    elements: tuple
    camera: Grid
    camera_z_m: float
    polarization: float = 0.94
    polarizer_direction: str = "+z"

    def __post_init__(self):
        if not 0 <= self.polarization <= 1:
            raise ConfigurationError(f"polarization must be in [0, 1], got {self.polarization}")
        if self.polarizer_direction not in FILTER_DIRECTIONS:
            raise ConfigurationError(f"unknown polarizer direction {self.polarizer_direction!r}")
        z_prev = None
        prev_elem = None
        for e in self.elements:
            if z_prev is not None and e.z_m <= z_prev:
                raise ConfigurationError(
                    f"element z positions must strictly increase: {prev_elem.kind} at "
                    f"{z_prev} m, then {e.kind} at {e.z_m} m"
                )
            z_prev, prev_elem = e.z_m, e
        filters = [e for e in self.elements if isinstance(e, SpinFilter)]
        if len(filters) > 1:
            raise ConfigurationError("at most one spin filter (the analyzer) is allowed")
        if filters and not isinstance(self.elements[-1], SpinFilter):
            raise ConfigurationError("the spin filter must be the last element (the analyzer)")
        if self.elements and self.camera_z_m < max(e.z_m for e in self.elements):
            raise ConfigurationError("camera must sit at or after every element")

    @property
    def analyzer(self) -> Optional[SpinFilter]:
        return self.elements[-1] if self.elements and isinstance(self.elements[-1], SpinFilter) else None

    @property
    def prisms(self) -> List[LovPrism]:
        return [e for e in self.elements if isinstance(e, LovPrism)]

    def with_currents(self, currents) -> "BeamlineConfig":
        """Copy with the prism currents replaced, in beam order."""
        prisms = self.prisms
        if len(currents) != len(prisms):
            raise ConfigurationError(f"expected {len(prisms)} currents, got {len(currents)}")
        it = iter(currents)
        new_elements = tuple(
            LovPrism(e.z_m, e.gradient_axis, float(next(it)), e.offset_mm, e.period_override_mm)
            if isinstance(e, LovPrism)
            else e
            for e in self.elements
        )
        return BeamlineConfig(
            self.source, self.physics, new_elements, self.camera, self.camera_z_m,
            self.polarization, self.polarizer_direction,
        )


@dataclass
class RayBundle:
    """Vectorized ray ensemble: positions (mm), angles (rad), spinors, weights."""

    x: np.ndarray
    y: np.ndarray
    theta_x: np.ndarray
    theta_y: np.ndarray
    up: np.ndarray
    down: np.ndarray
    weight: np.ndarray
    z_m: float = 0.0


def ideal_lov_state(grid: Grid, a_mm, n_pairs) -> SpinorField:
    """Zero-divergence state after n_pairs perpendicular prism pairs.

    Each pair applies the y-gradient prism then the x-gradient prism, both
    with period a and zero offset, to the spin-up input.
    """
    if n_pairs < 0:
        raise ConfigurationError(f"number of pairs must be >= 0, got {n_pairs}")
    if a_mm <= 0:
        raise ConfigurationError(f"period must be positive, got {a_mm}")
    u_y = SU2Map.rotation((1.0, 0.0, 0.0), lambda x, y: 2 * np.pi * y / a_mm)
    u_x = SU2Map.rotation((0.0, 1.0, 0.0), lambda x, y: 2 * np.pi * x / a_mm)
    state = uniform_state(grid, SPIN_UP)
    for _ in range(int(n_pairs)):
        state = apply(u_y, state)
        state = apply(u_x, state)
    return state


def ideal_field(config: BeamlineConfig, initial: Spinor = SPIN_UP) -> SpinorField:
    """Compose all rotation elements on the camera grid for an aligned beam.

    Slits and the analyzer are skipped; apply spin filtering afterwards at
    the intensity level.
    """
    state = uniform_state(config.camera, initial)
    for e in config.elements:
        if isinstance(e, (Slit, SpinFilter)):
            continue
        state = apply(element_map(e, config.physics), state)
    return state


def _stratified_uniform(n, rng):
    """n samples stratified over [0, 1): one jittered sample per 1/n stratum, shuffled."""
    u = (np.arange(n) + rng.random(n)) / n
    return rng.permutation(u)


def sample_source(source: SourceModel, rng) -> RayBundle:
    """Draw the ray ensemble at the slit plane (z = 0)."""
    n = source.n_rays
    x = (_stratified_uniform(n, rng) - 0.5) * source.slit_width_x_mm
    y = (_stratified_uniform(n, rng) - 0.5) * source.slit_width_y_mm
    sx = np.radians(source.divergence_fwhm_x_deg) * FWHM_TO_SIGMA
    sy = np.radians(source.divergence_fwhm_y_deg) * FWHM_TO_SIGMA
    if source.angular_distribution == "gaussian":
        theta_x = sx * gaussian.ppf(_clip_unit(_stratified_uniform(n, rng)))
        theta_y = sy * gaussian.ppf(_clip_unit(_stratified_uniform(n, rng)))
    else:
        half_x = np.radians(source.divergence_fwhm_x_deg) / 2
        half_y = np.radians(source.divergence_fwhm_y_deg) / 2
        theta_x = (2 * _stratified_uniform(n, rng) - 1) * half_x
        theta_y = (2 * _stratified_uniform(n, rng) - 1) * half_y
    return RayBundle(
        x=x, y=y, theta_x=theta_x, theta_y=theta_y,
        up=np.empty(n, dtype=complex), down=np.empty(n, dtype=complex),
        weight=np.ones(n), z_m=0.0,
    )


def _clip_unit(u):
    # keep the inverse-CDF finite at the stratum edges
    return np.clip(u, 1e-12, 1 - 1e-12)


def _propagate(rays: RayBundle, z_m):
    dz_mm = (z_m - rays.z_m) * 1e3
    rays.x = rays.x + rays.theta_x * dz_mm
    rays.y = rays.y + rays.theta_y * dz_mm
    rays.z_m = z_m


def trace_rays(rays: RayBundle, config: BeamlineConfig) -> RayBundle:
    """Transport a ray bundle from the slit plane to the camera plane.

    Straight-line flight between planes; rotation elements act at the
    ray's local transverse position; slits zero the weight outside the
    aperture; the analyzer is left to intensity-level filtering.
    """
    for e in config.elements:
        _propagate(rays, e.z_m)
        if isinstance(e, Slit):
            inside = (np.abs(rays.x) <= e.width_x_mm / 2) & (np.abs(rays.y) <= e.width_y_mm / 2)
            rays.weight = rays.weight * inside
        elif isinstance(e, SpinFilter):
            continue
        else:
            u = element_map(e, config.physics).at(rays.x, rays.y)
            up = u[..., 0, 0] * rays.up + u[..., 0, 1] * rays.down
            down = u[..., 1, 0] * rays.up + u[..., 1, 1] * rays.down
            rays.up, rays.down = up, down
    _propagate(rays, config.camera_z_m)
    return rays


def _bin_intensity(grid: Grid, rays: RayBundle, weights) -> np.ndarray:
    """Nearest-cell binning of per-ray weights onto the camera grid."""
    i = np.floor(rays.x / grid.dx + grid.nx / 2).astype(int)
    j = np.floor(rays.y / grid.dy + grid.ny / 2).astype(int)
    ok = (i >= 0) & (i < grid.nx) & (j >= 0) & (j < grid.ny)
    out = np.zeros(grid.shape)
    np.add.at(out, (j[ok], i[ok]), weights[ok])
    return out


@dataclass
class SimulationResult:
    """Camera intensities per filter direction, the ideal field, and diagnostics."""

    intensity: Dict[str, np.ndarray]
    ideal: SpinorField
    diagnostics: dict = dc_field(default_factory=dict)


def simulate(config: BeamlineConfig, seed, filter_directions=None) -> SimulationResult:
    """Monte Carlo camera image for each requested analyzer direction.

    filter_directions defaults to the configured analyzer's direction (or
    "none" when there is no analyzer).  "none" gives the unfiltered image.
    Deterministic for a fixed seed.
    """
    if filter_directions is None:
        analyzer = config.analyzer
        filter_directions = [analyzer.direction] if analyzer else ["none"]
    for d in filter_directions:
        if d != "none" and d not in FILTER_DIRECTIONS:
            raise ConfigurationError(f"unknown filter direction {d!r}")
    analyzer = config.analyzer
    p = analyzer.analyzing_power if analyzer else 1.0

    rng = np.random.default_rng(seed)
    base = sample_source(config.source, rng)

    w_plus = (1 + config.polarization) / 2
    w_minus = (1 - config.polarization) / 2
    pol_dir = np.asarray(FILTER_DIRECTIONS[config.polarizer_direction], dtype=float)
    members = [(w_plus, pol_dir)]
    if w_minus > 0:
        members.append((w_minus, -pol_dir))

    intensity = {d: np.zeros(config.camera.shape) for d in filter_directions}
    total_binned = 0.0
    for weight, direction in members:
        s = spinor_along(direction)
        rays = RayBundle(
            x=base.x.copy(), y=base.y.copy(),
            theta_x=base.theta_x, theta_y=base.theta_y,
            up=np.full(base.x.shape, s.up, dtype=complex),
            down=np.full(base.x.shape, s.down, dtype=complex),
            weight=base.weight.copy(), z_m=0.0,
        )
        trace_rays(rays, config)
        if not (np.all(np.isfinite(rays.up)) and np.all(np.isfinite(rays.down))):
            raise NumericalError("non-finite spinor amplitudes during transport")
        for d in filter_directions:
            if d == "none":
                w = rays.weight
            else:
                n_plus = np.asarray(FILTER_DIRECTIONS[d], dtype=float)
                i_plus = projection_intensity(rays.up, rays.down, n_plus)
                i_minus = projection_intensity(rays.up, rays.down, -n_plus)
                w = rays.weight * ((1 + p) / 2 * i_plus + (1 - p) / 2 * i_minus)
            img = _bin_intensity(config.camera, rays, w)
            intensity[d] += weight * img
            total_binned += weight * img.sum()

    # per-ray weight normalization: images scale with ray count otherwise
    n = config.source.n_rays
    for d in intensity:
        intensity[d] /= n

    diagnostics = {
        "n_rays": n,
        "seed": seed,
        "source_weight": float(base.weight.sum() / n),
        "binned_weight_per_direction": float(total_binned / n / max(len(filter_directions), 1)),
    }
    return SimulationResult(intensity=intensity, ideal=ideal_field(config), diagnostics=diagnostics)
