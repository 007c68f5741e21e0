"""Observables: spin-dependent intensity, phase structure, vortex winding,
azimuthal OAM spectra, lattice period, fringe visibility, and fidelity to
the ideal quadrupole spin-orbit state.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import Grid, SpinorField
from .errors import (
    ConfigurationError,
    IllConditionedError,
    NoLatticeError,
    ResolutionError,
    ShapeError,
)

AMPLITUDE_FLOOR = 1e-6
WINDING_SAMPLES = 128
WINDING_RESIDUAL_GUARD = 0.1


@dataclass(frozen=True)
class IntensityMap:
    """Non-negative intensity values on a grid."""

    grid: Grid
    values: np.ndarray = dc_field(repr=False)

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ShapeError(f"values shape {self.values.shape} != grid {self.grid.shape}")
        if np.any(self.values < -1e-12):
            raise ConfigurationError("intensity values must be non-negative")


@dataclass(frozen=True)
class PhaseMap:
    """Phase values in (-pi, pi] with a validity mask (True = usable)."""

    grid: Grid
    values: np.ndarray = dc_field(repr=False)
    mask: np.ndarray = dc_field(repr=False)


@dataclass(frozen=True)
class OAMSpectrum:
    """Normalized weight per integer azimuthal index about one cell center."""

    cell_center: Tuple[float, float]
    component: str
    weights: Dict[int, float]
    radius_mm: float

    @property
    def dominant(self) -> int:
        return max(self.weights, key=self.weights.get)


def intensity_from_field(field: SpinorField, component) -> IntensityMap:
    """|amplitude|^2 of one spinor component."""
    return IntensityMap(field.grid, np.abs(field.component(component)) ** 2)


def phase_difference_map(field: SpinorField, floor=AMPLITUDE_FLOOR) -> PhaseMap:
    """Principal-branch arg(down) - arg(up) per cell.

    Cells where either amplitude falls below the floor are masked: the
    phase there is numerically meaningless.
    """
    diff = np.angle(field.down * np.conj(field.up))
    mask = (np.abs(field.up) >= floor) & (np.abs(field.down) >= floor)
    return PhaseMap(field.grid, diff, mask)


def sample_bilinear(grid: Grid, values: np.ndarray, x, y):
    """Bilinear interpolation of a (complex or real) cell array at points (x, y) in mm."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fx = x / grid.dx + grid.nx / 2 - 0.5
    fy = y / grid.dy + grid.ny / 2 - 0.5
    i0 = np.clip(np.floor(fx).astype(int), 0, grid.nx - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, grid.ny - 2)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    v00 = values[j0, i0]
    v01 = values[j0, i0 + 1]
    v10 = values[j0 + 1, i0]
    v11 = values[j0 + 1, i0 + 1]
    return (
        v00 * (1 - tx) * (1 - ty)
        + v01 * tx * (1 - ty)
        + v10 * (1 - tx) * ty
        + v11 * tx * ty
    )


def winding_number(field: SpinorField, component, loop_center, loop_radius,
                   n_samples=WINDING_SAMPLES) -> int:
    """Phase winding of one component around a circular loop, as an exact integer.

    Sums principal-branch phase increments over the sampled loop; a
    pre-rounding residual above the guard, or a loop passing through an
    amplitude zero, raises instead of silently aliasing.
    """
    if n_samples < 64:
        raise ConfigurationError(f"winding loop needs >= 64 samples, got {n_samples}")
    cx, cy = loop_center
    phi = np.linspace(0.0, 2 * np.pi, n_samples, endpoint=False)
    xs = cx + loop_radius * np.cos(phi)
    ys = cy + loop_radius * np.sin(phi)
    amp = sample_bilinear(field.grid, field.component(component), xs, ys)
    if np.min(np.abs(amp)) <= AMPLITUDE_FLOOR:
        raise IllConditionedError(
            f"winding loop at ({cx:.3g}, {cy:.3g}) r={loop_radius:.3g} passes through an amplitude zero"
        )
    increments = np.angle(np.roll(amp, -1) / amp)
    total = increments.sum() / (2 * np.pi)
    nearest = int(np.round(total))
    if abs(total - nearest) >= WINDING_RESIDUAL_GUARD:
        raise IllConditionedError(
            f"winding residual {total - nearest:+.3f} exceeds guard; loop under-resolved"
        )
    return nearest


def oam_spectrum(field: SpinorField, cell_center, component, radius_mm, l_max=4,
                 n_phi=256, n_radial=32) -> OAMSpectrum:
    """Azimuthal harmonic weights of one component about a cell center.

    weight(l) ~ integral over r of |ring Fourier coefficient l|^2 * r dr,
    normalized over l in [-l_max, l_max].  Rings are sampled by bilinear
    interpolation and transformed with an azimuthal FFT.
    """
    if l_max < 2:
        raise ConfigurationError(f"l_max must be >= 2, got {l_max}")
    grid = field.grid
    pitch = max(grid.dx, grid.dy)
    # require >= 16 grid-resolved samples on the mid-radius circle
    if np.pi * radius_mm / pitch < 16:
        raise ResolutionError(
            f"radius {radius_mm} mm resolves only {np.pi * radius_mm / pitch:.1f} "
            "azimuthal samples at r/2; need >= 16"
        )
    cx, cy = cell_center
    values = field.component(component)
    phi = np.arange(n_phi) * (2 * np.pi / n_phi)
    radii = (np.arange(n_radial) + 0.5) * (radius_mm / n_radial)
    xs = cx + radii[:, None] * np.cos(phi)[None, :]
    ys = cy + radii[:, None] * np.sin(phi)[None, :]
    rings = sample_bilinear(grid, values, xs, ys)  # (n_radial, n_phi)
    coeffs = np.fft.fft(rings, axis=1) / n_phi  # c_l = (1/2pi) closed-loop integral
    dr = radius_mm / n_radial
    weights = {}
    for l in range(-l_max, l_max + 1):
        c_l = coeffs[:, l % n_phi]
        weights[l] = float(np.sum(np.abs(c_l) ** 2 * radii) * dr)
    total = sum(weights.values())
    if total <= 0:
        raise ResolutionError("component vanishes on the whole disk; no spectrum")
    weights = {l: w / total for l, w in weights.items()}
    return OAMSpectrum((cx, cy), component, weights, radius_mm)


def find_cell_center(field: SpinorField, seed_xy, search_radius_mm, component="down"):
    """Locate a zero of one component's amplitude near a seed point.

    Grid argmin of |amplitude| within the search disk, refined by a local
    quadratic fit of |amplitude|^2; robust to residual-field distortions.
    """
    grid = field.grid
    xm, ym = grid.mesh()
    sx, sy = seed_xy
    mag2 = np.abs(field.component(component)) ** 2
    within = (xm - sx) ** 2 + (ym - sy) ** 2 <= search_radius_mm**2
    if not np.any(within):
        raise ResolutionError("search disk contains no grid cells")
    masked = np.where(within, mag2, np.inf)
    j, i = np.unravel_index(np.argmin(masked), masked.shape)
    if i < 1 or i > grid.nx - 2 or j < 1 or j > grid.ny - 2:
        raise ResolutionError("candidate zero lies on the grid edge")
    # quadratic refinement in each axis from the 3-point stencil
    def parabolic_offset(fm, f0, fp):
        denom = fm - 2 * f0 + fp
        return 0.0 if denom <= 0 else 0.5 * (fm - fp) / denom

    di = parabolic_offset(mag2[j, i - 1], mag2[j, i], mag2[j, i + 1])
    dj = parabolic_offset(mag2[j - 1, i], mag2[j, i], mag2[j + 1, i])
    x0, y0 = grid.index_to_coord(i, j)
    return (x0 + np.clip(di, -1, 1) * grid.dx, y0 + np.clip(dj, -1, 1) * grid.dy)


def find_component_zeros(field: SpinorField, component, region_half_width_mm,
                         min_separation_mm, loop_radius_mm):
    """All isolated zeros of one component in the centered square region.

    Returns a list of (x, y, winding).  Candidate minima whose winding
    loop is ill-conditioned (line zeros, edge effects) are skipped.
    """
    grid = field.grid
    mag = np.abs(field.component(component))
    xm, ym = grid.mesh()
    region = (np.abs(xm) <= region_half_width_mm) & (np.abs(ym) <= region_half_width_mm)
    # local minima below a generous threshold
    threshold = 0.2 * mag[region].max()
    candidates = []
    m = np.where(region, mag, np.inf)
    interior = m[1:-1, 1:-1]
    is_min = (
        (interior <= m[:-2, 1:-1]) & (interior <= m[2:, 1:-1])
        & (interior <= m[1:-1, :-2]) & (interior <= m[1:-1, 2:])
        & (interior < threshold)
    )
    js, is_ = np.nonzero(is_min)
    order = np.argsort(interior[js, is_])
    zeros = []
    for k in order:
        j, i = js[k] + 1, is_[k] + 1
        x, y = grid.index_to_coord(i, j)
        if any((x - zx) ** 2 + (y - zy) ** 2 < min_separation_mm**2 for zx, zy, _ in zeros):
            continue
        try:
            x, y = find_cell_center(field, (x, y), 2 * max(grid.dx, grid.dy), component)
            w = winding_number(field, component, (x, y), loop_radius_mm)
        except (IllConditionedError, ResolutionError):
            continue
        zeros.append((x, y, w))
    return zeros


def _hann2(shape):
    wy = np.hanning(shape[0])
    wx = np.hanning(shape[1])
    return wy[:, None] * wx[None, :]


def lattice_peaks(intensity: IntensityMap):
    """Dominant nonzero spatial-frequency peak of the windowed 2D FFT.

    Returns (fx, fy) in cycles/mm with parabolic sub-bin refinement, plus
    the peak magnitude and the non-DC background level.
    """
    grid = intensity.grid
    v = intensity.values - intensity.values.mean()
    spec = np.abs(np.fft.fft2(v * _hann2(v.shape)))
    spec[0, 0] = 0.0
    background = np.mean(spec)
    jj, ii = np.unravel_index(np.argmax(spec), spec.shape)
    peak = spec[jj, ii]
    if background <= 0 or peak < 3 * background:
        raise NoLatticeError("no spatial-frequency peak above 3x background")

    def refine(spec, j, i, axis):
        n = spec.shape[axis]
        idx_m = [j, i]
        idx_p = [j, i]
        idx_m[axis] = (idx_m[axis] - 1) % n
        idx_p[axis] = (idx_p[axis] + 1) % n
        fm, f0, fp = spec[tuple(idx_m)], spec[j, i], spec[tuple(idx_p)]
        fm, f0, fp = np.log(fm + 1e-300), np.log(f0 + 1e-300), np.log(fp + 1e-300)
        denom = fm - 2 * f0 + fp
        return 0.0 if denom >= 0 else 0.5 * (fm - fp) / denom

    dj = refine(spec, jj, ii, 0)
    di = refine(spec, jj, ii, 1)
    fy = np.fft.fftfreq(grid.ny, d=grid.dy)[jj]
    fx = np.fft.fftfreq(grid.nx, d=grid.dx)[ii]
    fy = fy + dj / (grid.ny * grid.dy) if abs(dj) < 1 else fy
    fx = fx + di / (grid.nx * grid.dx) if abs(di) < 1 else fx
    return (fx, fy, peak, background)


def lattice_period(intensity: IntensityMap, axis: Optional[str] = None):
    """Dominant spatial period in mm.

    axis=None: 1/|f| of the dominant 2D peak.  axis="x"/"y": the period
    implied by that axis component of the dominant peak.
    """
    fx, fy, _, _ = lattice_peaks(intensity)
    if axis is None:
        f = np.hypot(fx, fy)
    elif axis == "x":
        f = abs(fx)
    elif axis == "y":
        f = abs(fy)
    else:
        raise ConfigurationError(f"axis must be None, 'x', or 'y', got {axis!r}")
    if f <= 0:
        raise NoLatticeError(f"no modulation along axis {axis!r}")
    return 1.0 / f


def visibility(intensity: IntensityMap, axis, period_mm=None):
    """Fringe visibility V of I(u) = I0 (1 + V cos(2 pi u / a + delta)) along one axis.

    The profile is the mean over the perpendicular axis; V comes from a
    linear least-squares fit at the (estimated or given) period, clamped
    to [0, 1].
    """
    if axis not in ("x", "y"):
        raise ConfigurationError(f"axis must be 'x' or 'y', got {axis!r}")
    if period_mm is None:
        period_mm = lattice_period(intensity, axis=axis)
    grid = intensity.grid
    if axis == "x":
        profile = intensity.values.mean(axis=0)
        u = grid.x_coords()
    else:
        profile = intensity.values.mean(axis=1)
        u = grid.y_coords()
    span = u[-1] - u[0]
    if span < 2 * period_mm:
        raise NoLatticeError(f"need >= 2 periods along {axis}, have {span / period_mm:.2f}")
    design = np.column_stack(
        [np.ones_like(u), np.cos(2 * np.pi * u / period_mm), np.sin(2 * np.pi * u / period_mm)]
    )
    coef, *_ = np.linalg.lstsq(design, profile, rcond=None)
    i0, a_c, a_s = coef
    if i0 <= 0:
        return 0.0
    return float(np.clip(np.hypot(a_c, a_s) / i0, 0.0, 1.0))


def azimuthal_harmonics(intensity: IntensityMap, center, radius_mm, n_phi=256, m_max=4):
    """|Fourier coefficient| of the ring intensity I(phi) for m = 0..m_max."""
    cx, cy = center
    phi = np.arange(n_phi) * (2 * np.pi / n_phi)
    xs = cx + radius_mm * np.cos(phi)
    ys = cy + radius_mm * np.sin(phi)
    ring = sample_bilinear(intensity.grid, intensity.values, xs, ys)
    coeffs = np.fft.fft(ring) / n_phi
    return {m: float(np.abs(coeffs[m])) for m in range(m_max + 1)}


def quadrupole_fidelity(field: SpinorField, cell_center, a_mm, radius_mm):
    """Overlap fidelity with the ideal quadrupole state on a disk.

    The quadrupole's azimuthal orientation is a free parameter of the
    reference (it depends only on how the quadrupole axes are oriented
    about the beam), so the overlap is maximized over that orientation:
    with A the up-component overlap and D the down-component overlap,
    F = (|A| + |D|)^2 / (norm_q * norm_f), which stays <= 1.
    """
    grid = field.grid
    if radius_mm <= 0:
        raise ConfigurationError("radius must be positive")
    cx, cy = cell_center
    xm, ym = grid.mesh()
    disk = (xm - cx) ** 2 + (ym - cy) ** 2 <= radius_mm**2
    if not np.any(disk):
        raise ResolutionError("disk contains no grid cells")
    # evaluate the quadrupole reference about the cell center, not the grid origin
    r = np.hypot(xm - cx, ym - cy)
    phi = np.arctan2(ym - cy, xm - cx)
    q_up = np.cos(np.pi * r / a_mm)
    q_down = 1j * np.exp(-1j * phi) * np.sin(np.pi * r / a_mm)

    a_ov = np.sum(np.conj(q_up[disk]) * field.up[disk])
    d_ov = np.sum(np.conj(q_down[disk]) * field.down[disk])
    norm_q = np.sum(np.abs(q_up[disk]) ** 2 + np.abs(q_down[disk]) ** 2)
    norm_f = np.sum(np.abs(field.up[disk]) ** 2 + np.abs(field.down[disk]) ** 2)
    if norm_q <= 0 or norm_f <= 0:
        raise ResolutionError("vanishing norm on the disk")
    return float((np.abs(a_ov) + np.abs(d_ov)) ** 2 / (norm_q * norm_f))
