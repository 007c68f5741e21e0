"""Scenario execution: simulate, analyze, and collect output files.

This sits between the config layer and the user surfaces (HTTP service
and CLI).  A run produces an in-memory bundle of deterministic files so
the service can ship them over the wire and the CLI can write them to
disk unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import analysis
from .beamline import BeamlineConfig, coherence_sigma, simulate
from .config import ConfigBundle, load_config, serialize
from .elements import LovPrism, resolve_period
from .errors import ConfigurationError, LovsimError
from .imaging import csv_text, pgm_bytes, sidecar_text
from .optimize import OptimizationResult, optimize_currents

ALL_OUTPUTS = ("intensity", "phase", "oam", "winding", "report")

_DIR_NAMES = {
    "+x": "plus_x", "-x": "minus_x", "+y": "plus_y", "-y": "minus_y",
    "+z": "plus_z", "-z": "minus_z", "none": "unfiltered",
}


@dataclass(frozen=True)
class RunSpec:
    """One execution request: config source, seed, and requested outputs."""

    config_text: str
    seed: Optional[int] = None
    n_rays: Optional[int] = None
    outputs: Sequence[str] = ALL_OUTPUTS
    csv: bool = False

    def __post_init__(self):
        for o in self.outputs:
            if o not in ALL_OUTPUTS:
                raise ConfigurationError(f"unknown output {o!r}; valid: {ALL_OUTPUTS}")


@dataclass
class RunResult:
    """Deterministic output files plus the numeric summary."""

    files: Dict[str, bytes]
    report: str
    summary: dict


def _resolve(spec: RunSpec) -> tuple:
    bundle = load_config(spec.config_text)
    config = bundle.config
    if spec.n_rays is not None:
        config = replace(config, source=replace(config.source, n_rays=spec.n_rays))
    diverging = (
        config.source.divergence_fwhm_x_deg > 0 or config.source.divergence_fwhm_y_deg > 0
    )
    seed = spec.seed
    if seed is None:
        if diverging:
            raise ConfigurationError("a seed is required when the beam divergence is nonzero")
        seed = 0
    return config, seed, bundle.applied_defaults


def reference_period(config: BeamlineConfig) -> Optional[float]:
    """Lattice period of the first active prism, if any."""
    for e in config.elements:
        if isinstance(e, LovPrism) and (e.current_a > 0 or e.period_override_mm):
            return resolve_period(e, config.physics)
    return None


def _fringe_axis(config: BeamlineConfig) -> str:
    """Axis of the last active prism's gradient (the freshest modulation)."""
    axis = "x"
    for e in config.elements:
        if isinstance(e, LovPrism) and (e.current_a > 0 or e.period_override_mm):
            axis = e.gradient_axis
    return axis


def _analysis_block(config: BeamlineConfig, result, summary, lines):
    """Best-effort observables on the ideal (zero-divergence) field and MC maps."""
    ideal = result.ideal
    a_ref = reference_period(config)
    summary["reference_period_mm"] = a_ref

    analyzer = config.analyzer
    mc_dir = analyzer.direction if analyzer else "none"
    mc_map = analysis.IntensityMap(config.camera, result.intensity[mc_dir])

    def attempt(label, fn):
        try:
            value = fn()
        except LovsimError as exc:
            lines.append(f"{label}: n/a ({exc.category}: {exc})")
            return None
        lines.append(f"{label}: {value}")
        return value

    period = attempt(
        "lattice period estimate (ideal field, mm)",
        lambda: round(
            analysis.lattice_period(analysis.intensity_from_field(ideal, "down")), 4
        ),
    )
    summary["period_estimate_mm"] = period

    axis = _fringe_axis(config)
    vis = attempt(
        f"fringe visibility along {axis} (camera image)",
        lambda: round(analysis.visibility(mc_map, axis), 4),
    )
    summary["visibility"] = vis

    windings = None
    if a_ref is not None:
        try:
            windings = analysis.find_component_zeros(
                ideal, "down",
                region_half_width_mm=min(a_ref, (config.camera.nx * config.camera.dx) / 2 - a_ref / 4),
                min_separation_mm=a_ref / 4,
                loop_radius_mm=a_ref / 8,
            )
        except LovsimError as exc:
            lines.append(f"winding census: n/a ({exc.category}: {exc})")
    if windings is not None:
        windings = [z for z in windings if z[2] != 0]
        plus = sum(1 for _, _, w in windings if w > 0)
        minus = sum(1 for _, _, w in windings if w < 0)
        lines.append(f"winding census (ideal field): {plus} vortices, {minus} anti-vortices")
        summary["winding_census"] = {"plus": plus, "minus": minus}
    else:
        summary["winding_census"] = None

    delta_l = None
    if windings:
        # spectrum about the zero nearest the axis
        cx, cy, _ = min(windings, key=lambda z: z[0] ** 2 + z[1] ** 2)
        try:
            spec_down = analysis.oam_spectrum(ideal, (cx, cy), "down", a_ref / 8)
            spec_up = analysis.oam_spectrum(ideal, (cx, cy), "up", a_ref / 8)
            delta_l = spec_up.dominant - spec_down.dominant
            lines.append(
                f"azimuthal index: up l={spec_up.dominant} "
                f"(weight {spec_up.weights[spec_up.dominant]:.3f}), "
                f"down l={spec_down.dominant} "
                f"(weight {spec_down.weights[spec_down.dominant]:.3f}), "
                f"delta_l = {delta_l}"
            )
            summary["oam"] = {
                "cell_center": [round(cx, 4), round(cy, 4)],
                "up": {str(l): round(w, 6) for l, w in spec_up.weights.items()},
                "down": {str(l): round(w, 6) for l, w in spec_down.weights.items()},
            }
        except LovsimError as exc:
            lines.append(f"azimuthal spectrum: n/a ({exc.category}: {exc})")
            summary["oam"] = None
    else:
        summary["oam"] = None
    summary["delta_l"] = delta_l
    return windings


def run(spec: RunSpec) -> RunResult:
    """Execute one run: simulate, analyze, and build the output file set."""
    config, seed, applied_defaults = _resolve(spec)
    result = simulate(config, seed)

    files: Dict[str, bytes] = {}
    summary: dict = {"seed": seed, "n_rays": config.source.n_rays}
    lines: List[str] = []
    lines.append("run summary")
    lines.append("===========")
    lines.append(f"seed: {seed}")
    lines.append(f"rays: {config.source.n_rays}")
    sigma_um = coherence_sigma(
        config.physics.wavelength_nm,
        config.source.distance_to_first_prism_m,
        max(config.source.slit_width_x_mm, 1e-12),
    )
    lines.append(f"transverse coherence at first coil: {sigma_um:.3f} um")
    summary["coherence_um"] = round(sigma_um, 4)

    windings = _analysis_block(config, result, summary, lines)

    if applied_defaults:
        lines.append("")
        lines.append("applied defaults:")
        for d in applied_defaults:
            lines.append(f"  {d}")

    grid = config.camera
    if "intensity" in spec.outputs:
        for direction, values in result.intensity.items():
            stem = f"intensity_{_DIR_NAMES[direction]}"
            files[f"{stem}.pgm"] = pgm_bytes(values)
            files[f"{stem}.pgm.meta.txt"] = sidecar_text(values, grid, "intensity").encode()
            if spec.csv:
                files[f"{stem}.csv"] = csv_text(values).encode()
        ideal_down = np.abs(result.ideal.down) ** 2
        files["ideal_down_intensity.pgm"] = pgm_bytes(ideal_down)
        files["ideal_down_intensity.pgm.meta.txt"] = sidecar_text(
            ideal_down, grid, "intensity"
        ).encode()
        if spec.csv:
            files["ideal_down_intensity.csv"] = csv_text(ideal_down).encode()
    if "phase" in spec.outputs:
        pmap = analysis.phase_difference_map(result.ideal)
        masked = np.where(pmap.mask, pmap.values, 0.0)
        files["phase_difference.pgm"] = pgm_bytes(masked, lo=-np.pi, hi=np.pi)
        files["phase_difference.pgm.meta.txt"] = sidecar_text(
            masked, grid, "phase", lo=-np.pi, hi=np.pi
        ).encode()
        if spec.csv:
            files["phase_difference.csv"] = csv_text(masked).encode()
    if "oam" in spec.outputs and summary.get("oam"):
        rows = ["l,up_weight,down_weight"]
        for l in sorted(int(k) for k in summary["oam"]["up"]):
            rows.append(
                f"{l},{summary['oam']['up'][str(l)]},{summary['oam']['down'][str(l)]}"
            )
        files["oam_spectrum.csv"] = ("\n".join(rows) + "\n").encode()
    if "winding" in spec.outputs and windings:
        rows = ["x_mm,y_mm,winding"]
        for x, y, w in sorted(windings):
            rows.append(f"{x:.4f},{y:.4f},{w}")
        files["windings.csv"] = ("\n".join(rows) + "\n").encode()

    report = "\n".join(lines) + "\n"
    if "report" in spec.outputs:
        files["report.txt"] = report.encode()
        files["config_resolved.yaml"] = serialize(config).encode()
    return RunResult(files=files, report=report, summary=summary)


def apply_override(config_text: str, param: str, value) -> str:
    """Set one dotted/indexed parameter (e.g. elements[0].offset_mm) in a config document."""
    doc = yaml.safe_load(config_text)
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping")
    node = doc
    parts = []
    for piece in param.split("."):
        while "[" in piece:
            head, rest = piece.split("[", 1)
            idx, piece = rest.split("]", 1)
            if head:
                parts.append(head)
            parts.append(int(idx))
        if piece:
            parts.append(piece)
    for p in parts[:-1]:
        try:
            node = node[p]
        except (KeyError, IndexError, TypeError):
            raise ConfigurationError(f"sweep parameter path {param!r} not found at {p!r}")
    last = parts[-1]
    if isinstance(node, dict) and last not in node and not isinstance(last, int):
        # allow setting optional keys that the base config omitted
        node[last] = value
    else:
        try:
            node[last] = value
        except (KeyError, IndexError, TypeError):
            raise ConfigurationError(f"sweep parameter path {param!r} not settable")
    return yaml.safe_dump(doc, sort_keys=False)


def run_sweep(config_text: str, param: str, values, seed=None, n_rays=None,
              outputs=ALL_OUTPUTS, csv=False) -> List[RunResult]:
    """Run the config once per value of one swept parameter."""
    doc = yaml.safe_load(config_text)
    if isinstance(doc, dict):
        doc.pop("sweep", None)
        config_text = yaml.safe_dump(doc, sort_keys=False)
    results = []
    for v in values:
        text = apply_override(config_text, param, v)
        spec = RunSpec(config_text=text, seed=seed, n_rays=n_rays, outputs=outputs, csv=csv)
        results.append(run(spec))
    return results


OBJECTIVES = ("visibility", "lattice_contrast", "fidelity")


def make_objective(config_text: str, kind: str, seed, n_rays=None):
    """Objective(currents) for coil tuning; analysis failures score 0."""
    if kind not in OBJECTIVES:
        raise ConfigurationError(f"objective must be one of {OBJECTIVES}, got {kind!r}")
    base = load_config(config_text).config
    if n_rays is not None:
        base = replace(base, source=replace(base.source, n_rays=n_rays))
    axis = _fringe_axis(base)

    def objective(currents):
        config = base.with_currents(currents)
        try:
            result = simulate(config, seed)
            analyzer = config.analyzer
            mc_dir = analyzer.direction if analyzer else "none"
            mc_map = analysis.IntensityMap(config.camera, result.intensity[mc_dir])
            if kind == "visibility":
                return analysis.visibility(mc_map, axis)
            if kind == "lattice_contrast":
                fx, fy, peak, background = analysis.lattice_peaks(mc_map)
                dc = mc_map.values.sum()
                return float(peak / dc) if dc > 0 else 0.0
            a_ref = reference_period(config)
            if a_ref is None:
                return 0.0
            center = analysis.find_cell_center(result.ideal, (0.0, 0.0), a_ref / 2)
            return analysis.quadrupole_fidelity(result.ideal, center, a_ref, a_ref / 8)
        except LovsimError:
            return 0.0

    return objective


def run_optimize(config_text: str, objective_kind: str, free_indices=None, seed=None,
                 n_rays=None, bounds=(0.0, 10.0), max_sweeps=2,
                 line_tol=0.25) -> OptimizationResult:
    """Tune prism currents for one config; returns the optimizer result."""
    config, seed, _ = _resolve(RunSpec(config_text=config_text, seed=seed, n_rays=n_rays))
    initial = [p.current_a for p in config.prisms]
    if not initial:
        raise ConfigurationError("config has no prisms to optimize")
    objective = make_objective(config_text, objective_kind, seed, n_rays)
    return optimize_currents(
        objective, initial, free_indices=free_indices, bounds=bounds,
        max_sweeps=max_sweeps, line_tol=line_tol,
    )
