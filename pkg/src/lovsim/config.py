"""Beamline configuration schema: strict YAML with units baked into key names.

Units are fixed: mm for transverse lengths and offsets, m for positions
along the beam, A for currents, degrees for angles, T/A for the coil
calibration.  Unknown keys fail with a nearest-name suggestion; every
applied default is echoed so a run report shows the resolved config.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from importlib import resources
from typing import List, Optional, Tuple

import yaml

from .beamline import BeamlineConfig, SourceModel
from .core import Grid, make_grid
from .elements import (
    DEFAULT_B_PER_AMP,
    DEFAULT_INCLINE_DEG,
    DEFAULT_POLARIZATION,
    DEFAULT_WAVELENGTH_NM,
    GuideRotation,
    LovPrism,
    PhysicsParams,
    ResidualField,
    Slit,
    SpinFilter,
)
from .errors import ConfigurationError

_PHYSICS_KEYS = {
    "wavelength_nm": "nm",
    "incline_angle_deg": "deg",
    "b_per_amp_t": "T/A",
    "v_z_m_per_s": "m/s",
}
_SOURCE_KEYS = {
    "slit_width_x_mm": "mm",
    "slit_width_y_mm": "mm",
    "divergence_fwhm_x_deg": "deg",
    "divergence_fwhm_y_deg": "deg",
    "distance_to_first_prism_m": "m",
    "n_rays": "count",
    "angular_distribution": "gaussian|uniform",
}
_CAMERA_KEYS = {
    "z_m": "m",
    "width_mm": "mm",
    "height_mm": "mm",
    "pitch_mm": "mm",
}
_ELEMENT_KEYS = {
    "lov_prism": {
        "kind": "", "z_m": "m", "gradient_axis": "x|y", "current_a": "A",
        "offset_mm": "mm", "period_override_mm": "mm",
    },
    "guide_rotation": {"kind": "", "z_m": "m", "axis": "unit 3-vector", "angle_rad": "rad"},
    "residual_field": {
        "kind": "", "z_m": "m", "axis": "unit 3-vector",
        "gradient_rad_per_mm": "rad/mm", "gradient_axis": "x|y",
    },
    "slit": {"kind": "", "z_m": "m", "width_x_mm": "mm", "width_y_mm": "mm"},
    "spin_filter": {"kind": "", "z_m": "m", "direction": "+-x|y|z", "analyzing_power": "[0,1]"},
}
_TOP_KEYS = {"physics", "source", "polarization", "polarizer_direction", "elements", "camera", "sweep"}


@dataclass(frozen=True)
class SweepSpec:
    """One parameter swept over a value list, e.g. elements[0].offset_mm."""

    param: str
    values: Tuple[float, ...]


@dataclass(frozen=True)
class ConfigBundle:
    config: BeamlineConfig
    sweep: Optional[SweepSpec]
    applied_defaults: Tuple[str, ...]


def _reject_unknown(mapping, allowed, where):
    for key in mapping:
        if key not in allowed:
            close = difflib.get_close_matches(str(key), list(allowed), n=1)
            hint = f"; did you mean {close[0]!r}?" if close else ""
            raise ConfigurationError(f"unknown key {key!r} in {where}{hint}")


def _number(mapping, key, unit, where, default=None, required=False):
    if key not in mapping or mapping[key] is None:
        if required:
            raise ConfigurationError(f"missing required key {key!r} in {where}")
        return default
    v = mapping[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigurationError(f"{where}.{key} must be a number in {unit}, got {v!r}")
    return float(v)


def _defaulted(defaults_log, where, key, value):
    defaults_log.append(f"{where}.{key} = {value}")
    return value


def _parse_physics(section, defaults_log):
    section = section or {}
    _reject_unknown(section, _PHYSICS_KEYS, "physics")
    def pick(key, default):
        v = _number(section, key, _PHYSICS_KEYS[key], "physics")
        return v if v is not None else _defaulted(defaults_log, "physics", key, default)

    kwargs = {}
    kwargs["wavelength_nm"] = pick("wavelength_nm", DEFAULT_WAVELENGTH_NM)
    kwargs["incline_angle_deg"] = pick("incline_angle_deg", DEFAULT_INCLINE_DEG)
    kwargs["b_per_amp"] = pick("b_per_amp_t", DEFAULT_B_PER_AMP)
    v_z = _number(section, "v_z_m_per_s", "m/s", "physics")
    if v_z is not None:
        kwargs["v_z"] = v_z
    return PhysicsParams(**kwargs)


def _parse_source(section, defaults_log):
    section = section or {}
    _reject_unknown(section, _SOURCE_KEYS, "source")
    base = SourceModel()
    out = {}
    for key, attr in [
        ("slit_width_x_mm", "slit_width_x_mm"),
        ("slit_width_y_mm", "slit_width_y_mm"),
        ("divergence_fwhm_x_deg", "divergence_fwhm_x_deg"),
        ("divergence_fwhm_y_deg", "divergence_fwhm_y_deg"),
        ("distance_to_first_prism_m", "distance_to_first_prism_m"),
    ]:
        v = _number(section, key, _SOURCE_KEYS[key], "source")
        out[attr] = v if v is not None else _defaulted(defaults_log, "source", key, getattr(base, attr))
    if "n_rays" in section:
        n = section["n_rays"]
        if isinstance(n, bool) or not isinstance(n, int):
            raise ConfigurationError(f"source.n_rays must be an integer count, got {n!r}")
        out["n_rays"] = n
    else:
        out["n_rays"] = _defaulted(defaults_log, "source", "n_rays", base.n_rays)
    if "angular_distribution" in section:
        out["angular_distribution"] = section["angular_distribution"]
    else:
        out["angular_distribution"] = _defaulted(
            defaults_log, "source", "angular_distribution", base.angular_distribution
        )
    return SourceModel(**out)


def _parse_axis(value, where):
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigurationError(f"{where}.axis must be a 3-component unit vector, got {value!r}")
    return tuple(float(v) for v in value)


def _parse_element(entry, idx):
    where = f"elements[{idx}]"
    if not isinstance(entry, dict):
        raise ConfigurationError(f"{where} must be a mapping with a 'kind' key")
    kind = entry.get("kind")
    if kind not in _ELEMENT_KEYS:
        close = difflib.get_close_matches(str(kind), list(_ELEMENT_KEYS), n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        raise ConfigurationError(f"{where} has unknown kind {kind!r}{hint}")
    allowed = _ELEMENT_KEYS[kind]
    _reject_unknown(entry, allowed, where)
    z = _number(entry, "z_m", "m", where, required=True)
    if kind == "lov_prism":
        return LovPrism(
            z_m=z,
            gradient_axis=entry.get("gradient_axis", "y"),
            current_a=_number(entry, "current_a", "A", where, default=0.0),
            offset_mm=_number(entry, "offset_mm", "mm", where, default=0.0),
            period_override_mm=_number(entry, "period_override_mm", "mm", where),
        )
    if kind == "guide_rotation":
        return GuideRotation(
            z_m=z,
            axis=_parse_axis(entry.get("axis"), where),
            angle_rad=_number(entry, "angle_rad", "rad", where, required=True),
        )
    if kind == "residual_field":
        return ResidualField(
            z_m=z,
            axis=_parse_axis(entry.get("axis"), where),
            gradient_rad_per_mm=_number(entry, "gradient_rad_per_mm", "rad/mm", where, required=True),
            gradient_axis=entry.get("gradient_axis", "y"),
        )
    if kind == "slit":
        return Slit(
            z_m=z,
            width_x_mm=_number(entry, "width_x_mm", "mm", where, required=True),
            width_y_mm=_number(entry, "width_y_mm", "mm", where, required=True),
        )
    return SpinFilter(
        z_m=z,
        direction=entry.get("direction", "-z"),
        analyzing_power=_number(entry, "analyzing_power", "[0,1]", where, default=DEFAULT_POLARIZATION),
    )


def _parse_camera(section, defaults_log):
    if not section:
        raise ConfigurationError("missing required section 'camera'")
    _reject_unknown(section, _CAMERA_KEYS, "camera")
    z = _number(section, "z_m", "m", "camera", required=True)

    def pick(key, default):
        v = _number(section, key, _CAMERA_KEYS[key], "camera")
        return v if v is not None else _defaulted(defaults_log, "camera", key, default)

    width = pick("width_mm", 25.0)
    height = pick("height_mm", 25.0)
    pitch = pick("pitch_mm", 0.1)
    return make_grid(width, height, pitch), z


def load_config(text) -> ConfigBundle:
    """Parse and validate a config document; returns config, sweep, defaults."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"config is not valid YAML: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError("config document must be a mapping of sections")
    _reject_unknown(doc, _TOP_KEYS, "config")

    defaults_log: List[str] = []
    physics = _parse_physics(doc.get("physics"), defaults_log)
    source = _parse_source(doc.get("source"), defaults_log)
    raw_elements = doc.get("elements") or []
    if not isinstance(raw_elements, list):
        raise ConfigurationError("'elements' must be a list in beam order")
    elements = tuple(_parse_element(e, i) for i, e in enumerate(raw_elements))
    camera, camera_z = _parse_camera(doc.get("camera"), defaults_log)

    if "polarization" in doc:
        polarization = _number(doc, "polarization", "[0,1]", "config")
    else:
        polarization = _defaulted(defaults_log, "config", "polarization", DEFAULT_POLARIZATION)
    if "polarizer_direction" in doc:
        polarizer_direction = doc["polarizer_direction"]
    else:
        polarizer_direction = _defaulted(defaults_log, "config", "polarizer_direction", "+z")

    config = BeamlineConfig(
        source=source,
        physics=physics,
        elements=elements,
        camera=camera,
        camera_z_m=camera_z,
        polarization=polarization,
        polarizer_direction=polarizer_direction,
    )

    sweep = None
    if "sweep" in doc and doc["sweep"] is not None:
        sw = doc["sweep"]
        _reject_unknown(sw, {"param", "values"}, "sweep")
        if "param" not in sw or "values" not in sw:
            raise ConfigurationError("sweep needs 'param' and 'values'")
        sweep = SweepSpec(str(sw["param"]), tuple(float(v) for v in sw["values"]))

    return ConfigBundle(config, sweep, tuple(defaults_log))


def parse_config(text) -> BeamlineConfig:
    """Validated config with all defaults resolved."""
    return load_config(text).config


def _element_to_dict(e):
    if isinstance(e, LovPrism):
        d = {"kind": e.kind, "z_m": e.z_m, "gradient_axis": e.gradient_axis,
             "current_a": e.current_a, "offset_mm": e.offset_mm}
        if e.period_override_mm is not None:
            d["period_override_mm"] = e.period_override_mm
        return d
    if isinstance(e, GuideRotation):
        return {"kind": e.kind, "z_m": e.z_m, "axis": list(e.axis), "angle_rad": e.angle_rad}
    if isinstance(e, ResidualField):
        return {"kind": e.kind, "z_m": e.z_m, "axis": list(e.axis),
                "gradient_rad_per_mm": e.gradient_rad_per_mm, "gradient_axis": e.gradient_axis}
    if isinstance(e, Slit):
        return {"kind": e.kind, "z_m": e.z_m, "width_x_mm": e.width_x_mm, "width_y_mm": e.width_y_mm}
    return {"kind": e.kind, "z_m": e.z_m, "direction": e.direction,
            "analyzing_power": e.analyzing_power}


def serialize(config: BeamlineConfig) -> str:
    """Canonical YAML for a config; parse_config(serialize(c)) == c."""
    physics = {
        "wavelength_nm": config.physics.wavelength_nm,
        "incline_angle_deg": config.physics.incline_angle_deg,
        "b_per_amp_t": config.physics.b_per_amp,
    }
    if config.physics.v_z is not None:
        physics["v_z_m_per_s"] = config.physics.v_z
    doc = {
        "physics": physics,
        "source": {
            "slit_width_x_mm": config.source.slit_width_x_mm,
            "slit_width_y_mm": config.source.slit_width_y_mm,
            "divergence_fwhm_x_deg": config.source.divergence_fwhm_x_deg,
            "divergence_fwhm_y_deg": config.source.divergence_fwhm_y_deg,
            "distance_to_first_prism_m": config.source.distance_to_first_prism_m,
            "n_rays": config.source.n_rays,
            "angular_distribution": config.source.angular_distribution,
        },
        "polarization": config.polarization,
        "polarizer_direction": config.polarizer_direction,
        "elements": [_element_to_dict(e) for e in config.elements],
        "camera": {
            "z_m": config.camera_z_m,
            "width_mm": config.camera.nx * config.camera.dx,
            "height_mm": config.camera.ny * config.camera.dy,
            "pitch_mm": config.camera.dx,
        },
    }
    return yaml.safe_dump(doc, sort_keys=False)


def scenario_names() -> List[str]:
    files = resources.files(__package__).joinpath("scenarios")
    return sorted(p.name[: -len(".yaml")] for p in files.iterdir() if p.name.endswith(".yaml"))


def scenario_text(name) -> str:
    path = resources.files(__package__).joinpath("scenarios").joinpath(f"{name}.yaml")
    try:
        return path.read_text()
    except FileNotFoundError:
        close = difflib.get_close_matches(name, scenario_names(), n=1)
        hint = f"; did you mean {close[0]!r}?" if close else ""
        raise ConfigurationError(f"unknown scenario {name!r}{hint}") from None


def load_scenario(name) -> ConfigBundle:
    return load_config(scenario_text(name))
