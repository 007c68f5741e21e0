"""Simulator of polarized spin-1/2 beams through magnetic beamline elements.

Prepares and detects lattices of spin-orbit correlations: spin-dependent
intensity lattices, azimuthal phase structure, vortex/anti-vortex
winding, and the coil-current calibration behind them.
"""

from .beamline import (
    BeamlineConfig,
    SourceModel,
    coherence_sigma,
    ideal_field,
    ideal_lov_state,
    simulate,
)
from .core import (
    Grid,
    SPIN_DOWN,
    SPIN_UP,
    Spinor,
    SpinorField,
    SU2Map,
    apply,
    inner,
    make_grid,
    spinor_along,
    uniform_state,
)
from .elements import (
    GuideRotation,
    LovPrism,
    PhysicsParams,
    ResidualField,
    Slit,
    SpinFilter,
    lov_prism_map,
    period_from_physics,
    polarizer_ensemble,
    quadrupole_state,
    resolve_period,
    spin_filter,
    velocity_from_wavelength,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
