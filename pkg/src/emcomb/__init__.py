"""emcomb: two-mode cavity electromechanics in the time and frequency domain.

Simulates a microwave cavity coupled to two mechanical modes through
radiation pressure, locates the pump conditions where the intracavity
field goes unstable, and analyzes the resulting output spectra: single-mode
frequency combs, their instability-threshold map over (detuning, power),
and hybridized combs whose teeth live on the two-mode integer lattice.
"""

__version__ = "0.1.0"

from .core import (  # noqa: F401
    SystemParams, PumpCondition, SystemState, ParameterPreset,
    PAPER_DEVICE, DESK_SCALE, PRESETS, get_preset, with_overrides,
    dbm_to_flux, flux_to_dbm, pump_from_dbm, eom_rhs, static_fixed_points,
    effective_detuning,
)
from .dynamics import (  # noqa: F401
    Trajectory, AttractorKind, AttractorReport, SettleCriteria,
    integrate, settle, growth_rate_from_transient,
    integrate_cavity_prescribed, write_csv, write_binary, read_binary,
)
from .stability import (  # noqa: F401
    StabilityReport, ThresholdCurve, jacobian, analyze, max_growth_rate,
    sideband_gain, effective_damping, threshold_power, threshold_curve,
    single_mode_params,
)
from .spectral import (  # noqa: F401
    Spectrum, Tooth, output_field, psd, spectrum_of, find_teeth,
    teeth_to_json, teeth_from_json,
)
from .combs import (  # noqa: F401
    Regime, LatticeAssignment, CombClassification, BesselComb,
    lattice_fit, classify, bessel_comb, competition_outcome,
    default_tol_hz, min_lattice_gap, classification_to_json,
)
from .sweep import (  # noqa: F401
    SweepPlan, SweepResult, PointResult, run_sweep, export_map, import_map,
)
from . import errors  # noqa: F401
