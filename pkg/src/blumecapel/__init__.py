"""Blume-Capel lattice model with zero boundary conditions: Metropolis
dynamics, exact energy-landscape analysis at small size, and nucleation
experiments at desk scale."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GeometryError,
    InconsistentParametersError,
    InvalidParametersError,
    UnsupportedSizeError,
)
from .model import (
    Parameters,
    SpinConfiguration,
    delta_h,
    energy_hierarchy,
    flip_cost_table,
    gibbs_ratio,
    hamiltonian,
    homogeneous,
    homogeneous_energy,
    load_snapshot,
    save_snapshot,
    validate_condition,
)
from .dynamics import (
    HittingRecord,
    detailed_balance_check,
    parse_targets,
    run_until_hit,
    sample_exit_times,
    step,
    transition_probability,
)
from .landscape import (
    CriticalQuantities,
    FrameKind,
    FrameSpec,
    Path,
    build_frame,
    chopped_corner_rectangle,
    critical_droplet,
    critical_droplet_with_protuberance,
    critical_quantities,
    frame_energy_delta,
    is_local_minimum,
    path_height,
    reference_path_minus_to_plus,
    reference_path_zero_to_plus,
    saddle_configuration,
    verify_manifold_minimum,
)
from .exact import (
    StateSpace,
    communication_height_exact,
    communication_height_threshold,
    stability_level_exact,
)
