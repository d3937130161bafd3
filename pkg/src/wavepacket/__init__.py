"""1D Schrodinger evolutions in subquadratic potentials, with the phase-space
machinery to invert their Strichartz estimates at desk scale: wavepacket
transforms, bicharacteristic flows, Galilean covariance, interval location,
and concentration-bubble detection with exact mass decoupling.
"""

from .fields import (
    ComplexField,
    FieldFormatError,
    Grid1D,
    SpacetimeField,
    boundary_amplitude,
    gaussian_packet,
    inner_product,
    load_field,
    lp_norm,
    mixed_norm,
    save_field,
)
from .flows import (
    PhasePoint,
    Trajectory,
    action,
    check_pair_estimates,
    collision_window,
    cube_containment,
    flow,
    trajectory,
)
from .potentials import Potential, builtin, verify_subquadratic
from .propagator import (
    DispersiveReport,
    EvolveParams,
    ResolutionWarning,
    dispersive_probe,
    evolve,
    evolve_record,
    strichartz_check,
)
from .phasespace import (
    PhaseGrid,
    WavepacketCoefs,
    Window,
    analyze,
    dilate,
    galilean_covariance_residual,
    lens_transform,
    recentered_potential,
    synthesize,
    translate_modulate,
    translate_modulate_inverse,
)
from .concentration import (
    BALANCED_ADMISSIBLE_PAIR,
    Bubble,
    IntervalCandidate,
    ProfileDecomposition,
    SearchParams,
    detect_bubble,
    extract_profile,
    inverse_hls_scan,
    iterate_decomposition,
    kernel_K,
    kernel_decay_probe,
    locate_interval,
)

__version__ = "0.1.0"
