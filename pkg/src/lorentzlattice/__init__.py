"""Discrete-spacetime quantum walks and automata under discrete Lorentz transforms."""

__version__ = "0.1.0"

from .lattice import InitialRow, LightCoord, SpacetimeField, Window, coord_convert, floor_multiple
from .models import (
    ClockWalkSpec,
    CoinOperator,
    QCAState,
    ScatteringOperator,
    build_gate,
    clock_coin,
    clock_qca_scattering,
    dirac_coin,
    fd_dirac_coin,
    qca_step,
    qw_evolve,
)
from .patch import PatchOperator, build_patch, patch_interior
from .lorentz import (
    Encoding,
    GateNetwork,
    HomogeneityError,
    LorentzParams,
    NonHomogParams,
    SubspaceError,
    covariance_residual,
    lorentz_transform_field,
    make_encoding,
    nonhomog_transform,
    observer_rescaling,
    unzoom_field,
)
from .observables import (
    CauchySurface,
    SurfaceNorm,
    constant_time_surface,
    local_velocity,
    mean_velocity,
    surface_norm,
    swap_move,
    transform_surface,
    velocity_addition_check,
)
from .analysis import (
    EncodingCandidate,
    OrderFit,
    encoding_uniqueness_search,
    kg_decoupling_residual,
    kg_mass_check,
    order_fit,
    sampled_continuum_field,
    second_order_counterexample,
)
