"""Band functions of Iwatsuka magnetic Hamiltonians."""
from .errors import (
    AccuracyError,
    DomainError,
    IwatsukaError,
    ProfileError,
    UnsupportedProfileError,
)
from .field import (
    Constant,
    FieldProfile,
    FlatContact,
    InfiniteContact,
    PiecewiseConstant,
    PowerTail,
    Tabulated,
    d_k,
    eval_a,
    eval_b,
    field_deriv_at_contact,
    inverse_a,
    landau_level,
    load_profile,
    parse_profile,
    t_of_k,
    thresholds,
)
from .fiber import (
    BandPoint,
    FiberEigenpair,
    Grid,
    band_derivative_fh,
    band_point,
    band_points,
    band_value,
    choose_window,
    solve_fiber,
)
from .asymptotics import (
    AsymptoticPrediction,
    C_constant,
    heuristic_gap,
    hermite_function,
    mu_n,
    mu_n_leading,
    predicted_gap_flat,
    predicted_gap_infinite,
    predicted_gap_power,
)
from .sweep import BandTable, check_monotone, limits_check, sweep
from .transport import (
    CurrentBounds,
    EnergyWindow,
    current_bounds,
    current_scaling,
    k_delta_asymptotic_check,
    k_of_energy,
    scaling_fit,
)

__version__ = "0.1.0"
