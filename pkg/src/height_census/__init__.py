"""Exact Weil heights over Q, multiplicative groups in (Q*)^k and height-counting censuses."""

__version__ = "0.1.0"

from .census import (
    CensusConfig,
    CensusRow,
    asymptotic_report,
    census_nondegenerate,
    count_height_ball,
    count_in_subspace,
    count_ratio_window,
)
from .heights import INFINITY, Place, abs_value, height_scalar, height_vector, ord_at, parse_rational
from .lognumber import LogNumber, sign_of
from .logspace import (
    VolumeResult,
    c_USk_closed,
    cell_decomposition,
    everest_volume,
    height_form,
    regulator_S,
    volume_c_gamma,
)
from .multgroup import (
    GroupDescriptor,
    analyze_group,
    check_place_separation,
    check_ratio_condition,
    compose_element,
    decompose_element,
)
from .recurrence import RecurrenceSpec, count_bounded_terms, term_value, validate_recurrence, zeros_up_to
from .represent import (
    CoefficientFamily,
    count_representable,
    permutation_orbit,
    predicted_constant,
    validate_family,
)
