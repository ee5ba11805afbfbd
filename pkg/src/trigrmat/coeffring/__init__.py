"""Exact coefficient rings: Laurent fractions and window-tracked series."""

from .laurent import (
    FieldDivisionError,
    LaurentFraction,
    LaurentPoly,
    lf_const,
    lf_shift_spectral,
    lf_var,
    lp_const,
    lp_var,
)
from .series import (
    LayeredSeries,
    NonInvertibleError,
    PrecisionError,
    SeriesWindow,
    TruncSeries,
    clear_expansion_cache,
    series_from_records,
    series_to_records,
    ts_arith,
    ts_derivative,
    ts_exp_expand,
    ts_from_fraction,
    ts_geom_inverse,
    ts_reflect_u,
    ts_sqrt,
    ts_taylor_shift,
)

__all__ = [
    "FieldDivisionError",
    "LaurentFraction",
    "LaurentPoly",
    "lf_const",
    "lf_shift_spectral",
    "lf_var",
    "lp_const",
    "lp_var",
    "LayeredSeries",
    "NonInvertibleError",
    "PrecisionError",
    "SeriesWindow",
    "TruncSeries",
    "clear_expansion_cache",
    "series_from_records",
    "series_to_records",
    "ts_arith",
    "ts_derivative",
    "ts_exp_expand",
    "ts_from_fraction",
    "ts_geom_inverse",
    "ts_reflect_u",
    "ts_sqrt",
    "ts_taylor_shift",
]
