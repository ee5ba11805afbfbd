"""Exact-arithmetic construction and verification of a trigonometric R-matrix,
its normalizing series, and the central series it generates.

Everything runs over exact rationals.  There is no floating point anywhere in
the verification path.
"""

from .central import (
    L0_apply,
    classical_limit_compare,
    exact_eval_rep,
    exact_word,
    letter_matrix,
    make_word,
    series_Theta_m,
    series_phi_k,
    series_qdet,
    series_theta_k,
    truncated_eval_rep,
    verify_centrality,
    verify_h_valuation_Theta,
    verify_l0_assembly,
    verify_l0_exchange,
    verify_multi_conjugation,
    verify_pairwise_commute,
    verify_reversal_conjugation,
    verify_rtt_exact,
)
from .coeffring import (
    LaurentFraction,
    LaurentPoly,
    NonInvertibleError,
    PrecisionError,
    SeriesWindow,
    TruncSeries,
)
from .fusion import build_antisymmetrizer, multi_R_product, verify_fusion
from .normalizer import (
    GSeries,
    build_gseries,
    solve_f,
    solve_g_ode,
    solve_gbar_rational,
    verify_g_relations,
    verify_route_agreement,
)
from .report import SCHEMA, CheckResult, report_to_json
from .rmatrix import (
    build_R,
    build_R1p,
    build_R2p,
    build_bundle,
    grade_highest_component,
    verify_crossing,
    verify_rational_limit,
    verify_two_point_relation,
    verify_unitarity,
    verify_ybe,
)
from .tensoralg import MulCache, RingSpec, TensorMatrix, perm_action

__version__ = "0.1.0"
