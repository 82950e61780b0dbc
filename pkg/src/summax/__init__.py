"""summax: exact joint distribution of the sum and maximum of independent
nonnegative random variables, with grid recurrences for continuous laws,
exact lattice recurrences for integer laws, and built-in independent oracles.
"""
from .errors import (
    ConfigError,
    DegenerateSliceError,
    EngineError,
    GridError,
    ModelError,
    OracleError,
    SumMaxError,
)
from .models import (
    ContinuousFamily,
    ContinuousModel,
    DiscreteFamily,
    DiscreteModel,
    bernoulli,
    binomial,
    canonical_text,
    cdf_eval,
    dcdf_eval,
    explicit,
    exponential,
    gamma,
    geometric,
    make_rng,
    model_fingerprint,
    pdf_eval,
    pmf_eval,
    poisson,
    quantile,
    sample,
    support_quantile,
    tabulated,
    uniform,
    uniform_int,
    weibull,
)
from .grids import (
    GridFunction2D,
    GridSpec,
    default_grid_spec,
    wedge_row_bounds,
)
from .cont_engine import (
    cdf_direct_smalln,
    cdf_from_pdf,
    cdf_mixed,
    cdf_mixed_at,
    cdf_recursive,
    cdf_shifted,
    pdf_bootstrap_g2,
    pdf_iid_recursive,
    pdf_recursive,
    pdf_shifted,
)
from .disc_engine import (
    AuxTable,
    PmfTriangle,
    cdf_direct_smalln_discrete,
    cdf_recursive_discrete,
    cdf_shifted_discrete,
    pmf_from_cdf_differencing,
    pmf_iid_with_h,
    pmf_recursive,
    pmf_shifted_discrete,
)
from .derived import (
    PaprQuery,
    Table1D,
    conditional,
    expectation,
    joint_moment,
    marginal_max,
    marginal_sum,
    papr_prob_continuous,
    papr_prob_discrete,
    prob_zero_sum,
)
from .oracle import (
    OracleReport,
    PointRecord,
    TolerancePolicy,
    compare,
    enumerate_discrete_joint,
    mc_joint_cdf,
    mc_papr_prob,
    quadrature_joint_cdf,
)

__version__ = "0.1.0"
