"""Max-stable random fields on lattices.

Seeded simulation of moving-maximum and Brown-Resnick fields with unit
Frechet margins, closed-form extremal dependence, empirical extremogram
estimation, and Monte Carlo checks of the limiting normality and of the
centering-bias dichotomy.
"""

from .clt import (
    CltReport,
    SequencePlan,
    bias_curve,
    clt_report,
    normality_diagnostics,
    pi_matrix,
    plan,
    scaled_deviations,
    sigma_plugin,
)
from .estimators import (
    ExtremogramSeries,
    NoExceedancesError,
    empirical_extremogram,
    mu_hat,
    tau_hat,
    threshold,
)
from .fields import (
    GridField,
    br_pair_sample,
    derive_rng,
    derive_seed,
    mma_pair_sample,
    read_field,
    simulate_brown_resnick,
    simulate_field,
    simulate_iid_frechet,
    simulate_mma,
    write_field,
)
from .lattice import Grid, LagSet, ball, ball_offsets, shifted_index_set
from .models import BrModel, IidModel, MmaModel, Variogram
from .theory import (
    Interval,
    br_v2,
    dependence_of,
    incomplete_gamma,
    mma_mixing_bound,
    mma_theta,
    mma_v1,
    mma_v2,
    mma_v2_general,
    preasymptotic_exact,
    preasymptotic_taylor,
    true_extremogram,
)

__version__ = "0.1.0"
