"""Multi-type Wright-Fisher processes with heavy reproductive events.

Exact finite-population simulation with pluggable colouring rules, a
jump-diffusion integrator for the continuum limit, the dual lineage-count
chain for fixation probabilities, and a statistical experiment harness.
"""

from .ancestral import (
    AncestralModel,
    FixationPrediction,
    StationaryEstimate,
    ancestral_rates,
    dual_moment,
    fixation_probabilities,
    simulate_ancestral,
    stationary_and_pgf,
)
from .bernstein import PolynomialMap, bernstein_table, evaluate_bernstein
from .core import (
    OffspringLaw,
    ScalingSchedule,
    SimplexPoint,
    as_frequencies,
    make_schedule,
    random_interior_points,
    round_to_counts,
)
from .discrete import DiscreteModel, empirical_drift, simulate_discrete, step_generation
from .errors import ConfigError, LwfError, RateExplosionError, ScheduleError, TransienceError
from .measures import (
    BetaLaw,
    FiniteAtoms,
    LambdaMeasure,
    PointMass,
    TruncatedSizeLaw,
    UniformLaw,
    ZeroMeasure,
    kappa_star,
    kappa_star_signed,
    lambda_nk,
    lambda_nk_quadrature,
    lambda_total_mass,
)
from .rng import RngStream
from .rules import (
    BernsteinRule,
    ColouringRule,
    LogisticRule,
    NegFreqDepRule,
    NeutralRule,
    PartialOrderRule,
    PosFreqDepRule,
    TransitiveRule,
    TransitiveWithMutationRule,
    bernstein_rule,
    colour_distribution,
    offspring_type_prob,
)
from .sde import BatchSde, SdeConfig, simulate_sde, step_em, zeta
from .selection import (
    DriftFunction,
    cyclic_contest_map,
    mu_food_web,
    mu_from_polynomial,
    mu_logistic,
    mu_negfreq,
    mu_posfreq,
    mu_rps,
    mu_transitive,
    transitive_pair_map,
)
from .trajectory import Trajectory, write_trajectories_csv

__version__ = "0.1.0"
