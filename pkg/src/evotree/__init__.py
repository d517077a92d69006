"""Selection-mutation dynamics on finite genotype spaces and lazily expanded trees."""

from .errors import (
    ConfigError,
    EvotreeError,
    Extinction,
    FrontierExplosion,
    MissingCoordinateLabels,
    ModelError,
    NoConvergence,
    NotMutationFree,
    NotSymmetric,
    TooShort,
    ValidationError,
    ZeroMeanFitness,
)
from .finite import (
    FiniteModel,
    evolve_finite,
    fisher_delta,
    mean_fitness_finite,
    perron_eigenpair,
    power_iteration,
    price_decomposition,
    step_finite,
    symmetrized_operator,
)
from .gaussian import (
    GaussianPeak,
    discretized_dominant_eigenvalue,
    equilibrium,
    flattest_compare,
    landscape_model,
    peak_eigenvalue,
)
from .tree import (
    Frontier,
    Labels,
    NodeRef,
    StepRecord,
    Trajectory,
    TraitPredicate,
    TreeModel,
    advance,
    descend,
    exponent_estimate,
    lineage_sizes,
    particle_oracle,
    root_frontier,
    run_tree,
)
from .zoo import build

__version__ = "0.1.0"
