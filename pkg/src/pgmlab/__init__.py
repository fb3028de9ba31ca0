"""pgmlab: a desk-scale probabilistic graphical-models workbench.

Exact inference on discrete factor graphs, structural queries on directed
and undirected graphs, HMM and scalar Kalman filtering, parameter
estimation, Monte Carlo samplers, and Gaussian mean-field variational
inference.
"""

from .errors import (
    ConvergenceError,
    ImpossibleEvidenceError,
    InseparableError,
    NotPositiveDefiniteError,
    NumericError,
    PgmlabError,
    SingularMatrixError,
    ValidationError,
)
from .factors import DiscreteFactor, EliminationReport, condition, eliminate, max_marginalise, normalise, product, sum_marginalise
from .graphs import (
    Dag,
    IndependenceStatement,
    Ugm,
    d_separated,
    descendants,
    i_equivalent,
    immoralities,
    is_topological,
    local_markov_independencies,
    markov_blanket,
    minimal_directed_imap,
    minimal_separator,
    moralise,
    ordered_markov_independencies,
    skeleton,
    u_separated,
    ugm_from_blankets,
)
from .messages import (
    FactorGraph,
    Message,
    Schedule,
    condition_factor_graph,
    conditioned_sum_product,
    dag_to_factor_graph,
    factor_joint,
    max_sum_map,
    schedule,
    sum_product,
    validate_tree,
)
from .sequential import (
    DiscreteHmm,
    Gaussian1,
    KalmanModel,
    alpha_filter,
    ffbs,
    ffbs_paths,
    gaussian_linear_marginal,
    gaussian_product,
    kalman_filter,
    predict_hidden,
    predict_visible,
    smooth,
    viterbi,
)
from .samplers import RbmModel, SeededRng, Trace, ess, gibbs_rbm, mh, rejection_sample
from .variational import GaussianTarget, MeanFieldState, elbo, isotropic_kl_fit, mean_field_solve, mf_update

__version__ = "0.1.0"
