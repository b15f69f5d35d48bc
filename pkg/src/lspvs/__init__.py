"""Weight-informed Bayesian variable selection for linear regression.

External importance weights (for example, scores elicited from a language
model) tilt prior inclusion probabilities through a power transform whose
strength is itself given a hyperprior, so uninformative weights are
shrunk back to an exchangeable prior.
"""

from .core import (
    RegressionData,
    RngSeed,
    make_rng,
    read_dataset,
    standardize,
    write_dataset,
)
from .errors import LspError
from .lasso import LassoCvSpec, lasso_cv, two_stage_cv, weighted_lasso_fit
from .prior import LspConfig, compute_theta, eta_max
from .quality import phi_l1, phi_pairwise, phi_plugin
from .scores import ingest_scores, read_scores, write_scores
from .spike_slab import PosteriorSummary, SpikeSlabSampler, SsModelSpec, run_chain
from .ssl import SslSpec, run_path
from .synth import DEFAULT_PHI_GRID, generate_weights, solve_ratio

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PHI_GRID", "LassoCvSpec", "LspConfig", "LspError", "PosteriorSummary",
    "RegressionData", "RngSeed", "SpikeSlabSampler", "SsModelSpec", "SslSpec",
    "compute_theta", "eta_max", "generate_weights", "ingest_scores", "lasso_cv",
    "make_rng", "phi_l1", "phi_pairwise", "phi_plugin", "read_dataset", "read_scores",
    "run_chain", "run_path", "solve_ratio", "standardize", "two_stage_cv",
    "weighted_lasso_fit", "write_dataset", "write_scores",
]
