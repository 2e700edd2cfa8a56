"""Generative model training with semi-discrete entropic optimal transport."""

from .dual_solver import (AscentConfig, closed_form_potential_single_atom,
                          marginal_violation, solve_dual_fullbatch,
                          solve_dual_sga)
from .generators import MLP, AdamState, Affine, Translation, adam_step
from .measures import (DiscreteMeasure, LatentSampler, PowerNorm,
                       SquaredEuclidean, cost_grad_x, cost_value, load_dataset,
                       sample_latent)
from .oracle import (counterexample_reference, fd_gradient_check,
                     kl_divergence, relative_entropy, sinkhorn_solve)
from .semidual import (c_lambda_transform, c_transform, eta_weights,
                       grad_psi_c_lambda, psi_ascent_direction,
                       semidual_objective)
from .trainer import (TrainConfig, generator_gradient_estimate,
                      load_checkpoint, run_counterexample, save_checkpoint,
                      train)

__version__ = "0.1.0"

__all__ = [
    "AscentConfig", "closed_form_potential_single_atom", "marginal_violation",
    "solve_dual_fullbatch", "solve_dual_sga",
    "MLP", "AdamState", "Affine", "Translation", "adam_step",
    "DiscreteMeasure", "LatentSampler", "PowerNorm", "SquaredEuclidean",
    "cost_grad_x", "cost_value", "load_dataset", "sample_latent",
    "counterexample_reference", "fd_gradient_check", "kl_divergence",
    "relative_entropy", "sinkhorn_solve",
    "c_lambda_transform", "c_transform", "eta_weights", "grad_psi_c_lambda",
    "psi_ascent_direction", "semidual_objective",
    "TrainConfig", "generator_gradient_estimate", "load_checkpoint",
    "run_counterexample", "save_checkpoint", "train",
]
