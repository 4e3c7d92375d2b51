"""Generative risk minimization for out-of-distribution learning on graphs.

A variational generator turns each input graph into a same-sized graph with
continuous edge weights and generated features; a GCN classifier is trained on
the generated graph. Training combines cross-entropy, a KL regularizer
toward a Gaussian/Bernoulli prior, and a term pulling latents toward a
domain representation built from influential nodes.
"""

from .bundle import BundleError, read_bundle, write_bundle
from .domain import (DomainSelection, domain_representation, domain_selection, path_stats,
                     select_influential)
from .experiment import (ExperimentConfig, MetricReport, TrainingError, complexity_smoke,
                         evaluate, load_trained, run_ablation, run_bias_sweep, run_experiment,
                         save_trained, train)
from .generator import GeneratedSubgraph, LatentState, add_generator, generate
from .graph import (DomainedDataset, DomainedExample, Graph, GraphValidationError,
                    ego_network, normalized_adjacency, validate)
from .losses import LossBreakdown, LossConfig, total_loss
from .params import AdamConfig, ParamStore, adam_step, fd_check, load_checkpoint, save_checkpoint
from .synth import MixShiftConfig, MotifConfig, generate_mix_shift, generate_sp_motif

__version__ = "0.1.0"
