"""Embedding-level denoising diffusion for speaker-verification robustness."""

__version__ = "0.1.0"

from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    LabeledCorpus,
    SynthConfig,
    generate_corpus,
    read_embedding_file,
    write_embedding_file,
)
from .errors import ConfigError, DataError, NumericError, SeedError
from .inference import InferenceConfig, enhance, enhance_ensemble
from .network import ModelParams, init_params, model_backward, model_forward
from .schedule import (
    NoiseSchedule,
    ddim_step,
    eps_from_x0,
    forward_diffuse,
    make_scaled_linear_schedule,
    x0_from_eps,
)
from .scoring import DcfParams, ScoreSet, compute_eer, compute_min_dcf, cosine_score, score_trials
from .training import OptimizerState, PairGroup, TrainConfig, optimizer_step, seed_loss, train
