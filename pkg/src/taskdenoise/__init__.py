"""Task-guided image denoising experiments.

A denoising network can be trained two ways: against clean pixels (the
usual route) or through the loss of the downstream segmentation or
classification network it feeds. This package implements both, plus the
no-denoising baselines, on deterministic synthetic phantom data, with an
8x8 block-DCT toolkit for comparing what each kind of denoiser keeps.
"""

from .autodiff import Tape, Tensor, backward
from .config import ExperimentConfig, load_config, parse_config, serialize_config
from .data import DatasetSpec, Sample, generate_classification_dataset, generate_segmentation_dataset
from .dct import DctSpectrum, dct8_forward, dct8_inverse, frequency_gradient, spectrum_sd
from .metrics import MetricsReport, aggregate, dice, hausdorff, sensitivity, specificity, top1_accuracy
from .networks import (
    Model,
    NetworkSpec,
    build_ccnn,
    build_mcdncnn,
    build_network,
    build_nonewnet2d,
    build_redcnn,
    load_checkpoint,
    save_checkpoint,
)
from .noise import NoiseSpec, add_gaussian, add_poisson, apply_noise
from .optim import AdamState, adam_step, make_adam_state, xavier_uniform_init
from .rng import Rng, derive_seed
from .schemes import (
    Scheme,
    TrainConfig,
    composed_task_loss,
    evaluate_scheme,
    train_application,
    train_denoiser_hv,
    train_denoiser_nnv,
)

__version__ = "0.1.0"
