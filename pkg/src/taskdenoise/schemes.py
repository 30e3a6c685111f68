"""The four experiment schemes and their training procedures.

TC and TD train the application network directly on clean or dirty images.
HV trains a denoiser on (dirty, clean) pairs with pixel MSE. NNV trains a
denoiser through the frozen clean-trained application network, minimizing
the task loss of the composition. Evaluation corrupts the test set, routes
through the scheme's denoiser (if any), then the application network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics as metrics_mod
from .autodiff import Tape, Tensor, backward, cross_entropy_loss, mse_loss
from .data import CLASSIFICATION, SEGMENTATION, Sample
from .errors import InvalidCompositionError, InvalidShapeError, InvalidSpecError, TrainingDivergedError
from .metrics import MetricsReport
from .networks import Model, NetworkSpec
from .noise import NoiseSpec, apply_noise
from .optim import adam_step, make_adam_state
from .rng import Rng, derive_seed

TC, TD, HV, NNV = "tc", "td", "hv", "nnv"
SCHEME_KINDS = (TC, TD, HV, NNV)


@dataclass(frozen=True)
class Scheme:
    """One experiment scheme: routing plus the specs it needs."""

    kind: str
    application: NetworkSpec
    denoiser: NetworkSpec | None
    train_noise: NoiseSpec

    def validate(self) -> "Scheme":
        if self.kind not in SCHEME_KINDS:
            raise InvalidSpecError(f"unknown scheme kind {self.kind!r}")
        if self.kind in (HV, NNV) and self.denoiser is None:
            raise InvalidSpecError(f"scheme {self.kind} requires a denoiser spec")
        if self.kind in (TC, TD) and self.denoiser is not None:
            raise InvalidSpecError(f"scheme {self.kind} does not take a denoiser spec")
        return self


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 1e-3
    seed: int = 0
    checkpoint_cadence: int = 1
    validation_fraction: float = 0.1

    def validate(self) -> "TrainConfig":
        if self.epochs < 1:
            raise InvalidSpecError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidSpecError("learning_rate must be > 0")
        if self.checkpoint_cadence < 1:
            raise InvalidSpecError("checkpoint_cadence must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidSpecError("validation_fraction must be in [0, 1)")
        return self


@dataclass
class TrainResult:
    model: Model
    trace: list = field(default_factory=list)  # (epoch, train_loss, val_loss)
    best_epoch: int = 0
    best_val_loss: float = math.inf


def corrupt_samples(samples: list[Sample], noise_spec: NoiseSpec | None, split_label: str) -> list[Tensor]:
    """Dirty image per sample, with per-sample seeds derived from the spec seed."""
    if noise_spec is None:
        return [s.image for s in samples]
    out = []
    for i, s in enumerate(samples):
        per_sample = noise_spec.with_seed(derive_seed(noise_spec.seed, f"{split_label}/{i}"))
        out.append(apply_noise(s.image, per_sample))
    return out


def _target(sample: Sample):
    if sample.label_map is not None:
        return sample.label_map
    return np.asarray(sample.class_index)


def composed_task_loss(denoiser: Model | None, application: Model, image: Tensor, target, train_denoiser: bool = False) -> Tensor:
    """Task loss of the (denoiser -> application) composition as one expression.

    With ``denoiser=None`` the image feeds the application directly, so the
    composed loss is bit-identical to the application-only loss.
    """
    h = image if denoiser is None else denoiser.forward(image, train=train_denoiser)
    try:
        out = application.forward(h, train=False)
    except InvalidShapeError as exc:
        raise InvalidCompositionError(f"denoiser output does not fit the application network: {exc}") from exc
    return cross_entropy_loss(out, target)


# ---------------------------------------------------------------------------
# Shared training loop


def _snapshot(model: Model) -> tuple:
    params = [p.data.copy() for p in model.parameters()]
    stats = [(bn.stats.mean.copy(), bn.stats.var.copy()) for bn in model.batchnorm_layers()]
    return params, stats


def _restore(model: Model, snapshot: tuple) -> None:
    params, stats = snapshot
    for p, data in zip(model.parameters(), params):
        p.data = data.copy()
    for bn, (mean, var) in zip(model.batchnorm_layers(), stats):
        bn.stats.mean = mean.copy()
        bn.stats.var = var.copy()


def _run_training(model: Model, items: list, cfg: TrainConfig, step_loss, eval_loss) -> TrainResult:
    """Adam training over items with best-validation checkpoint selection.

    ``step_loss(item)`` builds the recorded training loss; ``eval_loss(item)``
    computes the selection loss without recording. A held-out tail of the
    items (validation_fraction) drives checkpoint selection; with no holdout
    the training loss is used instead.
    """
    cfg.validate()
    n_val = int(round(cfg.validation_fraction * len(items)))
    n_val = min(n_val, len(items) - 1)
    train_items = items[: len(items) - n_val]
    val_items = items[len(items) - n_val :]

    trainable = [p for p in model.parameters() if p.requires_grad]
    state = make_adam_state(trainable, lr=cfg.learning_rate)
    shuffle_rng = Rng(derive_seed(cfg.seed, "shuffle"))
    result = TrainResult(model=model)
    best = _snapshot(model)

    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_items))
        total = 0.0
        for step, idx in enumerate(order):
            with Tape() as tape:
                loss = step_loss(train_items[int(idx)])
                value = loss.item()
                if not math.isfinite(value):
                    raise TrainingDivergedError(epoch, step)
                grads = backward(loss, tape)
            adam_step(trainable, grads, state)
            total += value
        train_loss = total / max(1, len(train_items))
        if val_items and (epoch % cfg.checkpoint_cadence == 0 or epoch == cfg.epochs):
            val_loss = float(np.mean([eval_loss(item) for item in val_items]))
        elif val_items:
            val_loss = math.nan
        else:
            val_loss = train_loss
        result.trace.append((epoch, train_loss, val_loss))
        if math.isfinite(val_loss) and val_loss < result.best_val_loss:
            result.best_val_loss = val_loss
            result.best_epoch = epoch
            best = _snapshot(model)
    if result.best_epoch:
        _restore(model, best)
    return result


# ---------------------------------------------------------------------------
# Scheme training procedures


def train_application(model: Model, samples: list[Sample], cfg: TrainConfig, noise_spec: NoiseSpec | None = None) -> TrainResult:
    """Train a segmentation/classification network on clean or dirty images."""
    _check_task_match(model, samples)
    images = corrupt_samples(samples, noise_spec, "train")
    items = list(zip(images, [_target(s) for s in samples]))

    def step_loss(item):
        image, target = item
        return cross_entropy_loss(model.forward(image, train=True), target)

    def eval_loss(item):
        image, target = item
        return cross_entropy_loss(model.forward(image, train=False), target).item()

    return _run_training(model, items, cfg, step_loss, eval_loss)


def train_denoiser_hv(model: Model, samples: list[Sample], cfg: TrainConfig, noise_spec: NoiseSpec) -> TrainResult:
    """Train a denoiser on paired (dirty, clean) images with pixel MSE."""
    dirty = corrupt_samples(samples, noise_spec, "train")
    items = [(d, s.image) for d, s in zip(dirty, samples)]

    def step_loss(item):
        noisy, clean = item
        return mse_loss(model.forward(noisy, train=True), clean)

    def eval_loss(item):
        noisy, clean = item
        return mse_loss(model.forward(noisy, train=False), clean).item()

    return _run_training(model, items, cfg, step_loss, eval_loss)


def train_denoiser_nnv(
    model: Model, application: Model, samples: list[Sample], cfg: TrainConfig, noise_spec: NoiseSpec
) -> TrainResult:
    """Train a denoiser through the frozen application network's task loss.

    Only the denoiser parameters update; the application network's weights
    are bit-identical before and after.
    """
    _check_task_match(application, samples)
    dirty = corrupt_samples(samples, noise_spec, "train")
    items = list(zip(dirty, [_target(s) for s in samples]))
    application.set_trainable(False)
    try:

        def step_loss(item):
            noisy, target = item
            return composed_task_loss(model, application, noisy, target, train_denoiser=True)

        def eval_loss(item):
            noisy, target = item
            return composed_task_loss(model, application, noisy, target, train_denoiser=False).item()

        return _run_training(model, items, cfg, step_loss, eval_loss)
    finally:
        application.set_trainable(True)


def _check_task_match(model: Model, samples: list[Sample]) -> None:
    seg_model = model.kind == "nonewnet2d"
    if not samples:
        raise InvalidSpecError("empty sample list")
    seg_data = samples[0].label_map is not None
    if seg_model != seg_data:
        raise InvalidSpecError(
            f"dataset task does not match network kind {model.kind!r} "
            f"(samples have {'label maps' if seg_data else 'class indices'})"
        )


# ---------------------------------------------------------------------------
# Evaluation


def predict(application: Model, denoiser: Model | None, image: Tensor):
    """Route one image through the scheme and return the hard prediction."""
    h = image if denoiser is None else denoiser.forward(image, train=False)
    try:
        out = application.forward(h, train=False)
    except InvalidShapeError as exc:
        raise InvalidCompositionError(f"denoiser output does not fit the application network: {exc}") from exc
    if out.data.ndim == 3:
        return out.data.argmax(axis=0).astype(np.int32)
    return int(out.data.argmax())


def evaluate_scheme(
    application: Model,
    denoiser: Model | None,
    test_samples: list[Sample],
    test_noise: NoiseSpec | None,
) -> MetricsReport:
    """Corrupt the test set, route through the scheme, and report metrics."""
    images = corrupt_samples(test_samples, test_noise, "test")
    task = SEGMENTATION if test_samples[0].label_map is not None else CLASSIFICATION
    if task == SEGMENTATION:
        num_classes = application.spec.num_classes
        per_sample = []
        for image, sample in zip(images, test_samples):
            pred = predict(application, denoiser, image)
            per_sample.append(metrics_mod.evaluate_segmentation_sample(pred, sample.label_map, num_classes))
        return metrics_mod.segmentation_report(per_sample, num_classes)
    preds = [predict(application, denoiser, image) for image in images]
    truths = [s.class_index for s in test_samples]
    return metrics_mod.classification_report(preds, truths, application.spec.num_classes)


def denoise_images(denoiser: Model, images: list[Tensor]) -> list[Tensor]:
    return [denoiser.forward(img, train=False) for img in images]
