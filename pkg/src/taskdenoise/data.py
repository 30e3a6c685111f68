"""Deterministic synthetic phantom datasets with exact labels.

Images are [0, 255] float32 grids containing smooth-edged geometric
structures (filled ellipses, annuli, striped ellipses) on a textured
background. Structure intensity ranges overlap across classes on purpose:
pixel intensity alone cannot separate classes, shape and texture can.

Segmentation samples carry a per-pixel label map (0 = background);
classification samples carry a class index encoded in structure morphology
(compact blob / multiple foci / ring), not in global intensity statistics.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .errors import FormatError, InvalidSpecError
from .rng import Rng, derive_seed
from .tensorio import read_tensor, write_pgm, write_tensor

SEGMENTATION = "segmentation"
CLASSIFICATION = "classification"

_ARCH_FILLED, _ARCH_ANNULUS, _ARCH_STRIPED = 0, 1, 2


@dataclass(frozen=True)
class DatasetSpec:
    task: str = SEGMENTATION
    height: int = 64
    width: int = 64
    num_classes: int = 4
    train_count: int = 200
    test_count: int = 50
    seed: int = 0

    def validate(self) -> "DatasetSpec":
        if self.task not in (SEGMENTATION, CLASSIFICATION):
            raise InvalidSpecError(f"unknown task {self.task!r}")
        if self.num_classes < 2:
            raise InvalidSpecError("num_classes must be >= 2")
        if self.task == CLASSIFICATION and self.num_classes > 3:
            raise InvalidSpecError("classification morphologies are defined for 2 or 3 classes")
        if self.height < 16 or self.width < 16:
            raise InvalidSpecError("extents must be >= 16")
        if self.train_count < 1 or self.test_count < 1:
            raise InvalidSpecError("train_count and test_count must be >= 1")
        return self


@dataclass
class Sample:
    """One image with either a label map (segmentation) or a class index."""

    image: Tensor
    label_map: np.ndarray | None = None
    class_index: int | None = None


@dataclass
class _Structure:
    cy: float
    cx: float
    ra: float  # radius along the rotated y axis
    rb: float
    angle: float

    @property
    def rmax(self) -> float:
        return max(self.ra, self.rb)

    def radius_field(self, m: int, n: int) -> np.ndarray:
        """Normalized elliptical radius per pixel (1.0 on the boundary)."""
        yy, xx = np.ogrid[0:m, 0:n]
        dy = yy - self.cy
        dx = xx - self.cx
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = (c * dy + s * dx) / self.ra
        v = (-s * dy + c * dx) / self.rb
        return np.sqrt(u * u + v * v)


_EDGE_WIDTH = 2.5  # px, soft intensity falloff at structure boundaries


def _soft_inside(dist_px: np.ndarray) -> np.ndarray:
    """Blend weight from a signed pixel distance (positive inside)."""
    return np.clip(0.5 + dist_px / _EDGE_WIDTH, 0.0, 1.0)


def _background(rng: Rng, m: int, n: int) -> np.ndarray:
    base = 25.0 + 30.0 * float(rng.uniform(1)[0])
    yy, xx = np.ogrid[0:m, 0:n]
    field = np.full((m, n), base, dtype=np.float64)
    for _ in range(2):
        amp = 4.0 + 5.0 * float(rng.uniform(1)[0])
        wavelength = 20.0 + 30.0 * float(rng.uniform(1)[0])
        theta = 2.0 * math.pi * float(rng.uniform(1)[0])
        phase = 2.0 * math.pi * float(rng.uniform(1)[0])
        k = 2.0 * math.pi / wavelength
        field = field + amp * np.sin(k * (math.cos(theta) * yy + math.sin(theta) * xx) + phase)
    field = field + rng.gaussian(m * n, 0.0, 3.0).reshape(m, n)
    return field


def _place(rng: Rng, m: int, n: int, placed: list[_Structure], rmax: float) -> _Structure | None:
    for _ in range(50):
        margin = rmax + 2.0
        cy = margin + (m - 2 * margin) * float(rng.uniform(1)[0])
        cx = margin + (n - 2 * margin) * float(rng.uniform(1)[0])
        if all(math.hypot(cy - p.cy, cx - p.cx) >= rmax + p.rmax + 3.0 for p in placed):
            ecc = 1.0 + 1.0 * float(rng.uniform(1)[0])
            rb = rmax / ecc
            angle = math.pi * float(rng.uniform(1)[0])
            return _Structure(cy, cx, rmax, rb, angle)
    return None


def _intensity_range(class_id: int) -> tuple[float, float]:
    lo = 80.0 + 25.0 * ((class_id - 1) % 6)
    return lo, lo + 90.0


def _render_structure(
    rng: Rng, image: np.ndarray, labels: np.ndarray | None, struct: _Structure, class_id: int, archetype: int
) -> None:
    m, n = image.shape
    r = struct.radius_field(m, n)
    rmin = min(struct.ra, struct.rb)
    lo, hi = _intensity_range(class_id)
    value = lo + (hi - lo) * float(rng.uniform(1)[0])
    fill = np.full((m, n), value, dtype=np.float64)
    if archetype == _ARCH_STRIPED:
        period = 4.0 + 3.0 * float(rng.uniform(1)[0])
        theta = math.pi * float(rng.uniform(1)[0])
        phase = 2.0 * math.pi * float(rng.uniform(1)[0])
        yy, xx = np.ogrid[0:m, 0:n]
        k = 2.0 * math.pi / period
        fill = fill + 30.0 * np.sin(k * (math.cos(theta) * yy + math.sin(theta) * xx) + phase)
    if archetype == _ARCH_ANNULUS:
        q = 0.45 + 0.15 * float(rng.uniform(1)[0])
        weight = np.minimum(_soft_inside((1.0 - r) * rmin), _soft_inside((r - q) * rmin))
        member = (r <= 1.0) & (r >= q)
    else:
        weight = _soft_inside((1.0 - r) * rmin)
        member = r <= 1.0
    np.copyto(image, image * (1.0 - weight) + fill * weight)
    if labels is not None:
        labels[member] = class_id


def _segmentation_sample(spec: DatasetSpec, rng: Rng, force_class: int) -> Sample:
    m, n = spec.height, spec.width
    k = spec.num_classes
    image = _background(rng, m, n)
    labels = np.zeros((m, n), dtype=np.int32)
    count = 1 + int(rng.uniform(1)[0] * (k - 1))
    count = min(count, k - 1)
    placed: list[_Structure] = []
    scale = min(m, n)
    for j in range(count):
        class_id = force_class if j == 0 else 1 + int(rng.uniform(1)[0] * (k - 1))
        rmax = (0.09 + 0.10 * float(rng.uniform(1)[0])) * scale
        struct = _place(rng, m, n, placed, rmax)
        if struct is None:
            continue
        placed.append(struct)
        _render_structure(rng, image, labels, struct, class_id, (class_id - 1) % 3)
    image = np.clip(image, 0.0, 255.0)
    return Sample(image=Tensor(image[None].astype(np.float32)), label_map=labels)


def _classification_sample(spec: DatasetSpec, rng: Rng, class_id: int) -> Sample:
    m, n = spec.height, spec.width
    image = _background(rng, m, n)
    scale = (min(m, n) / 64.0) ** 2
    total_area = (120.0 + 140.0 * float(rng.uniform(1)[0])) * scale
    placed: list[_Structure] = []
    value_lo, value_hi = 100.0, 200.0

    def render(struct: _Structure, archetype: int, value: float) -> None:
        r = struct.radius_field(m, n)
        rmin = min(struct.ra, struct.rb)
        if archetype == _ARCH_ANNULUS:
            q = 0.45 + 0.15 * float(rng.uniform(1)[0])
            weight = np.minimum(_soft_inside((1.0 - r) * rmin), _soft_inside((r - q) * rmin))
        else:
            weight = _soft_inside((1.0 - r) * rmin)
        np.copyto(image, image * (1.0 - weight) + value * weight)

    value = value_lo + (value_hi - value_lo) * float(rng.uniform(1)[0])
    if class_id == 0:
        # one compact blob
        ecc = 1.0 + 0.3 * float(rng.uniform(1)[0])
        rb = math.sqrt(total_area / (math.pi * ecc))
        struct = _place(rng, m, n, placed, ecc * rb)
        if struct is not None:
            struct.rb = rb
            render(struct, _ARCH_FILLED, value)
    elif class_id == 1:
        # several small foci with the same total area
        foci = 2 + int(rng.uniform(1)[0] * 2)
        for _ in range(foci):
            area = total_area / foci
            ecc = 1.2 + 1.0 * float(rng.uniform(1)[0])
            rb = math.sqrt(area / (math.pi * ecc))
            struct = _place(rng, m, n, placed, ecc * rb)
            if struct is None:
                continue
            struct.rb = rb
            placed.append(struct)
            render(struct, _ARCH_FILLED, value)
    else:
        # a ring whose annular area matches the blob area distribution
        q = 0.5
        ecc = 1.0 + 0.3 * float(rng.uniform(1)[0])
        rb = math.sqrt(total_area / (math.pi * ecc * (1.0 - q * q)))
        struct = _place(rng, m, n, placed, ecc * rb)
        if struct is not None:
            struct.rb = rb
            render(struct, _ARCH_ANNULUS, value)
    image = np.clip(image, 0.0, 255.0)
    return Sample(image=Tensor(image[None].astype(np.float32)), class_index=class_id)


def _generate_split(spec: DatasetSpec, split: str, count: int) -> list[Sample]:
    samples = []
    k = spec.num_classes
    for i in range(count):
        rng = Rng(derive_seed(spec.seed, f"{split}/{i}"))
        if spec.task == SEGMENTATION:
            samples.append(_segmentation_sample(spec, rng, force_class=1 + i % (k - 1)))
        else:
            samples.append(_classification_sample(spec, rng, class_id=i % k))
    return samples


def generate_segmentation_dataset(spec: DatasetSpec) -> tuple[list[Sample], list[Sample]]:
    spec.validate()
    if spec.task != SEGMENTATION:
        raise InvalidSpecError("spec.task must be segmentation")
    return _generate_split(spec, "train", spec.train_count), _generate_split(spec, "test", spec.test_count)


def generate_classification_dataset(spec: DatasetSpec) -> tuple[list[Sample], list[Sample]]:
    spec.validate()
    if spec.task != CLASSIFICATION:
        raise InvalidSpecError("spec.task must be classification")
    return _generate_split(spec, "train", spec.train_count), _generate_split(spec, "test", spec.test_count)


def generate_dataset(spec: DatasetSpec) -> tuple[list[Sample], list[Sample]]:
    if spec.task == SEGMENTATION:
        return generate_segmentation_dataset(spec)
    return generate_classification_dataset(spec)


# ---------------------------------------------------------------------------
# Sample and dataset I/O


def save_sample(sample: Sample, directory, stem: str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_tensor(directory / f"{stem}.img.tsr1", sample.image.data)
    if sample.label_map is not None:
        write_tensor(directory / f"{stem}.lbl.tsr1", sample.label_map.astype(np.float32))
    if sample.class_index is not None:
        (directory / f"{stem}.cls").write_text(f"{sample.class_index}\n")


def load_sample(directory, stem: str) -> Sample:
    directory = Path(directory)
    img_path = directory / f"{stem}.img.tsr1"
    if not img_path.is_file():
        raise FormatError(img_path, 0, "missing image tensor")
    image = Tensor(read_tensor(img_path))
    lbl_path = directory / f"{stem}.lbl.tsr1"
    cls_path = directory / f"{stem}.cls"
    label_map = None
    class_index = None
    if lbl_path.is_file():
        label_map = np.rint(read_tensor(lbl_path)).astype(np.int32)
    if cls_path.is_file():
        try:
            class_index = int(cls_path.read_text().strip())
        except ValueError as exc:
            raise FormatError(cls_path, 0, f"class index is not an integer: {exc}") from exc
    if label_map is None and class_index is None:
        raise FormatError(directory / stem, 0, "sample has neither label map nor class file")
    return Sample(image=image, label_map=label_map, class_index=class_index)


def save_dataset(spec: DatasetSpec, train: list[Sample], test: list[Sample], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "manifest.json").write_text(json.dumps(asdict(spec), indent=2, sort_keys=True) + "\n")
    for split, samples in (("train", train), ("test", test)):
        for i, sample in enumerate(samples):
            save_sample(sample, directory / split, f"{i:04d}")


def load_dataset(directory) -> tuple[DatasetSpec, list[Sample], list[Sample]]:
    directory = Path(directory)
    manifest = directory / "manifest.json"
    if not manifest.is_file():
        raise FormatError(manifest, 0, "missing dataset manifest")
    try:
        spec = DatasetSpec(**json.loads(manifest.read_text())).validate()
    except (TypeError, ValueError) as exc:
        raise FormatError(manifest, 0, f"malformed manifest: {exc}") from exc
    splits = []
    for split, count in (("train", spec.train_count), ("test", spec.test_count)):
        samples = [load_sample(directory / split, f"{i:04d}") for i in range(count)]
        splits.append(samples)
    return spec, splits[0], splits[1]


def export_sample_pgm(sample: Sample, path) -> None:
    """Write the image (and label map, if any) as PGM for quick inspection."""
    path = Path(path)
    write_pgm(path, sample.image.data[0])
    if sample.label_map is not None:
        lab = sample.label_map.astype(np.float64)
        write_pgm(path.with_suffix(".labels.pgm"), lab, normalize=True)
