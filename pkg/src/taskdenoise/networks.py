"""Constructors for the four network recipes at configurable width.

Two denoisers (residual encoder-decoder, residual conv stack with batch
norm), a U-Net style segmentation network, and a small classification CNN,
all expressed over the autodiff op set. Convolutions are 3x3 with padding 1
unless a layer is a 1x1 projection; widths default to desk scale.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import RunningStats, Tensor
from .errors import CheckpointError, InvalidShapeError, InvalidSpecError
from .optim import xavier_uniform_init
from .rng import derive_seed
from .tensorio import read_tensor, write_tensor

REDCNN = "redcnn"
MCDNCNN = "mcdncnn"
NONEWNET2D = "nonewnet2d"
CCNN = "ccnn"

DENOISER_KINDS = (REDCNN, MCDNCNN)
APPLICATION_KINDS = (NONEWNET2D, CCNN)
ALL_KINDS = DENOISER_KINDS + APPLICATION_KINDS


@dataclass
class NetworkSpec:
    """Everything needed to rebuild a network bit-identically."""

    kind: str
    base_channels: int = 8
    num_classes: int = 2
    height: int = 64
    width: int = 64
    seed: int = 0
    depth: int = 3  # encoder stages; used by the U-Net kind only
    input_residual: bool = False  # redcnn variant: add the input to the output

    def validate(self) -> "NetworkSpec":
        if self.kind not in ALL_KINDS:
            raise InvalidSpecError(f"unknown network kind {self.kind!r}; expected one of {ALL_KINDS}")
        if self.base_channels < 1:
            raise InvalidSpecError("base_channels must be >= 1")
        if self.kind in APPLICATION_KINDS and self.num_classes < 2:
            raise InvalidSpecError(f"{self.kind} requires num_classes >= 2")
        if self.kind == NONEWNET2D and self.depth < 1:
            raise InvalidSpecError("depth must be >= 1")
        if self.height < 1 or self.width < 1:
            raise InvalidSpecError("input extents must be positive")
        return self


class _Conv:
    def __init__(self, name: str, cin: int, cout: int, seed: int, kernel: int = 3, stride: int = 1, padding: int = 1):
        self.name = name
        self.stride = stride
        self.padding = padding
        self.weight = xavier_uniform_init((cout, cin, kernel, kernel), derive_seed(seed, f"{name}.weight"))
        self.weight.requires_grad = True
        self.bias = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def named_parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


class _TConv:
    def __init__(self, name: str, cin: int, cout: int, seed: int, kernel: int = 3, stride: int = 1, padding: int = 1):
        self.name = name
        self.stride = stride
        self.padding = padding
        self.weight = xavier_uniform_init((cin, cout, kernel, kernel), derive_seed(seed, f"{name}.weight"))
        self.weight.requires_grad = True
        self.bias = Tensor(np.zeros(cout, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.transpose_conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def named_parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


class _BatchNorm:
    def __init__(self, name: str, channels: int):
        self.name = name
        self.gamma = Tensor(np.ones(channels, dtype=np.float32), requires_grad=True)
        self.beta = Tensor(np.zeros(channels, dtype=np.float32), requires_grad=True)
        self.stats = RunningStats.create(channels)

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return ad.batchnorm2d(x, self.gamma, self.beta, self.stats, train)

    def named_parameters(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]


class _Linear:
    def __init__(self, name: str, fin: int, fout: int, seed: int):
        self.name = name
        self.weight = xavier_uniform_init((fout, fin), derive_seed(seed, f"{name}.weight"))
        self.weight.requires_grad = True
        self.bias = Tensor(np.zeros(fout, dtype=np.float32), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.weight, self.bias)

    def named_parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


class Model:
    """Base: an ordered list of parameterized layers plus a forward pass."""

    kind = ""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self._layers: list = []

    def _register(self, layer):
        self._layers.append(layer)
        return layer

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor, train: bool = False) -> Tensor:
        return self.forward(x, train)

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = []
        for layer in self._layers:
            out.extend(layer.named_parameters())
        return out

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def batchnorm_layers(self) -> list[_BatchNorm]:
        return [layer for layer in self._layers if isinstance(layer, _BatchNorm)]

    def set_trainable(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def _check_input(self, x: Tensor) -> None:
        if x.data.ndim != 3 or x.shape[0] != 1:
            raise InvalidShapeError(f"{self.kind} expects input [1, m, n], got {x.shape}")


class RedCnn(Model):
    """Residual encoder-decoder denoiser: five convolutions, five
    transposed convolutions, with encoder activations added back at the
    symmetric decoder positions. Final layer is linear; the input_residual
    variant adds the input image to the output, so the stack predicts a
    correction instead of reconstructing the image."""

    kind = REDCNN

    def __init__(self, spec: NetworkSpec):
        super().__init__(spec)
        c = spec.base_channels
        s = spec.seed
        self.conv1 = self._register(_Conv("conv1", 1, c, s))
        self.conv2 = self._register(_Conv("conv2", c, c, s))
        self.conv3 = self._register(_Conv("conv3", c, c, s))
        self.conv4 = self._register(_Conv("conv4", c, c, s))
        self.conv5 = self._register(_Conv("conv5", c, c, s))
        self.deconv1 = self._register(_TConv("deconv1", c, c, s))
        self.deconv2 = self._register(_TConv("deconv2", c, c, s))
        self.deconv3 = self._register(_TConv("deconv3", c, c, s))
        self.deconv4 = self._register(_TConv("deconv4", c, c, s))
        self.deconv5 = self._register(_TConv("deconv5", c, 1, s))

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        self._check_input(x)
        h1 = ad.relu(self.conv1(x))
        h2 = ad.relu(self.conv2(h1))
        h3 = ad.relu(self.conv3(h2))
        h4 = ad.relu(self.conv4(h3))
        h5 = ad.relu(self.conv5(h4))
        u = ad.relu(ad.add(self.deconv1(h5), h4))
        u = ad.relu(self.deconv2(u))
        u = ad.relu(ad.add(self.deconv3(u), h2))
        u = ad.relu(self.deconv4(u))
        out = self.deconv5(u)
        if self.spec.input_residual:
            out = ad.add(out, x)
        return out


class McDnCnn(Model):
    """Residual denoiser: conv+relu, seven conv+batchnorm+relu blocks, and a
    final convolution predicting the noise, subtracted from the input."""

    kind = MCDNCNN

    def __init__(self, spec: NetworkSpec):
        super().__init__(spec)
        c = spec.base_channels
        s = spec.seed
        self.conv_in = self._register(_Conv("conv1", 1, c, s))
        self.blocks = []
        for i in range(7):
            conv = self._register(_Conv(f"conv{i + 2}", c, c, s))
            bn = self._register(_BatchNorm(f"bn{i + 2}", c))
            self.blocks.append((conv, bn))
        self.conv_out = self._register(_Conv("conv9", c, 1, s))

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        self._check_input(x)
        h = ad.relu(self.conv_in(x))
        for conv, bn in self.blocks:
            h = ad.relu(bn(conv(h), train))
        residual = self.conv_out(h)
        return ad.sub(x, residual)


class NoNewNet2d(Model):
    """U-Net: encoder stages of two conv+relu then 2x max-pool downsampling,
    a two-conv bottleneck, and a mirrored decoder with transposed-conv
    upsampling and skip concatenation. Final 1x1 projection to k channels."""

    kind = NONEWNET2D

    def __init__(self, spec: NetworkSpec):
        super().__init__(spec)
        base, d, s = spec.base_channels, spec.depth, spec.seed
        widths = [base * (2**i) for i in range(d)]
        self.enc = []
        cin = 1
        for i, w in enumerate(widths):
            a = self._register(_Conv(f"enc{i}a", cin, w, s))
            b = self._register(_Conv(f"enc{i}b", w, w, s))
            self.enc.append((a, b))
            cin = w
        bott = base * (2**d)
        self.bott_a = self._register(_Conv("bottlenecka", cin, bott, s))
        self.bott_b = self._register(_Conv("bottleneckb", bott, bott, s))
        self.dec = []
        prev = bott
        for i in reversed(range(d)):
            w = widths[i]
            up = self._register(_TConv(f"up{i}", prev, w, s, kernel=2, stride=2, padding=0))
            a = self._register(_Conv(f"dec{i}a", 2 * w, w, s))
            b = self._register(_Conv(f"dec{i}b", w, w, s))
            self.dec.append((i, up, a, b))
            prev = w
        self.head = self._register(_Conv("head", base, spec.num_classes, s, kernel=1, padding=0))

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        self._check_input(x)
        _, m, n = x.shape
        factor = 2**self.spec.depth
        if m % factor or n % factor:
            raise InvalidShapeError(f"input extents {m}x{n} must be divisible by {factor}")
        skips = []
        h = x
        for a, b in self.enc:
            h = ad.relu(a(h))
            h = ad.relu(b(h))
            skips.append(h)
            h = ad.maxpool2d(h, 2, 2)
        h = ad.relu(self.bott_a(h))
        h = ad.relu(self.bott_b(h))
        for i, up, a, b in self.dec:
            h = up(h)
            h = ad.concat_channels(skips[i], h)
            h = ad.relu(a(h))
            h = ad.relu(b(h))
        return self.head(h)


class Ccnn(Model):
    """Classification CNN: four conv+relu+maxpool blocks, then one fully
    connected layer to k logits. Input extents are fixed by the spec."""

    kind = CCNN

    BLOCKS = 4

    def __init__(self, spec: NetworkSpec):
        super().__init__(spec)
        if spec.height % 16 or spec.width % 16:
            raise InvalidSpecError(f"ccnn input extents {spec.height}x{spec.width} must be divisible by 16")
        base, s = spec.base_channels, spec.seed
        self.convs = []
        cin = 1
        for i in range(self.BLOCKS):
            w = base * (2**i)
            self.convs.append(self._register(_Conv(f"conv{i + 1}", cin, w, s)))
            cin = w
        feat = cin * (spec.height // 16) * (spec.width // 16)
        self.fc = self._register(_Linear("fc", feat, spec.num_classes, s))

    def forward(self, x: Tensor, train: bool = False) -> Tensor:
        self._check_input(x)
        if x.shape[1] != self.spec.height or x.shape[2] != self.spec.width:
            raise InvalidShapeError(
                f"ccnn was built for {self.spec.height}x{self.spec.width}, got {x.shape[1]}x{x.shape[2]}"
            )
        h = x
        for conv in self.convs:
            h = ad.maxpool2d(ad.relu(conv(h)), 2, 2)
        return self.fc(ad.flatten(h))


_BUILDERS = {REDCNN: RedCnn, MCDNCNN: McDnCnn, NONEWNET2D: NoNewNet2d, CCNN: Ccnn}


def build_network(spec: NetworkSpec) -> Model:
    spec.validate()
    return _BUILDERS[spec.kind](spec)


def build_redcnn(spec: NetworkSpec) -> RedCnn:
    spec.validate()
    return RedCnn(spec)


def build_mcdncnn(spec: NetworkSpec) -> McDnCnn:
    spec.validate()
    return McDnCnn(spec)


def build_nonewnet2d(spec: NetworkSpec) -> NoNewNet2d:
    spec.validate()
    return NoNewNet2d(spec)


def build_ccnn(spec: NetworkSpec) -> Ccnn:
    spec.validate()
    return Ccnn(spec)


def forward(model: Model, x: Tensor, train: bool = False) -> Tensor:
    return model.forward(x, train)


# ---------------------------------------------------------------------------
# Checkpoints: a manifest plus one TSR1 blob per parameter / stat array

_MANIFEST = "manifest.json"


def save_checkpoint(model: Model, directory, epoch: int = 0) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {"format": "taskdenoise-checkpoint-v1", "epoch": epoch, "spec": asdict(model.spec)}
    (directory / _MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for name, p in model.named_parameters():
        write_tensor(directory / f"{name}.tsr1", p.data)
    for bn in model.batchnorm_layers():
        write_tensor(directory / f"{bn.name}.running_mean.tsr1", bn.stats.mean)
        write_tensor(directory / f"{bn.name}.running_var.tsr1", bn.stats.var)


def load_checkpoint(directory) -> tuple[Model, int]:
    directory = Path(directory)
    manifest_path = directory / _MANIFEST
    if not manifest_path.is_file():
        raise CheckpointError(f"no checkpoint manifest at {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
        spec = NetworkSpec(**manifest["spec"])
        epoch = int(manifest["epoch"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint manifest at {manifest_path}: {exc}") from exc
    model = build_network(spec)
    for name, p in model.named_parameters():
        path = directory / f"{name}.tsr1"
        if not path.is_file():
            raise CheckpointError(f"checkpoint is missing parameter file {path}")
        data = read_tensor(path)
        if data.shape != p.shape:
            raise CheckpointError(f"{path}: shape {data.shape} does not match expected {p.shape}")
        p.data = data
    for bn in model.batchnorm_layers():
        for stat in ("running_mean", "running_var"):
            path = directory / f"{bn.name}.{stat}.tsr1"
            if not path.is_file():
                raise CheckpointError(f"checkpoint is missing state file {path}")
            setattr(bn.stats, stat.removeprefix("running_"), read_tensor(path))
    return model, epoch


def parameter_checksum(model: Model) -> bytes:
    """Order-sensitive digest of all parameter bytes (freeze verification)."""
    import hashlib

    h = hashlib.sha256()
    for name, p in model.named_parameters():
        h.update(name.encode())
        h.update(p.data.tobytes())
    for bn in model.batchnorm_layers():
        h.update(bn.stats.mean.tobytes())
        h.update(bn.stats.var.tobytes())
    return h.digest()
