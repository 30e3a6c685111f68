"""8x8 block DCT frequency analysis.

An image is split into non-overlapping 8x8 blocks and each block is
projected onto the orthonormal type-II DCT basis. The per-component
standard deviation across blocks is an energy fingerprint of the image;
the frequency-gradient map weights each block's coefficients by the
magnitude of the model's pixel gradients in that block, measuring how much
each frequency component contributes to the model's output.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Tensor
from .errors import InvalidShapeError
from .tensorio import write_pgm

BLOCK = 8


def _basis_matrix() -> np.ndarray:
    """Orthonormal DCT-II matrix: row u is the frequency-u basis vector."""
    mat = np.zeros((BLOCK, BLOCK), dtype=np.float64)
    for u in range(BLOCK):
        scale = math.sqrt(1.0 / BLOCK) if u == 0 else math.sqrt(2.0 / BLOCK)
        for x in range(BLOCK):
            mat[u, x] = scale * math.cos(math.pi * (2 * x + 1) * u / (2 * BLOCK))
    return mat


_DCT = _basis_matrix()


def dct8_forward(block: np.ndarray) -> np.ndarray:
    """Orthonormal 2-d DCT-II of one 8x8 block."""
    block = np.asarray(block, dtype=np.float64)
    if block.shape != (BLOCK, BLOCK):
        raise InvalidShapeError(f"expected an 8x8 block, got shape {block.shape}")
    return _DCT @ block @ _DCT.T


def dct8_inverse(coeffs: np.ndarray) -> np.ndarray:
    """Inverse (type-III) transform; exact inverse of dct8_forward."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (BLOCK, BLOCK):
        raise InvalidShapeError(f"expected an 8x8 coefficient block, got shape {coeffs.shape}")
    return _DCT.T @ coeffs @ _DCT


def basis_block(i: int, j: int) -> np.ndarray:
    """The (i, j) spatial basis function as an 8x8 image."""
    impulse = np.zeros((BLOCK, BLOCK))
    impulse[i, j] = 1.0
    return dct8_inverse(impulse)


@dataclass
class DctSpectrum:
    """Per-component standard deviation across all blocks of an image."""

    sd: np.ndarray  # [8, 8], component (i, j)
    block_count: int


def _to_2d(image) -> np.ndarray:
    arr = image.data if isinstance(image, Tensor) else np.asarray(image)
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[0] == 1:
        arr = arr[0]
    if arr.ndim != 2:
        raise InvalidShapeError(f"expected a 2-d image, got shape {arr.shape}")
    return arr


def _pad_to_blocks(img: np.ndarray) -> np.ndarray:
    m, n = img.shape
    pm = (-m) % BLOCK
    pn = (-n) % BLOCK
    if pm or pn:
        img = np.pad(img, ((0, pm), (0, pn)), mode="edge")
    return img


def block_coefficients(image) -> np.ndarray:
    """DCT coefficients of every non-overlapping 8x8 block: [nblocks, 8, 8]."""
    img = _pad_to_blocks(_to_2d(image))
    m, n = img.shape
    blocks = img.reshape(m // BLOCK, BLOCK, n // BLOCK, BLOCK).transpose(0, 2, 1, 3).reshape(-1, BLOCK, BLOCK)
    return np.einsum("ux,bxy,vy->buv", _DCT, blocks, _DCT, optimize=True)


def spectrum_sd(image) -> DctSpectrum:
    """Standard deviation of each frequency component across blocks."""
    coeffs = block_coefficients(image)
    mean = coeffs.mean(axis=0)
    sd = np.sqrt(((coeffs - mean) ** 2).mean(axis=0))
    return DctSpectrum(sd=sd, block_count=coeffs.shape[0])


def high_frequency_mean(spectrum: DctSpectrum, count: int = 32) -> float:
    """Mean SD over the `count` highest-frequency components (by i^2+j^2, descending)."""
    order = sorted(
        ((i, j) for i in range(BLOCK) for j in range(BLOCK)),
        key=lambda ij: (-(ij[0] ** 2 + ij[1] ** 2), ij),
    )
    values = [spectrum.sd[i, j] for i, j in order[:count]]
    return float(np.mean(values))


def frequency_gradient(loss_head: Callable[[Tensor], Tensor], image) -> np.ndarray:
    """8x8 importance grid: mean over pixels of |pixel gradient * block coefficient|.

    ``loss_head`` maps an image tensor [1, m, n] to a scalar; its input
    gradient is obtained with one backward pass and combined with each
    block's DCT coefficients.
    """
    img = _to_2d(image)
    m, n = img.shape
    if m % BLOCK or n % BLOCK:
        raise InvalidShapeError(f"image extents {m}x{n} must be multiples of {BLOCK} for gradient analysis")
    x = Tensor(img[None].astype(np.float32), requires_grad=True)
    with Tape() as tape:
        out = loss_head(x)
        grads = ad.backward(out, tape)
    pixel_grad = grads.get(x)
    if pixel_grad is None:
        return np.zeros((BLOCK, BLOCK))
    g = np.abs(pixel_grad.astype(np.float64)[0])
    coeffs = block_coefficients(img)
    # mean |gradient| per block, times |coefficient| per component, averaged over blocks
    gm = g.reshape(m // BLOCK, BLOCK, n // BLOCK, BLOCK).transpose(0, 2, 1, 3).reshape(-1, BLOCK * BLOCK)
    block_gmean = gm.mean(axis=1)
    return (np.abs(coeffs) * block_gmean[:, None, None]).mean(axis=0)


def sum_head(model, train: bool = False) -> Callable[[Tensor], Tensor]:
    """Scalar head: sum of all model outputs (gradient analysis default)."""

    def head(x: Tensor) -> Tensor:
        return ad.tsum(model.forward(x, train))

    return head


def export_heatmap(spectrum_or_grid, path_base) -> tuple[Path, Path]:
    """Write a 64-value CSV (row-major (i, j)) and a normalized 8x8 PGM."""
    grid = spectrum_or_grid.sd if isinstance(spectrum_or_grid, DctSpectrum) else np.asarray(spectrum_or_grid)
    if grid.shape != (BLOCK, BLOCK):
        raise InvalidShapeError(f"expected an 8x8 grid, got {grid.shape}")
    base = Path(path_base)
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path = base.parent / (base.name + ".csv")
    pgm_path = base.parent / (base.name + ".pgm")
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        for i in range(BLOCK):
            for j in range(BLOCK):
                writer.writerow([i, j, f"{grid[i, j]:.6g}"])
    write_pgm(pgm_path, grid, normalize=True)
    return csv_path, pgm_path
