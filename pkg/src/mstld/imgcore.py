"""Images, overlapping patches, noise injection, quality metrics and file I/O.

Images are plain 2-D ``float64`` numpy arrays indexed ``[row, col]``. Values
are not clamped anywhere in processing; only :func:`write_image` rounds and
clips to 8 bits.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import kernels

PEAK = 255.0


class DimensionError(ValueError):
    """Raised when array shapes are incompatible with an operation."""


def as_image(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise DimensionError(f"expected a non-empty 2-D image, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains NaN or Inf")
    return a


@dataclass
class PatchMatrix:
    """Mean-removed, column-vectorised p x p patches of an image.

    Column ``j`` holds the patch whose top-left corner is ``origins[j]``,
    vectorised column-major (down the first patch column, then the next).
    Origins run row-major over the image with stride 1.
    """

    p: int
    shape: tuple[int, int]
    columns: np.ndarray
    means: np.ndarray
    origins: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.p * self.p

    @property
    def count(self) -> int:
        return self.columns.shape[1]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


@dataclass
class DenoiseReport:
    method: str
    psnr: float
    ssim: float
    runtime: float


def extract_patches(img, p: int) -> PatchMatrix:
    img = as_image(img)
    h, w = img.shape
    if p < 1 or p > min(h, w):
        raise DimensionError(f"patch size {p} does not fit a {h}x{w} image")
    win = np.lib.stride_tricks.sliding_window_view(img, (p, p))
    # (oy, ox, r, c) -> (c, r, oy, ox): column-major inside, row-major origins
    cols = np.array(win.transpose(3, 2, 0, 1), dtype=np.float64, order="C").reshape(p * p, -1)
    means = cols.mean(axis=0)
    cols -= means
    oy, ox = np.mgrid[0:h - p + 1, 0:w - p + 1]
    origins = np.column_stack([oy.ravel(), ox.ravel()])
    return PatchMatrix(p=p, shape=(h, w), columns=cols, means=means, origins=origins)


def aggregate_patches(pm: PatchMatrix, denoised, width: int | None = None,
                      height: int | None = None, backend=None) -> np.ndarray:
    """Average ``denoised`` columns plus their stored means over each pixel."""
    denoised = np.asarray(denoised, dtype=np.float64)
    if denoised.shape != pm.columns.shape:
        raise DimensionError(f"denoised shape {denoised.shape} != patch matrix {pm.columns.shape}")
    h, w = pm.shape
    if (height is not None and height != h) or (width is not None and width != w):
        raise DimensionError(f"requested {height}x{width} but patches came from {h}x{w}")
    acc = kernels.aggregate(denoised + pm.means, h, w, pm.p, backend=backend)
    return acc / kernels.coverage(h, w, pm.p)


def add_gaussian_noise(img, spec: NoiseSpec) -> np.ndarray:
    """``img`` plus i.i.d. N(0, sigma^2) from a PCG64 stream seeded by ``spec.seed``."""
    img = as_image(img)
    if spec.sigma == 0:
        return img.copy()
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    return img + spec.sigma * rng.standard_normal(img.shape)


def mse(ref, test) -> float:
    ref, test = as_image(ref), as_image(test)
    if ref.shape != test.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {test.shape}")
    d = ref - test
    return float(np.mean(d * d))


def psnr(ref, test, peak: float = PEAK) -> float:
    m = mse(ref, test)
    if m == 0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / m))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def ssim(ref, test, peak: float = PEAK, win_size: int = 11, win_sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM over all fully-contained Gaussian windows."""
    ref, test = as_image(ref), as_image(test)
    if ref.shape != test.shape:
        raise DimensionError(f"shape mismatch {ref.shape} vs {test.shape}")
    if min(ref.shape) < win_size:
        raise DimensionError(f"image {ref.shape} smaller than the {win_size}x{win_size} window")
    g = gaussian_window(win_size, win_sigma)
    half = win_size // 2

    def blur(a):
        a = ndimage.correlate1d(a, g, axis=0, mode="constant")
        a = ndimage.correlate1d(a, g, axis=1, mode="constant")
        return a[half:a.shape[0] - half, half:a.shape[1] - half]

    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    mx, my = blur(ref), blur(test)
    sxx = blur(ref * ref) - mx * mx
    syy = blur(test * test) - my * my
    sxy = blur(ref * test) - mx * my
    smap = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    return float(smap.mean())


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM/PNG (or the raw ``.f64`` dump) as float64."""
    from PIL import Image

    path = Path(path)
    if path.suffix == ".f64":
        return read_raw(path)
    with Image.open(path) as im:
        if im.mode not in ("L", "P", "I;16", "I"):
            raise ValueError(f"{path}: expected a grayscale image, got mode {im.mode}")
        if im.mode == "P":
            im = im.convert("L")
        return np.asarray(im, dtype=np.float64)


def write_image(path, img) -> None:
    """Write as 8-bit grayscale; format from the suffix (.pgm -> binary P5, .png)."""
    from PIL import Image

    path = Path(path)
    if path.suffix == ".f64":
        write_raw(path, img)
        return
    a = np.clip(np.rint(as_image(img)), 0, 255).astype(np.uint8)
    Image.fromarray(a).save(path)


def write_raw(path, img) -> None:
    """Dims as two little-endian uint32 (width, height), then row-major float64 LE."""
    a = as_image(img)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", a.shape[1], a.shape[0]))
        fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_raw(path) -> np.ndarray:
    with open(path, "rb") as fh:
        w, h = struct.unpack("<II", fh.read(8))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != h * w:
        raise DimensionError(f"{path}: header says {h}x{w} but holds {data.size} values")
    return data.reshape(h, w).astype(np.float64)
