"""Sparsifying-transform-learning denoising with multiscale subband mixing."""
from .imgcore import (DenoiseReport, DimensionError, NoiseSpec, PatchMatrix, add_gaussian_noise,
                      aggregate_patches, extract_patches, psnr, read_image, ssim, write_image)
from .multiscale import (CachedDenoiser, CountingDenoiser, Denoiser, IdentityDenoiser, MsConfig,
                         fmmtld, mmtld, mtld, run_method)
from .tld import TLD, TldConfig, tld_denoise
from .wavelets import SubbandSet, dwt_forward, dwt_inverse, iuwt_forward, iuwt_inverse, mix_subbands

__version__ = "0.1.0"

__all__ = [
    "DenoiseReport", "DimensionError", "NoiseSpec", "PatchMatrix", "add_gaussian_noise",
    "aggregate_patches", "extract_patches", "psnr", "read_image", "ssim", "write_image",
    "CachedDenoiser", "CountingDenoiser", "Denoiser", "IdentityDenoiser", "MsConfig",
    "fmmtld", "mmtld", "mtld", "run_method", "TLD", "TldConfig", "tld_denoise",
    "SubbandSet", "dwt_forward", "dwt_inverse", "iuwt_forward", "iuwt_inverse", "mix_subbands",
]
