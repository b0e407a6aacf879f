"""Multiscale compositions of a single-scale denoiser.

All compositions take any object with ``name`` and ``denoise(img, sigma)``,
so TLD can be swapped for another patch denoiser.

* :func:`mtld`: denoise every DWT subband, then invert.
* :func:`mmtld`: approximation of the MTLD result mixed with the details of
  the single-scale result, through an undecimated transform
  (``version=1`` mixes once at K scales, ``version=2`` repeats for k = K..1).
* :func:`fmmtld`: only low-pass images are denoised; details come from
  1-scale decompositions of denoised finer levels (``version=1`` mixes once
  at J scales, ``version=2`` walks the approximation pyramid).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from . import wavelets as wv
from .imgcore import as_image


@runtime_checkable
class Denoiser(Protocol):
    name: str

    def denoise(self, img: np.ndarray, sigma: float) -> np.ndarray:
        ...


class IdentityDenoiser:
    """Returns its input unchanged."""

    name = "identity"

    def denoise(self, img, sigma):
        return np.array(img, dtype=float)


class CountingDenoiser:
    """Wraps a denoiser and records the shape and sigma of every call."""

    def __init__(self, inner: Denoiser | None = None):
        self.inner = inner if inner is not None else IdentityDenoiser()
        self.name = f"counting({self.inner.name})"
        self.calls: list[tuple[tuple[int, int], float]] = []

    def denoise(self, img, sigma):
        self.calls.append((np.shape(img), float(sigma)))
        return self.inner.denoise(img, sigma)

    def reset(self):
        self.calls.clear()


class CachedDenoiser:
    """Memoises a pure denoiser on the exact bytes of its input.

    Lets a benchmark reuse e.g. the single-scale result between TLD, MMTLD
    and FMMTLD without changing any output.
    """

    def __init__(self, inner: Denoiser, maxsize: int = 64):
        self.inner = inner
        self.name = inner.name
        self.maxsize = maxsize
        self.hits = 0
        self._store: dict[bytes, np.ndarray] = {}

    @staticmethod
    def _key(img, sigma):
        a = np.ascontiguousarray(img, dtype=np.float64)
        h = hashlib.blake2b(digest_size=16)
        h.update(np.array(a.shape, dtype="<i8").tobytes())
        h.update(np.float64(sigma).tobytes())
        h.update(a.tobytes())
        return h.digest()

    def denoise(self, img, sigma):
        key = self._key(img, sigma)
        if key in self._store:
            self.hits += 1
            return self._store[key].copy()
        out = np.asarray(self.inner.denoise(img, sigma), dtype=float)
        if len(self._store) >= self.maxsize:
            self._store.pop(next(iter(self._store)))
        self._store[key] = out.copy()
        return out

    def clear(self):
        self._store.clear()


SigmaRule = Callable[[float, int, str], float]


def _identity_rule(sigma, scale, band):
    return sigma


SIGMA_RULES: dict[str, SigmaRule] = {"identity": _identity_rule}


@dataclass(frozen=True)
class MsConfig:
    """Settings shared by the compositions.

    ``sigma_subband_rule`` maps ``(sigma, scale, band)`` to the noise level
    handed to the denoiser for a DWT plane (``band`` is LL, LH, HL or HH);
    either a callable or a key of ``SIGMA_RULES``. ``literal`` makes
    ``fmmtld(version=2)`` re-denoise every pyramid level it touches instead
    of denoising each level once.
    """

    J: int = 1
    K: int = 1
    denoise_bank: str = "dmey"
    mix_bank: str = "iuwt"
    sigma_subband_rule: str | SigmaRule = "identity"
    literal: bool = False

    def __post_init__(self):
        if self.J < 1 or self.K < 1:
            raise ValueError(f"J and K must be >= 1, got J={self.J}, K={self.K}")
        if self.denoise_bank != "dmey":
            raise ValueError(f"unknown denoising filter bank {self.denoise_bank!r}")
        if self.mix_bank not in ("iuwt", "dmey"):
            raise ValueError(f"unknown mixing filter bank {self.mix_bank!r}")
        if isinstance(self.sigma_subband_rule, str) and self.sigma_subband_rule not in SIGMA_RULES:
            raise ValueError(f"unknown sigma rule {self.sigma_subband_rule!r}")

    def subband_sigma(self, sigma, scale, band) -> float:
        rule = self.sigma_subband_rule
        if isinstance(rule, str):
            rule = SIGMA_RULES[rule]
        return float(rule(sigma, scale, band))

    @property
    def mix_transform(self) -> str:
        return "iuwt" if self.mix_bank == "iuwt" else "dwt"

    def as_dict(self) -> dict:
        rule = self.sigma_subband_rule
        return {"J": self.J, "K": self.K, "denoise_bank": self.denoise_bank,
                "mix_bank": self.mix_bank, "literal": self.literal,
                "sigma_subband_rule": rule if isinstance(rule, str) else getattr(rule, "__name__", repr(rule))}


def _denoise(d: Denoiser, img, sigma):
    out = np.asarray(d.denoise(img, sigma), dtype=float)
    if out.shape != np.shape(img):
        raise ValueError(f"denoiser {d.name!r} changed shape {np.shape(img)} -> {out.shape}")
    return out


# --------------------------------------------------------------------------
# MTLD
# --------------------------------------------------------------------------

def mtld_subbands(img, sigma, cfg: MsConfig, d: Denoiser) -> wv.SubbandSet:
    """J-scale DWT of ``img`` with every plane denoised."""
    sb = wv.dwt_forward(as_image(img), cfg.J)
    details = []
    for s, triple in enumerate(sb.details, start=1):
        details.append(tuple(_denoise(d, plane, cfg.subband_sigma(sigma, s, band))
                             for band, plane in zip(("LH", "HL", "HH"), triple)))
    approx = _denoise(d, sb.approx, cfg.subband_sigma(sigma, cfg.J, "LL"))
    return wv.SubbandSet("dwt", sb.scales, approx, details, sb.shapes)


def mtld(img, sigma, cfg: MsConfig | None, d: Denoiser) -> np.ndarray:
    cfg = cfg or MsConfig()
    return wv.dwt_inverse(mtld_subbands(img, sigma, cfg, d))


# --------------------------------------------------------------------------
# MMTLD
# --------------------------------------------------------------------------

def mix_results(x_single, x_multi, K: int, transform: str = "iuwt") -> np.ndarray:
    """One mixing pass: approximation of ``x_multi``, details of ``x_single``."""
    sb_s = wv.forward(x_single, K, transform)
    sb_m = wv.forward(x_multi, K, transform)
    return wv.inverse(wv.mix_subbands(sb_m, sb_s))


def mmtld1(img, sigma, cfg: MsConfig | None, d: Denoiser) -> np.ndarray:
    cfg = cfg or MsConfig()
    img = as_image(img)
    x_s = _denoise(d, img, sigma)
    x_m = mtld(img, sigma, cfg, d)
    return mix_results(x_s, x_m, cfg.K, cfg.mix_transform)


def mmtld2(img, sigma, cfg: MsConfig | None, d: Denoiser) -> np.ndarray:
    cfg = cfg or MsConfig()
    img = as_image(img)
    x_s = _denoise(d, img, sigma)
    x_m = mtld(img, sigma, cfg, d)
    temp = x_s
    for k in range(cfg.K, 0, -1):
        temp = mix_results(temp, x_m, k, cfg.mix_transform)
    return temp


def mmtld(img, sigma, cfg: MsConfig | None, d: Denoiser, version: int = 2) -> np.ndarray:
    if version == 1:
        return mmtld1(img, sigma, cfg, d)
    if version == 2:
        return mmtld2(img, sigma, cfg, d)
    raise ValueError(f"version must be 1 or 2, got {version}")


# --------------------------------------------------------------------------
# FMMTLD
# --------------------------------------------------------------------------

def fmmtld1(img, sigma, cfg: MsConfig | None, d: Denoiser) -> np.ndarray:
    cfg = cfg or MsConfig()
    img = as_image(img)
    x_s = _denoise(d, img, sigma)
    sb_s = wv.dwt_forward(x_s, cfg.J)
    approx = wv.dwt_forward(img, cfg.J).approx
    approx = _denoise(d, approx, cfg.subband_sigma(sigma, cfg.J, "LL"))
    return wv.dwt_inverse(wv.SubbandSet("dwt", cfg.J, approx, sb_s.details, sb_s.shapes))


def approximation_pyramid(img, J: int) -> list[np.ndarray]:
    """``[img, A1, ..., AJ]`` where each level is the 1-scale DWT approximation of the previous."""
    levels = [as_image(img)]
    for _ in range(J):
        levels.append(wv.dwt_forward(levels[-1], 1).approx)
    return levels


def fmmtld2(img, sigma, cfg: MsConfig | None, d: Denoiser) -> np.ndarray:
    cfg = cfg or MsConfig()
    A = approximation_pyramid(img, cfg.J)
    # level 0 carries the image-domain sigma; level s is an LL plane at scale s
    sig = [sigma] + [cfg.subband_sigma(sigma, s, "LL") for s in range(1, cfg.J + 1)]
    A[cfg.J] = _denoise(d, A[cfg.J], sig[cfg.J])
    for s in range(cfg.J, 0, -1):
        if cfg.literal and s < cfg.J:
            A[s] = _denoise(d, A[s], sig[s])
        fine = wv.dwt_forward(_denoise(d, A[s - 1], sig[s - 1]), 1)
        # A[s] is already a level-s approximation, so it replaces the LL plane directly
        A[s - 1] = wv.dwt_inverse(wv.SubbandSet("dwt", 1, A[s], fine.details, fine.shapes))
    return A[0]


def fmmtld(img, sigma, cfg: MsConfig | None, d: Denoiser, version: int = 2) -> np.ndarray:
    if version == 1:
        return fmmtld1(img, sigma, cfg, d)
    if version == 2:
        return fmmtld2(img, sigma, cfg, d)
    raise ValueError(f"version must be 1 or 2, got {version}")


METHODS = ("tld", "mtld", "mmtld", "fmmtld")


def run_method(method: str, img, sigma, cfg: MsConfig | None, d: Denoiser, version: int = 2) -> np.ndarray:
    """Dispatch by name; ``tld`` means the plain single-scale denoiser."""
    if method == "tld":
        return _denoise(d, as_image(img), sigma)
    if method == "mtld":
        return mtld(img, sigma, cfg, d)
    if method == "mmtld":
        return mmtld(img, sigma, cfg, d, version)
    if method == "fmmtld":
        return fmmtld(img, sigma, cfg, d, version)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
