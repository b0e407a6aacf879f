"""Periodic 2-D wavelet transforms and subband sets.

Two transforms are provided:

* a critically sampled separable DWT with a 62-tap discrete Meyer filter
  bank (used to denoise subbands), and
* the isotropic undecimated (starlet) transform with the B3-spline kernel
  (used to mix results).

Both use periodic extension. Odd-sized DWT levels are padded by repeating the
last row/column; the original size is recorded so the inverse can crop.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imgcore import DimensionError, as_image, write_raw

# Discrete Meyer low-pass, 62 taps. The common FIR approximation is only
# orthonormal to ~2e-3; these taps are its nearest exactly-orthonormal
# neighbour with H(pi) = 0 (see scripts/derive_dmey_taps.py).
DMEY_TAPS = np.array([
    -2.038951045783666e-08, -1.5540699659636432e-07, -2.9423139352173366e-08,
    2.8060314109616428e-08, -2.709772174886152e-07, -1.966039638954721e-06,
    2.7388291485515495e-06, 4.206044760347475e-06, -1.425901601320816e-05,
    -1.1851974101613125e-05, 5.879798801149795e-05, 3.549483975378846e-05,
    -0.00012080640363609481, -0.00013140802710922677, 0.00021743144172584384,
    0.0002720007168104244, -0.0003195109675646462, -0.0014846049475669238,
    0.0015268144976054395, 0.0032319933093303537, -0.003857223471102959,
    -0.007343379720780717, 0.011513189629372287, 0.010143298712093483,
    -0.018973196781526012, -0.026907054009981432, 0.05353222686908947,
    0.039526086384950664, -0.13281844042465682, -0.03734452889237872,
    0.44276143732923773, 0.7471218146938965, 0.4427614303347741,
    -0.037344526756035695, -0.13281842658644583, 0.039526099754397546,
    0.05353212544829412, -0.026907052515848476, -0.018973213931323563,
    0.01014316472333684, 0.011512774286768274, -0.007343655328499687,
    -0.003859706388454368, 0.0032317610352586255, 0.0015225446935045654,
    -0.0014838569271825488, -0.0002986326642758116, 0.00027414734667907583,
    0.0002738259797370016, -0.00013100580322511387, -4.19809605643251e-05,
    3.946646209561982e-05, -1.1557442722465055e-06, -1.1565333790887344e-05,
    -1.1622172453570966e-05, 3.831739184312276e-06, -2.295840016983078e-08,
    2.322267209657857e-08, -1.730864543885422e-07, -6.305485762979486e-09,
    1.362062900636822e-07, -1.7870363860706336e-08,
])

B3_TAPS = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


class KindMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class FilterBank:
    name: str
    analysis_lo: np.ndarray
    analysis_hi: np.ndarray
    synthesis_lo: np.ndarray
    synthesis_hi: np.ndarray


def quadrature_mirror(lo) -> np.ndarray:
    """High-pass partner ``g[m] = (-1)^m lo[L-1-m]`` of an orthonormal low-pass."""
    lo = np.asarray(lo, dtype=float)
    return lo[::-1] * (-1.0) ** np.arange(lo.size)


DMEY = FilterBank("dmey", DMEY_TAPS, quadrature_mirror(DMEY_TAPS),
                  DMEY_TAPS, quadrature_mirror(DMEY_TAPS))
# Starlet: d = a - h*a, reconstruction is the plain sum of planes.
ASTRO = FilterBank("astro", B3_TAPS, np.r_[0.0, 0.0, 1.0, 0.0, 0.0] - B3_TAPS,
                   np.array([1.0]), np.array([1.0]))


@dataclass
class SubbandSet:
    """One decomposition: coarsest approximation plus detail planes.

    ``details`` is ordered finest scale first. For a DWT each entry is the
    ``(LH, HL, HH)`` triple of that scale; for the IUWT each entry is a
    single plane of the input's size. ``shapes[s]`` is the (unpadded) size
    of the image that scale ``s`` decomposed.
    """

    kind: str
    scales: int
    approx: np.ndarray
    details: list
    shapes: list = field(default_factory=list)

    def planes(self):
        """``(scale, name, array)`` for every plane, approximation last."""
        out = []
        for s, d in enumerate(self.details, start=1):
            if self.kind == "dwt":
                out.extend((s, nm, arr) for nm, arr in zip(("LH", "HL", "HH"), d))
            else:
                out.append((s, "D", d))
        out.append((self.scales, "LL", self.approx))
        return out


# --------------------------------------------------------------------------
# DWT
# --------------------------------------------------------------------------

def _response(taps, n):
    wrapped = np.zeros(n)
    np.add.at(wrapped, np.arange(taps.size) % n, taps)
    return np.fft.rfft(wrapped)


def _along(resp, axis):
    return resp[:, None] if axis == 0 else resp[None, :]


def _analyze(x, bank, axis):
    n = x.shape[axis]
    spec = np.fft.rfft(x, axis=axis)
    lo = np.fft.irfft(spec * _along(np.conj(_response(bank.analysis_lo, n)), axis), n, axis=axis)
    hi = np.fft.irfft(spec * _along(np.conj(_response(bank.analysis_hi, n)), axis), n, axis=axis)
    sl = [slice(None)] * 2
    sl[axis] = slice(0, None, 2)
    return lo[tuple(sl)], hi[tuple(sl)]


def _synthesize(lo, hi, bank, axis):
    n = 2 * lo.shape[axis]
    shape = list(lo.shape)
    shape[axis] = n
    sl = [slice(None)] * 2
    sl[axis] = slice(0, None, 2)
    up_lo = np.zeros(shape)
    up_hi = np.zeros(shape)
    up_lo[tuple(sl)] = lo
    up_hi[tuple(sl)] = hi
    spec = (np.fft.rfft(up_lo, axis=axis) * _along(_response(bank.synthesis_lo, n), axis)
            + np.fft.rfft(up_hi, axis=axis) * _along(_response(bank.synthesis_hi, n), axis))
    return np.fft.irfft(spec, n, axis=axis)


def _pad_even(x):
    h, w = x.shape
    return np.pad(x, ((0, h % 2), (0, w % 2)), mode="edge")


def dwt_level(x, bank: FilterBank = DMEY):
    """One analysis level: returns ``(LL, (LH, HL, HH))``."""
    x = _pad_even(x)
    lo, hi = _analyze(x, bank, axis=1)
    ll, lh = _analyze(lo, bank, axis=0)
    hl, hh = _analyze(hi, bank, axis=0)
    return ll, (lh, hl, hh)


def idwt_level(ll, detail, shape, bank: FilterBank = DMEY):
    lh, hl, hh = detail
    lo = _synthesize(ll, lh, bank, axis=0)
    hi = _synthesize(hl, hh, bank, axis=0)
    x = _synthesize(lo, hi, bank, axis=1)
    return x[:shape[0], :shape[1]]


def dwt_forward(img, J: int, bank: FilterBank = DMEY) -> SubbandSet:
    """J-scale separable 2-D DWT with periodic extension."""
    if J < 1:
        raise ValueError(f"need at least one scale, got J={J}")
    a = as_image(img)
    details, shapes = [], []
    for s in range(J):
        if min(a.shape) < 2:
            raise DimensionError(f"image too small for {J} scales (level {s} input is {a.shape})")
        shapes.append(a.shape)
        a, d = dwt_level(a, bank)
        details.append(d)
    return SubbandSet("dwt", J, a, details, shapes)


def _half(shape):
    return ((shape[0] + 1) // 2, (shape[1] + 1) // 2)


def _check_dwt(sb: SubbandSet, J):
    if sb.kind != "dwt":
        raise KindMismatchError(f"expected a DWT subband set, got {sb.kind!r}")
    if J is not None and J != sb.scales:
        raise ValueError(f"subband set has {sb.scales} scales, asked to invert {J}")
    if len(sb.details) != sb.scales or len(sb.shapes) != sb.scales:
        raise DimensionError("subband set is missing scales")
    for s, (shape, d) in enumerate(zip(sb.shapes, sb.details)):
        want = _half(shape)
        if any(np.shape(b) != want for b in d):
            raise DimensionError(f"scale {s + 1}: detail subbands {[np.shape(b) for b in d]} != {want}")
        if s + 1 < sb.scales and tuple(sb.shapes[s + 1]) != want:
            raise DimensionError(f"scale {s + 2} input {sb.shapes[s + 1]} != {want}")
    if np.shape(sb.approx) != _half(sb.shapes[-1]):
        raise DimensionError(f"approximation {np.shape(sb.approx)} != {_half(sb.shapes[-1])}")


def dwt_inverse(sb: SubbandSet, J: int | None = None, bank: FilterBank = DMEY) -> np.ndarray:
    _check_dwt(sb, J)
    a = np.asarray(sb.approx, dtype=float)
    for s in reversed(range(sb.scales)):
        a = idwt_level(a, sb.details[s], sb.shapes[s], bank)
    return a


# --------------------------------------------------------------------------
# IUWT (starlet)
# --------------------------------------------------------------------------

def _atrous_smooth(a, level):
    step = 2 ** level
    out = np.zeros_like(a)
    for axis in (0, 1):
        out[...] = 0.0
        for t, coef in zip(range(-2, 3), B3_TAPS):
            out += coef * np.roll(a, -t * step, axis=axis)
        a = out.copy()
    return a


def iuwt_forward(img, K: int) -> SubbandSet:
    """K-scale starlet transform: ``img == approx + sum(details)``."""
    if K < 1:
        raise ValueError(f"need at least one scale, got K={K}")
    a = as_image(img).copy()
    details = []
    for j in range(K):
        nxt = _atrous_smooth(a, j)
        details.append(a - nxt)
        a = nxt
    return SubbandSet("iuwt", K, a, details, [a.shape] * K)


def iuwt_inverse(sb: SubbandSet, K: int | None = None) -> np.ndarray:
    if sb.kind != "iuwt":
        raise KindMismatchError(f"expected an IUWT subband set, got {sb.kind!r}")
    if K is not None and K != sb.scales:
        raise ValueError(f"subband set has {sb.scales} scales, asked to invert {K}")
    if len(sb.details) != sb.scales:
        raise DimensionError("subband set is missing scales")
    shape = np.shape(sb.approx)
    if any(np.shape(d) != shape for d in sb.details):
        raise DimensionError("IUWT planes must all share the input's size")
    out = np.array(sb.approx, dtype=float)
    for d in sb.details:
        out = out + d
    return out


# --------------------------------------------------------------------------
# generic access + mixing
# --------------------------------------------------------------------------

def forward(img, scales: int, transform: str = "dwt") -> SubbandSet:
    if transform == "dwt":
        return dwt_forward(img, scales)
    if transform == "iuwt":
        return iuwt_forward(img, scales)
    raise ValueError(f"unknown transform {transform!r} (expected 'dwt' or 'iuwt')")


def inverse(sb: SubbandSet) -> np.ndarray:
    if sb.kind == "dwt":
        return dwt_inverse(sb)
    if sb.kind == "iuwt":
        return iuwt_inverse(sb)
    raise ValueError(f"unknown subband kind {sb.kind!r}")


def mix_subbands(approx_source: SubbandSet, detail_source: SubbandSet) -> SubbandSet:
    """Approximation of the first set with the details of the second."""
    if approx_source.kind != detail_source.kind:
        raise KindMismatchError(f"cannot mix {approx_source.kind} with {detail_source.kind}")
    if approx_source.scales != detail_source.scales:
        raise DimensionError(f"scale counts differ: {approx_source.scales} vs {detail_source.scales}")
    if np.shape(approx_source.approx) != np.shape(detail_source.approx):
        raise DimensionError("approximation sizes differ")
    if [tuple(s) for s in approx_source.shapes] != [tuple(s) for s in detail_source.shapes]:
        raise DimensionError("decompositions come from differently sized images")
    details = [tuple(b.copy() for b in d) if isinstance(d, tuple) else d.copy()
               for d in detail_source.details]
    return SubbandSet(detail_source.kind, detail_source.scales, approx_source.approx.copy(),
                      details, list(detail_source.shapes))


def dump_subbands(sb: SubbandSet, tag: str, directory) -> list[Path]:
    """Write each plane as ``<tag>_s<scale>_<LL|LH|HL|HH|D>.f64``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for s, name, arr in sb.planes():
        path = directory / f"{tag}_s{s}_{name}.f64"
        write_raw(path, arr)
        paths.append(path)
    return paths
